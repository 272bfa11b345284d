#include "pmiris/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "pmiris/error.hpp"
#include "pmiris/io.hpp"

namespace pmiris {
namespace {

/// (M M^T)^{-1/2} M, via the eigendecomposition of the symmetric M M^T.
Eigen::MatrixXd symmetric_decorrelate(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd mmt = m * m.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mmt);
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * m;
}

inline int wrap(int c, int cols) { return ((c % cols) + cols) % cols; }

}  // namespace

void validate_bank(const FilterBank& bank, double mean_tolerance) {
  if (bank.n_filters <= 0 || bank.kernel_height <= 0 || bank.kernel_width <= 0)
    throw InvariantViolation("filter bank: dimensions must be positive");
  if (bank.kernel_height % 2 == 0 || bank.kernel_width % 2 == 0)
    throw InvariantViolation("filter bank: kernel dimensions must be odd");
  if (bank.coefficients.size() != bank.n_filters * bank.kernel_size())
    throw InvariantViolation("filter bank: coefficient count does not match dimensions");
  for (int f = 0; f < bank.n_filters; ++f) {
    const auto k = bank.kernel(f);
    double sum = 0.0;
    for (double v : k) {
      if (!std::isfinite(v)) throw InvariantViolation("filter bank: non-finite coefficient");
      sum += v;
    }
    const double mean = sum / static_cast<double>(k.size());
    if (std::abs(mean) > mean_tolerance)
      throw InvariantViolation("filter bank: kernel " + std::to_string(f) +
                               " is not zero-mean (mean " + io::format_double(mean) + ")");
  }
  for (int a = 0; a < bank.n_filters; ++a)
    for (int b = a + 1; b < bank.n_filters; ++b) {
      const auto ka = bank.kernel(a), kb = bank.kernel(b);
      double dot = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < ka.size(); ++i) {
        dot += ka[i] * kb[i];
        na += ka[i] * ka[i];
        nb += kb[i] * kb[i];
      }
      if (na == 0.0 || nb == 0.0 || std::abs(dot) >= (1.0 - 1e-9) * std::sqrt(na * nb))
        throw InvariantViolation("filter bank: kernels " + std::to_string(a) + " and " +
                                 std::to_string(b) + " are linearly dependent");
    }
}

std::string format_bank(const FilterBank& bank) {
  std::string out = "HDBIF-BANK " + std::to_string(bank.n_filters) + " " +
                    std::to_string(bank.kernel_height) + " " + std::to_string(bank.kernel_width) +
                    "\n";
  char buf[40];
  for (int f = 0; f < bank.n_filters; ++f) {
    const auto k = bank.kernel(f);
    for (int r = 0; r < bank.kernel_height; ++r) {
      for (int c = 0; c < bank.kernel_width; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", k[r * bank.kernel_width + c]);
        if (c) out += ' ';
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

FilterBank parse_bank(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  FilterBank bank;
  if (!(in >> magic) || magic != "HDBIF-BANK")
    throw ParseError("filter bank: missing 'HDBIF-BANK' header", 1);
  if (!(in >> bank.n_filters >> bank.kernel_height >> bank.kernel_width))
    throw ParseError("filter bank: malformed header dimensions", 1);
  if (bank.n_filters <= 0 || bank.kernel_height <= 0 || bank.kernel_width <= 0)
    throw ParseError("filter bank: header dimensions must be positive", 1);
  std::string tok;
  while (in >> tok) {
    try {
      bank.coefficients.push_back(io::parse_double(tok));
    } catch (const InvalidInput&) {
      throw ParseError("filter bank: bad coefficient '" + tok + "'");
    }
  }
  const auto expected = bank.n_filters * bank.kernel_size();
  if (bank.coefficients.size() != expected)
    throw DimensionMismatch("filter bank: header declares " + std::to_string(expected) +
                            " coefficients, file has " + std::to_string(bank.coefficients.size()));
  bank.provenance = BankProvenance::loaded;
  validate_bank(bank);
  return bank;
}

void save_bank(const std::filesystem::path& path, const FilterBank& bank) {
  io::write_file_atomic(path, format_bank(bank));
}

FilterBank load_bank(const std::filesystem::path& path) { return parse_bank(io::read_file(path)); }

IcaResult learn_filters_ica(const Eigen::MatrixXd& patches, const IcaOptions& opt) {
  const int k = opt.kernel_size;
  const long d = static_cast<long>(k) * k;
  const int n = opt.n_filters;
  if (k <= 0 || k % 2 == 0) throw InvalidInput("ICA: kernel size must be odd and positive");
  if (n <= 0 || n > d - 1) throw InvalidInput("ICA: need 1 <= n_filters <= kernel_size^2 - 1");
  if (patches.cols() != d)
    throw DimensionMismatch("ICA: patches have " + std::to_string(patches.cols()) +
                            " pixels, expected " + std::to_string(d));
  const long count = patches.rows();
  if (count < 50L * n)
    throw InsufficientData("ICA: need at least " + std::to_string(50L * n) + " patches, got " +
                           std::to_string(count));

  // (1) remove each patch's DC, then centre every pixel dimension.
  Eigen::MatrixXd x = patches;
  x.colwise() -= x.rowwise().mean();
  x.rowwise() -= x.colwise().mean();

  // (2) PCA whitening to n components.
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(count);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd evals = es.eigenvalues();  // ascending
  const double top = evals(d - 1);
  const double kept_min = evals(d - n);
  if (!(top > 1e-12) || !(kept_min > 1e-10 * top))
    throw InsufficientData("ICA: patch covariance has insufficient rank for " +
                           std::to_string(n) + " components");
  Eigen::MatrixXd whitening(n, d);
  for (int i = 0; i < n; ++i)
    whitening.row(i) = es.eigenvectors().col(d - 1 - i).transpose() / std::sqrt(evals(d - 1 - i));
  const Eigen::MatrixXd z = whitening * x.transpose();  // n x count

  IcaResult result;
  const Eigen::MatrixXd zcov = (z * z.transpose()) / static_cast<double>(count);
  result.whitened_covariance_error =
      (zcov - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();

  // (3) symmetric FastICA, g(u) = tanh(u).
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w(i, j) = normal(rng);
  w = symmetric_decorrelate(w);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Eigen::MatrixXd y = w * z;
    const Eigen::MatrixXd g = y.array().tanh().matrix();
    const Eigen::VectorXd g_prime_mean =
        (1.0 - g.array().square()).matrix().rowwise().sum() / static_cast<double>(count);
    Eigen::MatrixXd w_next =
        (g * z.transpose()) / static_cast<double>(count) - g_prime_mean.asDiagonal() * w;
    w_next = symmetric_decorrelate(w_next);
    const double rotation =
        ((w_next * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = w_next;
    result.iterations = it;
    if (rotation < opt.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.unmixing = w;
  result.whitening = whitening;
  result.orthonormality_error =
      (w.transpose() * w - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();

  // (4) back to pixel space, zero-mean, canonical sign (largest-magnitude entry positive).
  const Eigen::MatrixXd filters = w * whitening;  // n x d
  FilterBank bank;
  bank.n_filters = n;
  bank.kernel_height = k;
  bank.kernel_width = k;
  bank.provenance = BankProvenance::learned_ica;
  bank.coefficients.resize(static_cast<std::size_t>(n) * d);
  for (int f = 0; f < n; ++f) {
    Eigen::VectorXd row = filters.row(f).transpose();
    row.array() -= row.mean();
    Eigen::Index arg = 0;
    row.cwiseAbs().maxCoeff(&arg);
    if (row(arg) < 0) row = -row;
    std::copy(row.data(), row.data() + d, bank.coefficients.begin() + f * d);
  }
  result.bank = std::move(bank);
  return result;
}

Eigen::MatrixXd sample_patches(std::span<const NormalizedIris> irises, int size, int count,
                               std::uint64_t seed) {
  if (irises.empty()) throw InsufficientData("sample_patches: no normalized irises");
  if (size <= 0 || count <= 0) throw InvalidInput("sample_patches: size and count must be positive");
  Eigen::MatrixXd out(count, static_cast<long>(size) * size);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, irises.size() - 1);
  long filled = 0;
  const long max_attempts = 200L * count;
  for (long attempt = 0; attempt < max_attempts && filled < count; ++attempt) {
    const auto& n = irises[pick(rng)];
    if (n.rows() < size || n.cols() < size) continue;
    std::uniform_int_distribution<int> row(0, n.rows() - size);
    std::uniform_int_distribution<int> col(0, n.cols() - 1);
    const int r0 = row(rng), c0 = col(rng);
    bool ok = true;
    for (int r = 0; r < size && ok; ++r)
      for (int c = 0; c < size && ok; ++c) ok = n.validity_mask(wrap(c0 + c, n.cols()), r0 + r) != 0;
    if (!ok) continue;
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c)
        out(filled, r * size + c) = n.texture(wrap(c0 + c, n.cols()), r0 + r);
    ++filled;
  }
  if (filled < count)
    throw InsufficientData("sample_patches: found only " + std::to_string(filled) +
                           " fully valid patches of " + std::to_string(count));
  return out;
}

IrisCode::IrisCode(int n_filters, int rows, int cols)
    : n_filters_(n_filters), rows_(rows), cols_(cols) {
  if (n_filters <= 0 || rows <= 0 || cols <= 0) throw InvalidInput("IrisCode: dims must be positive");
  bit_count_ = static_cast<std::size_t>(n_filters) * rows * cols;
  bits_.assign((bit_count_ + 63) / 64, 0);
  mask_.assign((bit_count_ + 63) / 64, 0);
}

IrisCode IrisCode::shifted(int shift) const {
  IrisCode out(n_filters_, rows_, cols_);
  const int s = wrap(shift, cols_);
  if (cols_ % 64 == 0) {
    // Row-wise word rotation: each (filter, row) is cols/64 whole words.
    const int words = cols_ / 64;
    const int word_shift = s / 64, bit_shift = s % 64;
    for (int fr = 0; fr < n_filters_ * rows_; ++fr) {
      const std::size_t base = static_cast<std::size_t>(fr) * words;
      for (int wi = 0; wi < words; ++wi) {
        // Output bit c takes input bit c - s.
        const int src = wrap(wi - word_shift, words);
        const int prev = wrap(src - 1, words);
        for (auto [in, outv] : {std::pair{&bits_, &out.bits_}, std::pair{&mask_, &out.mask_}}) {
          const std::uint64_t lo = (*in)[base + src];
          const std::uint64_t hi = (*in)[base + prev];
          (*outv)[base + wi] = bit_shift == 0 ? lo : (lo << bit_shift) | (hi >> (64 - bit_shift));
        }
      }
    }
    return out;
  }
  for (int f = 0; f < n_filters_; ++f)
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) {
        const int src = wrap(c - s, cols_);
        out.set_bit(f, r, c, bit(f, r, src));
        out.set_valid(f, r, c, valid(f, r, src));
      }
  return out;
}

std::string serialize_code(const IrisCode& code) {
  std::string out = "IRISCODE " + std::to_string(code.n_filters()) + " " +
                    std::to_string(code.rows()) + " " + std::to_string(code.cols()) + "\n";
  const std::size_t nbytes = (code.bit_count() + 7) / 8;
  for (const auto* words : {&code.bit_words(), &code.mask_words()})
    for (std::size_t b = 0; b < nbytes; ++b)
      out += static_cast<char>(((*words)[b / 8] >> (8 * (b % 8))) & 0xFFu);
  return out;
}

IrisCode deserialize_code(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ParseError("iris code: missing header line", 1);
  std::istringstream hdr{std::string(bytes.substr(0, nl))};
  std::string magic;
  int n = 0, r = 0, c = 0;
  if (!(hdr >> magic >> n >> r >> c) || magic != "IRISCODE" || n <= 0 || r <= 0 || c <= 0)
    throw ParseError("iris code: malformed header", 1);
  IrisCode code(n, r, c);
  const std::size_t nbytes = (code.bit_count() + 7) / 8;
  if (bytes.size() - nl - 1 != 2 * nbytes)
    throw ParseError("iris code: payload is " + std::to_string(bytes.size() - nl - 1) +
                     " bytes, expected " + std::to_string(2 * nbytes));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (auto* words : {&code.bit_words(), &code.mask_words()}) {
    for (std::size_t b = 0; b < nbytes; ++b)
      (*words)[b / 8] |= static_cast<std::uint64_t>(p[b]) << (8 * (b % 8));
    p += nbytes;
    // Bits past bit_count() stay zero.
    if (code.bit_count() % 64)
      words->back() &= (std::uint64_t{1} << (code.bit_count() % 64)) - 1;
  }
  return code;
}

void save_code(const std::filesystem::path& path, const IrisCode& code) {
  io::write_file_atomic(path, serialize_code(code));
}

IrisCode load_code(const std::filesystem::path& path) {
  return deserialize_code(io::read_file(path));
}

double filter_response(const NormalizedIris& norm, const FilterBank& bank, int f, int row, int col) {
  const int hr = bank.kernel_height / 2, hc = bank.kernel_width / 2;
  const auto k = bank.kernel(f);
  double acc = 0.0;
  for (int u = 0; u < bank.kernel_height; ++u) {
    const int rr = std::clamp(row + u - hr, 0, norm.rows() - 1);
    for (int v = 0; v < bank.kernel_width; ++v)
      acc += k[u * bank.kernel_width + v] * norm.texture(wrap(col + v - hc, norm.cols()), rr);
  }
  return acc;
}

IrisCode encode(const NormalizedIris& norm, const FilterBank& bank) {
  const int rows = norm.rows(), cols = norm.cols();
  const int kh = bank.kernel_height, kw = bank.kernel_width;
  if (rows < kh || cols < kw)
    throw DimensionMismatch("encode: normalized iris smaller than the filter kernels");
  if (!norm.validity_mask.same_shape(norm.texture))
    throw DimensionMismatch("encode: texture and mask shapes differ");
  const int hr = kh / 2, hc = kw / 2;

  // Padded texture: replicate rows, wrap columns. Row-major with stride pw.
  const int ph = rows + 2 * hr, pw = cols + 2 * hc;
  std::vector<double> padded(static_cast<std::size_t>(ph) * pw);
  for (int r = 0; r < ph; ++r) {
    const int sr = std::clamp(r - hr, 0, rows - 1);
    for (int c = 0; c < pw; ++c) padded[static_cast<std::size_t>(r) * pw + c] = norm.texture(wrap(c - hc, cols), sr);
  }

  // Erosion of the validity mask by the kh x kw footprint: circular along columns,
  // clamped along rows.
  std::vector<std::uint8_t> hmin(static_cast<std::size_t>(rows) * cols), valid(hmin.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::uint8_t m = 1;
      for (int v = -hc; v <= hc && m; ++v) m = norm.validity_mask(wrap(c + v, cols), r) ? 1 : 0;
      hmin[static_cast<std::size_t>(r) * cols + c] = m;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::uint8_t m = 1;
      for (int u = -hr; u <= hr && m; ++u)
        m = hmin[static_cast<std::size_t>(std::clamp(r + u, 0, rows - 1)) * cols + c];
      valid[static_cast<std::size_t>(r) * cols + c] = m;
    }

  IrisCode code(bank.n_filters, rows, cols);
  // Responses are thresholded in parallel into a byte per bit, then packed serially.
  std::vector<std::uint8_t> bits(code.bit_count());
  const int tasks = bank.n_filters * rows;
#pragma omp parallel for schedule(static)
  for (int t = 0; t < tasks; ++t) {
    const int f = t / rows, r = t % rows;
    const auto k = bank.kernel(f);
    std::vector<double> acc(cols, 0.0);
    for (int u = 0; u < kh; ++u) {
      const double* prow = padded.data() + static_cast<std::size_t>(r + u) * pw;
      for (int v = 0; v < kw; ++v) {
        const double kv = k[u * kw + v];
        const double* src = prow + v;
        for (int c = 0; c < cols; ++c) acc[c] += kv * src[c];
      }
    }
    const std::size_t base = code.index(f, r, 0);
    for (int c = 0; c < cols; ++c) bits[base + c] = acc[c] > 0.0 ? 1 : 0;
  }
  for (int f = 0; f < bank.n_filters; ++f)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const std::size_t i = code.index(f, r, c);
        code.set_bit(f, r, c, bits[i] != 0);
        code.set_valid(f, r, c, valid[static_cast<std::size_t>(r) * cols + c] != 0);
      }
  return code;
}

}  // namespace pmiris
