#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pmiris/normalization.hpp"

namespace pmiris {

enum class BankProvenance { learned_ica, loaded };

/// n_filters kernels of kernel_height x kernel_width, row-major per filter.
struct FilterBank {
  int n_filters = 0;
  int kernel_height = 0;
  int kernel_width = 0;
  std::vector<double> coefficients;
  BankProvenance provenance = BankProvenance::loaded;

  std::size_t kernel_size() const {
    return static_cast<std::size_t>(kernel_height) * static_cast<std::size_t>(kernel_width);
  }
  std::span<const double> kernel(int f) const {
    return {coefficients.data() + f * kernel_size(), kernel_size()};
  }
};

/// Throws InvariantViolation if a kernel is not zero-mean within `mean_tolerance`,
/// two kernels are linearly dependent, or the shape is inconsistent.
void validate_bank(const FilterBank& bank, double mean_tolerance = 1e-6);

/// Text format: `HDBIF-BANK n h w`, then n*h*w coefficients (17 significant digits).
void save_bank(const std::filesystem::path& path, const FilterBank& bank);
FilterBank load_bank(const std::filesystem::path& path);
std::string format_bank(const FilterBank& bank);
FilterBank parse_bank(std::string_view text);

struct IcaOptions {
  int n_filters = 7;
  int kernel_size = 17;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  double tolerance = 1e-5;
};

struct IcaResult {
  FilterBank bank;
  Eigen::MatrixXd whitening;  ///< n_filters x d, maps centred patches to white space
  Eigen::MatrixXd unmixing;   ///< n_filters x n_filters, orthonormal
  double whitened_covariance_error = 0.0;  ///< max |cov(white) - I|
  double orthonormality_error = 0.0;       ///< max |W^T W - I|
  int iterations = 0;
  bool converged = false;
};

/// Learns a filter bank from square patches (one patch per row, row-major pixels):
/// per-patch DC removal and centring, PCA whitening to n_filters components, symmetric
/// FastICA with g = tanh, back-projection to pixel space. Deterministic for a fixed seed.
/// Throws InsufficientData for too few patches or rank-deficient data.
IcaResult learn_filters_ica(const Eigen::MatrixXd& patches, const IcaOptions& options);

/// Samples `count` patches whose full footprint is valid (angular wrap, no radial wrap).
Eigen::MatrixXd sample_patches(std::span<const NormalizedIris> irises, int size, int count,
                               std::uint64_t seed);

/// Bit-packed binary code plus validity mask; flat index (filter, row, col) row-major,
/// bit i lives in word i / 64 at position i % 64.
class IrisCode {
 public:
  IrisCode() = default;
  IrisCode(int n_filters, int rows, int cols);

  int n_filters() const { return n_filters_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t bit_count() const { return bit_count_; }

  std::size_t index(int f, int r, int c) const {
    return (static_cast<std::size_t>(f) * rows_ + r) * cols_ + c;
  }
  bool bit(int f, int r, int c) const { return get(bits_, index(f, r, c)); }
  bool valid(int f, int r, int c) const { return get(mask_, index(f, r, c)); }
  void set_bit(int f, int r, int c, bool v) { put(bits_, index(f, r, c), v); }
  void set_valid(int f, int r, int c, bool v) { put(mask_, index(f, r, c), v); }

  const std::vector<std::uint64_t>& bit_words() const { return bits_; }
  const std::vector<std::uint64_t>& mask_words() const { return mask_; }
  std::vector<std::uint64_t>& bit_words() { return bits_; }
  std::vector<std::uint64_t>& mask_words() { return mask_; }

  bool same_dims(const IrisCode& o) const {
    return n_filters_ == o.n_filters_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

  /// Circular column shift: result(f, r, c) = this(f, r, c - shift).
  IrisCode shifted(int shift) const;

  friend bool operator==(const IrisCode&, const IrisCode&) = default;

 private:
  static bool get(const std::vector<std::uint64_t>& w, std::size_t i) {
    return (w[i >> 6] >> (i & 63)) & 1u;
  }
  static void put(std::vector<std::uint64_t>& w, std::size_t i, bool v) {
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (v)
      w[i >> 6] |= m;
    else
      w[i >> 6] &= ~m;
  }

  int n_filters_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  std::size_t bit_count_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint64_t> mask_;
};

/// `IRISCODE n r c\n`, then code bits and mask bits, 8 per byte, LSB first.
void save_code(const std::filesystem::path& path, const IrisCode& code);
IrisCode load_code(const std::filesystem::path& path);
std::string serialize_code(const IrisCode& code);
IrisCode deserialize_code(std::string_view bytes);

/// Correlates every filter with the texture (circular in angle, replicate radially) and
/// keeps the sign; a bit is valid only if its whole kernel footprint was valid.
IrisCode encode(const NormalizedIris& norm, const FilterBank& bank);

/// Raw filter response at one texture location, same padding as encode().
double filter_response(const NormalizedIris& norm, const FilterBank& bank, int f, int row, int col);

}  // namespace pmiris
