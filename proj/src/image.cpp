#include "pmiris/image.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "pmiris/io.hpp"

namespace pmiris {
namespace {

class PgmCursor {
 public:
  explicit PgmCursor(const std::string& bytes) : s_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    auto start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) throw ParseError("PGM: unexpected end of header");
    return s_.substr(start, pos_ - start);
  }
  int integer() {
    auto t = token();
    try {
      return static_cast<int>(io::parse_int(t));
    } catch (const InvalidInput&) {
      throw ParseError("PGM: bad header field '" + t + "'");
    }
  }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  PgmCursor cur(bytes);
  const auto magic = cur.token();
  if (magic != "P5" && magic != "P2") throw ParseError("not a PGM file: " + path.string());
  const int w = cur.integer();
  const int h = cur.integer();
  const int maxval = cur.integer();
  if (w <= 0 || h <= 0) throw ParseError("PGM: non-positive dimensions in " + path.string());
  if (maxval <= 0 || maxval > 255) throw ParseError("PGM: only 8-bit images are supported");
  GrayImage img(w, h);
  const auto n = img.size();
  if (magic == "P5") {
    const auto start = cur.pos() + 1;  // single whitespace after maxval
    if (bytes.size() < start + n) throw ParseError("PGM: truncated pixel data in " + path.string());
    for (std::size_t i = 0; i < n; ++i)
      img.data()[i] = static_cast<std::uint8_t>(bytes[start + i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = cur.integer();
      if (v < 0 || v > maxval) throw ParseError("PGM: pixel out of range");
      img.data()[i] = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255) {
    for (auto& p : img.data())
      p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.data().data()), image.size());
  io::write_file_atomic(path, out);
}

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  auto img = read_pgm(path);
  for (auto& p : img.data()) p = p != 0 ? 1 : 0;
  return img;
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  GrayImage img = mask;
  for (auto& p : img.data()) p = p != 0 ? 255 : 0;
  write_pgm(path, img);
}

double bilinear(const GrayImage& image, double x, double y) noexcept {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, image.width() - 1);
  const int y1 = std::min(y0 + 1, image.height() - 1);
  const double top = (1.0 - fx) * image(x0, y0) + fx * image(x1, y0);
  const double bottom = (1.0 - fx) * image(x0, y1) + fx * image(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

}  // namespace pmiris
