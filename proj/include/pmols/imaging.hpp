#pragma once

// Synthetic ghost-imaging pipeline: non-negative lifting of patterns,
// bucket-detector sampling, correlation (GI) reconstruction, PSNR / MSE and
// binary PGM input/output.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmols/errors.hpp"
#include "pmols/matrix_core.hpp"

namespace pmols {

/// Row-major grayscale image with nonnegative finite pixels.
class ObjectImage {
 public:
  ObjectImage() = default;

  ObjectImage(Index height, Index width, std::vector<double> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    require(height > 0 && width > 0, ErrorKind::Dimension, "image dimensions must be positive");
    require(static_cast<Index>(pixels_.size()) == height * width, ErrorKind::Dimension,
            "pixel count does not match " + std::to_string(height) + "x" + std::to_string(width));
    for (std::size_t i = 0; i < pixels_.size(); ++i) {
      if (!std::isfinite(pixels_[i]) || pixels_[i] < 0.0) {
        fail(ErrorKind::Validation, "pixel " + std::to_string(i) + " is negative or not finite");
      }
    }
  }

  static ObjectImage from_vector(Index height, Index width, const Vector& v) {
    return ObjectImage(height, width, std::vector<double>(v.data(), v.data() + v.size()));
  }

  Index height() const noexcept { return height_; }
  Index width() const noexcept { return width_; }
  Index size() const noexcept { return height_ * width_; }
  const std::vector<double>& pixels() const noexcept { return pixels_; }
  double at(Index row, Index col) const { return pixels_[static_cast<std::size_t>(row * width_ + col)]; }

  Vector to_vector() const {
    return Eigen::Map<const Vector>(pixels_.data(), static_cast<Index>(pixels_.size()));
  }

  Index nonzero_count() const {
    return static_cast<Index>(std::count_if(pixels_.begin(), pixels_.end(), [](double p) { return p != 0.0; }));
  }

  friend bool operator==(const ObjectImage&, const ObjectImage&) = default;

 private:
  Index height_ = 0;
  Index width_ = 0;
  std::vector<double> pixels_;
};

/// Psi0 = Psi + c0 (entrywise), with every entry of Psi0 nonnegative.
struct LiftedSystem {
  Matrix Psi0;
  double c0 = 0.0;
  Matrix base;
};

inline LiftedSystem lift_nonnegative(const Matrix& psi, std::optional<double> c0 = std::nullopt) {
  require_finite(psi, "Psi");
  Index min_row = 0, min_col = 0;
  const double min_entry = psi.minCoeff(&min_row, &min_col);
  const double lift = c0.value_or(std::max(0.0, -min_entry));
  require(std::isfinite(lift), ErrorKind::Domain, "lifting constant must be finite");
  if (min_entry + lift < 0.0) {
    fail(ErrorKind::Negativity, "lifting constant " + std::to_string(lift) + " leaves entry (" +
                                    std::to_string(min_row) + "," + std::to_string(min_col) +
                                    ") = " + std::to_string(min_entry + lift) + " negative");
  }
  return LiftedSystem{psi.array() + lift, lift, psi};
}

struct NonnegativeSplit {
  Matrix plus;   // max(Psi, 0)
  Matrix minus;  // max(-Psi, 0)
};

inline NonnegativeSplit split_nonnegative(const Matrix& psi) {
  return {psi.cwiseMax(0.0), (-psi).cwiseMax(0.0)};
}

/// y0 = Psi0 x, the bucket-detector readings for nonnegative patterns.
inline Vector bucket_sample(const Matrix& psi0, const Vector& x) {
  require(psi0.cols() == x.size(), ErrorKind::Dimension,
          "object length " + std::to_string(x.size()) + " does not match " +
              std::to_string(psi0.cols()) + " pattern pixels");
  require_finite(psi0, "patterns");
  require_finite(x, "object");
  Index row = 0, col = 0;
  if (psi0.size() > 0 && psi0.minCoeff(&row, &col) < 0.0) {
    fail(ErrorKind::Physicality, "pattern entry (" + std::to_string(row) + "," +
                                     std::to_string(col) + ") is negative");
  }
  return psi0 * x;
}

/// GI correlation: (Psi0 - <Psi0>)^T (y0 - <y0>), with column means for <Psi0>.
inline Vector gi_correlate(const Matrix& psi0, const Vector& y0) {
  require(psi0.rows() == y0.size(), ErrorKind::Dimension, "sample count does not match patterns");
  if (psi0.rows() < 2) {
    fail(ErrorKind::DegenerateStatistics, "GI correlation needs at least two samples");
  }
  const Vector y_fluct = y0.array() - y0.mean();
  const Matrix psi_fluct = psi0.rowwise() - psi0.colwise().mean();
  return psi_fluct.transpose() * y_fluct;
}

/// Maps values affinely onto [0, 255]; a constant input maps to its value clipped to [0, 255].
inline Vector rescale_min_max(const Vector& v) {
  if (v.size() == 0) return v;
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  if (!(hi - lo > 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)}))) {
    return Vector::Constant(v.size(), std::clamp(lo, 0.0, 255.0));
  }
  return (v.array() - lo) * (255.0 / (hi - lo));
}

inline void require_same_shape(const ObjectImage& a, const ObjectImage& b) {
  require(a.height() == b.height() && a.width() == b.width(), ErrorKind::Dimension,
          "image sizes differ: " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
              " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

inline double mse(const ObjectImage& a, const ObjectImage& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// PSNR in dB against a peak of 255; identical images carry no dB value.
struct Psnr {
  std::optional<double> db;

  bool identical() const noexcept { return !db.has_value(); }
  /// Identical images compare as better than any finite value.
  bool at_least(double threshold_db) const { return identical() || *db >= threshold_db; }
  friend bool operator>=(const Psnr& a, const Psnr& b) {
    if (a.identical()) return true;
    if (b.identical()) return false;
    return *a.db >= *b.db;
  }
};

inline Psnr psnr(const ObjectImage& a, const ObjectImage& b) {
  const double e = mse(a, b);
  if (e == 0.0) return Psnr{std::nullopt};
  return Psnr{20.0 * std::log10(255.0 / std::sqrt(e))};
}

namespace detail {

class PgmReader {
 public:
  explicit PgmReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  void skip_whitespace_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long long read_int(const char* what) {
    skip_whitespace_and_comments();
    const std::size_t start = pos_;
    long long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000) error(std::string(what) + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) error(std::string("expected ") + what, start);
    return value;
  }

  [[noreturn]] void error(const std::string& what, std::size_t offset) const {
    fail(ErrorKind::Parse, "PGM: " + what + " at byte " + std::to_string(offset));
  }

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ObjectImage parse_pgm(std::vector<unsigned char> bytes) {
  detail::PgmReader in(std::move(bytes));
  if (in.bytes_.size() < 2 || in.bytes_[0] != 'P') in.error("missing magic number", 0);
  if (in.bytes_[1] != '5') {
    in.error(std::string("unsupported format P") + static_cast<char>(in.bytes_[1]) +
                 " (only binary P5 is supported)",
             0);
  }
  in.pos_ = 2;
  const long long width = in.read_int("width");
  const long long height = in.read_int("height");
  const std::size_t maxval_at = in.pos_;
  const long long maxval = in.read_int("maxval");
  if (width <= 0 || height <= 0) in.error("image dimensions must be positive", maxval_at);
  if (maxval != 255) in.error("maxval must be 255, got " + std::to_string(maxval), maxval_at);
  if (in.pos_ >= in.bytes_.size() || !std::isspace(in.bytes_[in.pos_])) {
    in.error("expected a single whitespace byte after maxval", in.pos_);
  }
  ++in.pos_;
  const std::size_t count = static_cast<std::size_t>(width * height);
  if (in.bytes_.size() - in.pos_ < count) {
    in.error("truncated payload: expected " + std::to_string(count) + " bytes, found " +
                 std::to_string(in.bytes_.size() - in.pos_),
             in.bytes_.size());
  }
  std::vector<double> pixels(count);
  for (std::size_t i = 0; i < count; ++i) pixels[i] = in.bytes_[in.pos_ + i];
  return ObjectImage(height, width, std::move(pixels));
}

inline ObjectImage load_pgm(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                   std::istreambuf_iterator<char>());
  return parse_pgm(std::move(bytes));
}

/// P5 encoding "P5\n<w> <h>\n255\n" followed by row-major bytes. Pixels are
/// rounded to the nearest integer and must lie in [0, 255].
inline std::vector<unsigned char> encode_pgm(const ObjectImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width()) + " " +
                             std::to_string(image.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels().size());
  for (std::size_t i = 0; i < image.pixels().size(); ++i) {
    const double v = std::round(image.pixels()[i]);
    if (v < 0.0 || v > 255.0) {
      fail(ErrorKind::Validation, "pixel " + std::to_string(i) + " is outside [0, 255]");
    }
    out.push_back(static_cast<unsigned char>(v));
  }
  return out;
}

inline void save_pgm(const ObjectImage& image, const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = encode_pgm(image);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(ErrorKind::Io, "cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!file) fail(ErrorKind::Io, "short write to " + path.string());
}

// Synthetic two-valued 28x28 test objects, each with at most 40 lit pixels.

namespace detail {

inline ObjectImage draw_strokes(const std::vector<std::pair<int, int>>& lit) {
  std::vector<double> pixels(28 * 28, 0.0);
  for (auto [r, c] : lit) pixels[static_cast<std::size_t>(r * 28 + c)] = 255.0;
  return ObjectImage(28, 28, std::move(pixels));
}

inline void hline(std::vector<std::pair<int, int>>& lit, int row, int c0, int c1) {
  for (int c = c0; c <= c1; ++c) lit.emplace_back(row, c);
}

inline void vline(std::vector<std::pair<int, int>>& lit, int col, int r0, int r1) {
  for (int r = r0; r <= r1; ++r) lit.emplace_back(r, col);
}

}  // namespace detail

/// Digit "3": three horizontal bars joined on the right.
inline ObjectImage synthetic_digit_three() {
  std::vector<std::pair<int, int>> lit;
  detail::hline(lit, 6, 10, 17);
  detail::hline(lit, 13, 12, 17);
  detail::hline(lit, 20, 10, 17);
  detail::vline(lit, 18, 7, 12);
  detail::vline(lit, 18, 14, 19);
  return detail::draw_strokes(lit);
}

/// Digit "7": a top bar and a diagonal stroke.
inline ObjectImage synthetic_digit_seven() {
  std::vector<std::pair<int, int>> lit;
  detail::hline(lit, 6, 9, 19);
  for (int k = 0; k < 14; ++k) lit.emplace_back(7 + k, 18 - k / 2);
  return detail::draw_strokes(lit);
}

/// Two-lobe "tai-chi"-like mask: a ring outline with one dot in each half.
inline ObjectImage synthetic_tai_chi() {
  std::vector<std::pair<int, int>> lit;
  const double cr = 13.5, cc = 13.5, radius = 8.0;
  for (int k = 0; k < 32; ++k) {
    const double t = 2.0 * 3.14159265358979323846 * k / 32.0;
    lit.emplace_back(static_cast<int>(std::lround(cr + radius * std::sin(t))),
                     static_cast<int>(std::lround(cc + radius * std::cos(t))));
  }
  std::sort(lit.begin(), lit.end());
  lit.erase(std::unique(lit.begin(), lit.end()), lit.end());
  lit.emplace_back(10, 13);
  lit.emplace_back(10, 14);
  lit.emplace_back(17, 13);
  lit.emplace_back(17, 14);
  return detail::draw_strokes(lit);
}

}  // namespace pmols
