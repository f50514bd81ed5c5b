#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwloc/image.hpp"

namespace hwloc {

enum class PpmErrorKind { kUnsupportedMagic, kMalformedHeader, kTruncatedData };

class PpmError : public std::runtime_error {
 public:
  PpmError(PpmErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  PpmErrorKind kind() const { return kind_; }

 private:
  PpmErrorKind kind_;
};

namespace detail {

inline bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

// Reads one unsigned decimal header token, skipping whitespace and comments.
inline unsigned long read_header_number(std::span<const std::uint8_t> bytes,
                                        std::size_t& pos, const char* field) {
  while (pos < bytes.size()) {
    if (is_pnm_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
    throw PpmError(PpmErrorKind::kMalformedHeader,
                   std::string("expected decimal ") + field + " in PPM header");
  }
  unsigned long value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1'000'000'000UL) {
      throw PpmError(PpmErrorKind::kMalformedHeader,
                     std::string(field) + " out of range in PPM header");
    }
    ++pos;
  }
  return value;
}

}  // namespace detail

// Binary P6 only. maxval 1..65535; 16-bit samples are big-endian.
inline RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw PpmError(PpmErrorKind::kMalformedHeader, "missing PPM magic number");
  }
  if (bytes[1] != '6') {
    throw PpmError(PpmErrorKind::kUnsupportedMagic,
                   std::string("unsupported magic number P") +
                       static_cast<char>(bytes[1]) + ", only P6 is accepted");
  }
  std::size_t pos = 2;
  if (pos >= bytes.size() || !detail::is_pnm_space(bytes[pos])) {
    throw PpmError(PpmErrorKind::kMalformedHeader,
                   "expected whitespace after magic number");
  }
  const auto width = detail::read_header_number(bytes, pos, "width");
  const auto height = detail::read_header_number(bytes, pos, "height");
  const auto maxval = detail::read_header_number(bytes, pos, "maxval");
  if (width == 0 || height == 0) {
    throw PpmError(PpmErrorKind::kMalformedHeader, "zero image dimension");
  }
  if (maxval == 0 || maxval > 65535) {
    throw PpmError(PpmErrorKind::kMalformedHeader,
                   "maxval must be in 1..65535, got " + std::to_string(maxval));
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !detail::is_pnm_space(bytes[pos])) {
    throw PpmError(PpmErrorKind::kMalformedHeader,
                   "expected single whitespace after maxval");
  }
  ++pos;

  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  const std::size_t need = pixels * 3 * sample_bytes;
  if (bytes.size() - pos < need) {
    throw PpmError(PpmErrorKind::kTruncatedData,
                   "pixel data truncated: need " + std::to_string(need) +
                       " bytes, have " + std::to_string(bytes.size() - pos));
  }

  const double scale = 1.0 / static_cast<double>(maxval);
  auto sample = [&](std::size_t i) -> double {
    unsigned value = 0;
    if (sample_bytes == 1) {
      value = bytes[pos + i];
    } else {
      value = (static_cast<unsigned>(bytes[pos + 2 * i]) << 8) |
              bytes[pos + 2 * i + 1];
    }
    if (value > maxval) {
      throw PpmError(PpmErrorKind::kMalformedHeader,
                     "sample exceeds maxval at offset " + std::to_string(i));
    }
    return value * scale;
  };

  std::vector<Rgb> data(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    data[i] = {sample(3 * i), sample(3 * i + 1), sample(3 * i + 2)};
  }
  return RgbImage(static_cast<int>(width), static_cast<int>(height),
                  std::move(data));
}

// Always maxval 255, header "P6\n<w> <h>\n255\n".
inline std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size() * 3);
  auto quantize = [](double c) {
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
  };
  for (const auto& p : img.data()) {
    out.push_back(quantize(p.r));
    out.push_back(quantize(p.g));
    out.push_back(quantize(p.b));
  }
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline RgbImage read_ppm(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return decode_ppm(bytes);
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
  write_file_bytes(path, encode_ppm(img));
}

}  // namespace hwloc
