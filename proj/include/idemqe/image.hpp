#pragma once

#include <idemqe/autodiff.hpp>
#include <idemqe/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace idemqe {

// H x W x C image with samples in [0,1], row-major, channel-interleaved.
// Grayscale C=1, RGB C=3. File form is binary PNM (P5/P6, maxval 255).
struct ImageBuffer {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> samples;

  ImageBuffer() = default;
  // Real constructor rather than an aggregate: with aggregate semantics,
  // ImageBuffer(h, w, c) would compile via parenthesized aggregate
  // initialization and leave `samples` empty.
  ImageBuffer(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c) {
    if (h == 0 || w == 0 || (c != 1 && c != 3)) {
      throw std::invalid_argument("image dimensions must be positive with 1 or 3 channels");
    }
    samples.assign(h * w * c, fill);
  }

  static ImageBuffer make(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0) {
    return ImageBuffer(h, w, c, fill);
  }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return samples[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return samples[(y * width + x) * channels + c];
  }
  std::size_t size() const { return samples.size(); }
  bool same_geometry(const ImageBuffer& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

namespace detail {

struct PnmCursor {
  const unsigned char* bytes;
  std::size_t size;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("invalid PNM: " + what + " at byte offset " + std::to_string(pos));
  }
  int peek() const { return pos < size ? bytes[pos] : -1; }
  int take() { return pos < size ? bytes[pos++] : -1; }

  // whitespace and '#' comments separate header tokens
  void skip_separators() {
    while (pos < size) {
      unsigned char c = bytes[pos];
      if (c == '#') {
        while (pos < size && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f') {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field) {
    skip_separators();
    if (pos >= size || bytes[pos] < '0' || bytes[pos] > '9') {
      fail(std::string("expected ") + field);
    }
    std::size_t v = 0;
    while (pos < size && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000'000) fail(std::string(field) + " out of range");
      ++pos;
    }
    return v;
  }
};

}  // namespace detail

// Binary PNM decode: P5 (gray) or P6 (RGB), maxval 255. Sample s maps to
// s/255 exactly. Malformed input is rejected with the offending byte offset.
inline ImageBuffer read_pnm(const unsigned char* bytes, std::size_t size) {
  detail::PnmCursor cur{bytes, size};
  if (size < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    cur.fail("expected magic P5 or P6");
  }
  std::size_t channels = bytes[1] == '5' ? 1 : 3;
  cur.pos = 2;
  std::size_t width = cur.read_uint("width");
  std::size_t height = cur.read_uint("height");
  std::size_t maxval = cur.read_uint("maxval");
  if (width == 0 || height == 0) cur.fail("zero dimension");
  if (maxval != 255) cur.fail("maxval must be 255, got " + std::to_string(maxval));
  // exactly one whitespace byte before the payload
  int sep = cur.take();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    cur.pos -= 1;
    cur.fail("expected single whitespace before payload");
  }
  std::size_t need = height * width * channels;
  if (size - cur.pos < need) {
    cur.pos = size;
    cur.fail("payload truncated, need " + std::to_string(need) + " bytes");
  }
  ImageBuffer img = ImageBuffer::make(height, width, channels);
  for (std::size_t i = 0; i < need; ++i) {
    img.samples[i] = static_cast<double>(bytes[cur.pos + i]) / 255.0;
  }
  return img;
}

inline ImageBuffer read_pnm(const std::vector<unsigned char>& bytes) {
  return read_pnm(bytes.data(), bytes.size());
}

// [0,1] -> byte with round-half-up (127.5 -> 128), clamped.
inline unsigned char sample_to_byte(double s) {
  double scaled = std::floor(s * 255.0 + 0.5);
  if (scaled <= 0.0) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<unsigned char>(scaled);
}

// Canonical binary PNM encode: "P5\n<w> <h>\n255\n" + payload (P6 for RGB).
// read_pnm(write_pnm(img)) recovers every sample to within 0.5/255.
inline std::vector<unsigned char> write_pnm(const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw std::invalid_argument("write_pnm requires 1 or 3 channels, got " +
                                std::to_string(img.channels));
  }
  if (img.height == 0 || img.width == 0 || img.samples.size() != img.height * img.width * img.channels) {
    throw std::invalid_argument("write_pnm: inconsistent image geometry");
  }
  std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                       std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + img.samples.size());
  for (double s : img.samples) out.push_back(sample_to_byte(s));
  return out;
}

inline ImageBuffer read_pnm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return read_pnm(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline void write_pnm_file(const ImageBuffer& img, const std::string& path) {
  std::vector<unsigned char> bytes = write_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create image file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to image file: " + path);
}

// All size x size windows on the stride grid (top-left at multiples of
// stride, fully inside the image), in an order shuffled by seed. The grid
// and order depend only on (geometry, size, stride, seed), so calling with
// the same arguments on two aligned images yields aligned patch pairs.
inline std::vector<ImageBuffer> extract_patches(const ImageBuffer& img, std::size_t size,
                                                std::size_t stride, std::uint64_t seed) {
  if (size == 0 || stride == 0) throw std::invalid_argument("patch size and stride must be positive");
  if (size > img.height || size > img.width) {
    throw std::invalid_argument("patch size " + std::to_string(size) + " exceeds image " +
                                std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  std::vector<std::pair<std::size_t, std::size_t>> origins;
  for (std::size_t y = 0; y + size <= img.height; y += stride) {
    for (std::size_t x = 0; x + size <= img.width; x += stride) {
      origins.emplace_back(y, x);
    }
  }
  Rng rng = Rng::substream(seed, "patches");
  rng.shuffle(origins);

  std::vector<ImageBuffer> patches;
  patches.reserve(origins.size());
  for (auto [oy, ox] : origins) {
    ImageBuffer p = ImageBuffer::make(size, size, img.channels);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        for (std::size_t c = 0; c < img.channels; ++c) {
          p.at(y, x, c) = img.at(oy + y, ox + x, c);
        }
      }
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

// interleaved HWC image -> planar 1xCxHxW tensor, exact values
inline Tensor image_to_tensor(const ImageBuffer& img) {
  std::vector<double> data(img.samples.size());
  std::size_t hw = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t i = 0; i < hw; ++i) {
      data[c * hw + i] = img.samples[i * img.channels + c];
    }
  }
  return Tensor::from_data({1, img.channels, img.height, img.width}, std::move(data));
}

// NxCxHxW batch from equally shaped images
inline Tensor images_to_batch(const std::vector<ImageBuffer>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("images_to_batch: empty batch");
  const ImageBuffer& first = imgs[0];
  std::size_t hw = first.height * first.width;
  std::vector<double> data(imgs.size() * first.channels * hw);
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    if (!imgs[n].same_geometry(first)) {
      throw std::invalid_argument("images_to_batch: mismatched geometry at index " + std::to_string(n));
    }
    for (std::size_t c = 0; c < first.channels; ++c) {
      for (std::size_t i = 0; i < hw; ++i) {
        data[(n * first.channels + c) * hw + i] = imgs[n].samples[i * first.channels + c];
      }
    }
  }
  return Tensor::from_data({imgs.size(), first.channels, first.height, first.width}, std::move(data));
}

// planar 1xCxHxW (or CxHxW) tensor -> image; clamping is the serialization
// boundary where raw model outputs become valid [0,1] images
inline ImageBuffer tensor_to_image(const Tensor& t, bool clamp = true) {
  const Shape& s = t.shape();
  std::size_t c, h, w;
  if (s.size() == 4 && s[0] == 1) {
    c = s[1], h = s[2], w = s[3];
  } else if (s.size() == 3) {
    c = s[0], h = s[1], w = s[2];
  } else {
    throw std::invalid_argument("tensor_to_image expects 1xCxHxW or CxHxW, got " + shape_str(s));
  }
  if (c != 1 && c != 3) {
    throw std::invalid_argument("tensor_to_image: channels must be 1 or 3, got " + std::to_string(c));
  }
  ImageBuffer img = ImageBuffer::make(h, w, c);
  std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t i = 0; i < hw; ++i) {
      double v = t.vec()[ci * hw + i];
      if (clamp) v = std::min(1.0, std::max(0.0, v));
      img.samples[i * c + ci] = v;
    }
  }
  return img;
}

// slice item n of an NxCxHxW batch into an image
inline ImageBuffer batch_item_to_image(const Tensor& t, std::size_t n, bool clamp = true) {
  const Shape& s = t.shape();
  if (s.size() != 4 || n >= s[0]) {
    throw std::invalid_argument("batch_item_to_image: bad index " + std::to_string(n) +
                                " for shape " + shape_str(s));
  }
  std::size_t chw = s[1] * s[2] * s[3];
  std::vector<double> data(t.vec().begin() + static_cast<std::ptrdiff_t>(n * chw),
                           t.vec().begin() + static_cast<std::ptrdiff_t>((n + 1) * chw));
  return tensor_to_image(Tensor::from_data({s[1], s[2], s[3]}, std::move(data)), clamp);
}

}  // namespace idemqe
