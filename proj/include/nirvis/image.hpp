#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nirvis/errors.hpp"
#include "nirvis/tensor.hpp"

// Images are Tensor<float> in planar CHW layout with values in [0,1].
namespace nirvis::img {

inline void require_chw(const Tensor<float>& im, int channels, const char* op) {
  if (im.rank() != 3 || (channels > 0 && im.dim(0) != channels))
    throw ShapeError(std::string(op) + ": expected (" +
                     (channels > 0 ? std::to_string(channels) : std::string("C")) +
                     ",H,W) image, got " + shape_str(im.shape()));
}

// ---------------------------------------------------------------------------
// Color. BT.601 full-range luma/chroma; the inverse is the exact algebraic
// solution of the forward equations, so a round trip is lossless up to float
// rounding. Intermediate math runs in double.

inline Tensor<float> rgb_to_ycbcr(const Tensor<float>& rgb) {
  require_chw(rgb, 3, "rgb_to_ycbcr");
  const int H = rgb.dim(1), W = rgb.dim(2);
  Tensor<float> out(rgb.shape());
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (std::int64_t i = 0; i < plane; ++i) {
    const double r = rgb[i], g = rgb[plane + i], b = rgb[2 * plane + i];
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    out[i] = static_cast<float>(y);
    out[plane + i] = static_cast<float>(0.564 * (b - y) + 0.5);
    out[2 * plane + i] = static_cast<float>(0.713 * (r - y) + 0.5);
  }
  return out;
}

inline Tensor<float> ycbcr_to_rgb(const Tensor<float>& ycc) {
  require_chw(ycc, 3, "ycbcr_to_rgb");
  const int H = ycc.dim(1), W = ycc.dim(2);
  Tensor<float> out(ycc.shape());
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (std::int64_t i = 0; i < plane; ++i) {
    const double y = ycc[i], cb = ycc[plane + i], cr = ycc[2 * plane + i];
    const double b = (cb - 0.5) / 0.564 + y;
    const double r = (cr - 0.5) / 0.713 + y;
    const double g = (y - 0.299 * r - 0.114 * b) / 0.587;
    out[i] = static_cast<float>(r);
    out[plane + i] = static_cast<float>(g);
    out[2 * plane + i] = static_cast<float>(b);
  }
  return out;
}

// BT.601 luma of an RGB image -> (1,H,W).
inline Tensor<float> to_gray(const Tensor<float>& rgb) {
  require_chw(rgb, 3, "to_gray");
  const int H = rgb.dim(1), W = rgb.dim(2);
  Tensor<float> out({1, H, W});
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (std::int64_t i = 0; i < plane; ++i)
    out[i] = static_cast<float>(0.299 * rgb[i] + 0.587 * rgb[plane + i] +
                                0.114 * rgb[2 * plane + i]);
  return out;
}

// ---------------------------------------------------------------------------
// Geometry

inline Tensor<float> crop(const Tensor<float>& im, int r0, int c0, int h, int w) {
  require_chw(im, 0, "crop");
  const int C = im.dim(0), H = im.dim(1), W = im.dim(2);
  if (r0 < 0 || c0 < 0 || h <= 0 || w <= 0 || r0 + h > H || c0 + w > W)
    throw ShapeError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + "+" +
                     std::to_string(r0) + "+" + std::to_string(c0) + " outside image " +
                     shape_str(im.shape()));
  Tensor<float> out({C, h, w});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        out[(static_cast<std::int64_t>(c) * h + i) * w + j] =
            im[(static_cast<std::int64_t>(c) * H + (r0 + i)) * W + (c0 + j)];
  return out;
}

// Deterministic evaluation crop: offset floor((in-out)/2) on each axis.
inline Tensor<float> center_crop(const Tensor<float>& im, int size, int* r0_out = nullptr,
                                 int* c0_out = nullptr) {
  require_chw(im, 0, "center_crop");
  const int r0 = (im.dim(1) - size) / 2, c0 = (im.dim(2) - size) / 2;
  if (r0_out) *r0_out = r0;
  if (c0_out) *c0_out = c0;
  return crop(im, r0, c0, size, size);
}

inline Tensor<float> random_crop(const Tensor<float>& im, int size, std::mt19937_64& rng,
                                 int* r0_out = nullptr, int* c0_out = nullptr) {
  require_chw(im, 0, "random_crop");
  const int mr = im.dim(1) - size, mc = im.dim(2) - size;
  if (mr < 0 || mc < 0)
    throw ShapeError("random_crop: size " + std::to_string(size) + " exceeds image " +
                     shape_str(im.shape()));
  std::uniform_int_distribution<int> dr(0, mr), dc(0, mc);
  const int r0 = dr(rng), c0 = dc(rng);
  if (r0_out) *r0_out = r0;
  if (c0_out) *c0_out = c0;
  return crop(im, r0, c0, size, size);
}

inline Tensor<float> flip_horizontal(const Tensor<float>& im) {
  require_chw(im, 0, "flip_horizontal");
  const int C = im.dim(0), H = im.dim(1), W = im.dim(2);
  Tensor<float> out(im.shape());
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        out[(static_cast<std::int64_t>(c) * H + i) * W + j] =
            im[(static_cast<std::int64_t>(c) * H + i) * W + (W - 1 - j)];
  return out;
}

// Square patch centered on (r,c); mirror=true flips it horizontally so a
// right-side patch matches left-side orientation.
inline Tensor<float> extract_patch(const Tensor<float>& im, int center_r, int center_c, int size,
                                   bool mirror) {
  const int r0 = center_r - size / 2, c0 = center_c - size / 2;
  Tensor<float> p = crop(im, r0, c0, size, size);
  return mirror ? flip_horizontal(p) : p;
}

// ---------------------------------------------------------------------------
// Netpbm I/O: binary PPM (P6) for color, binary PGM (P5) for grayscale,
// 8 bits per sample. Quantization is round(v*255) with clamping.

namespace detail {

inline int read_pnm_token(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comment lines between header fields.
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF || !std::isdigit(ch)) throw IoError(path + ": malformed PNM header");
  int v = 0;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + (ch - '0');
    if (v > 1 << 20) throw IoError(path + ": PNM header value out of range");
    ch = in.get();
  }
  if (ch != EOF) in.unget();
  return v;
}

inline std::uint8_t quantize(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.f));
}

}  // namespace detail

inline void write_ppm(const std::string& path, const Tensor<float>& rgb) {
  require_chw(rgb, 3, "write_ppm");
  const int H = rgb.dim(1), W = rgb.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P6\n" << W << " " << H << "\n255\n";
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(W) * 3);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j)
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(j) * 3 + c] =
            detail::quantize(rgb[c * plane + static_cast<std::int64_t>(i) * W + j]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError(path + ": write failed");
}

inline void write_pgm(const std::string& path, const Tensor<float>& gray) {
  require_chw(gray, 1, "write_pgm");
  const int H = gray.dim(1), W = gray.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P5\n" << W << " " << H << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(W));
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j)
      row[static_cast<std::size_t>(j)] = detail::quantize(gray[static_cast<std::int64_t>(i) * W + j]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError(path + ": write failed");
}

// Reads P6 -> (3,H,W) or P5 -> (1,H,W), scaling samples by 1/255.
inline Tensor<float> read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  int channels;
  if (magic[0] == 'P' && magic[1] == '6')
    channels = 3;
  else if (magic[0] == 'P' && magic[1] == '5')
    channels = 1;
  else
    throw IoError(path + ": not a binary PPM/PGM file");
  const int W = detail::read_pnm_token(in, path);
  const int H = detail::read_pnm_token(in, path);
  const int maxval = detail::read_pnm_token(in, path);
  if (maxval != 255) throw IoError(path + ": unsupported maxval " + std::to_string(maxval));
  in.get();  // single whitespace byte after maxval
  const std::int64_t n = static_cast<std::int64_t>(W) * H * channels;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (in.gcount() != n) throw IoError(path + ": truncated pixel data");
  Tensor<float> out({channels, H, W});
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (std::int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < channels; ++c)
      out[c * plane + i] = static_cast<float>(raw[static_cast<std::size_t>(i * channels + c)]) / 255.f;
  return out;
}

}  // namespace nirvis::img
