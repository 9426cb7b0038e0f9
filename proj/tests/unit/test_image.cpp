#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "nirvis/image.hpp"

using namespace nirvis;
namespace fs = std::filesystem;

namespace {

Tensor<float> random_image(int C, int H, int W, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  Tensor<float> im({C, H, W});
  for (std::int64_t i = 0; i < im.numel(); ++i) im[i] = d(rng);
  return im;
}

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("nirvis_img_") + tag);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("luminance transform matches frozen reference values", "[image]") {
  // One pixel, pure colors: coefficients pinned independently of the code.
  // Y(R)=0.299, Y(G)=0.587, Y(B)=0.114; Cb(B)=0.564*(1-0.114)+0.5.
  Tensor<float> px({3, 1, 1});
  px[0] = 1.0f;  // pure red
  Tensor<float> ycc = img::rgb_to_ycbcr(px);
  REQUIRE(ycc[0] == Catch::Approx(0.299).margin(1e-6));
  REQUIRE(ycc[1] == Catch::Approx(0.5 - 0.564 * 0.299).margin(1e-6));
  REQUIRE(ycc[2] == Catch::Approx(0.5 + 0.713 * (1.0 - 0.299)).margin(1e-6));

  px.fill(0.0f);
  px[2] = 1.0f;  // pure blue
  ycc = img::rgb_to_ycbcr(px);
  REQUIRE(ycc[0] == Catch::Approx(0.114).margin(1e-6));
  REQUIRE(ycc[1] == Catch::Approx(0.5 + 0.564 * (1.0 - 0.114)).margin(1e-6));
  REQUIRE(ycc[2] == Catch::Approx(0.5 - 0.713 * 0.114).margin(1e-6));

  // Gray has no chroma.
  px.fill(0.25f);
  ycc = img::rgb_to_ycbcr(px);
  REQUIRE(ycc[0] == Catch::Approx(0.25).margin(1e-6));
  REQUIRE(ycc[1] == Catch::Approx(0.5).margin(1e-6));
  REQUIRE(ycc[2] == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("color conversion round-trips within 1e-6", "[image]") {
  Tensor<float> im = random_image(3, 9, 7, 11);
  Tensor<float> back = img::ycbcr_to_rgb(img::rgb_to_ycbcr(im));
  for (std::int64_t i = 0; i < im.numel(); ++i)
    REQUIRE(back[i] == Catch::Approx(im[i]).margin(1e-6));
}

TEST_CASE("grayscale equals the luminance channel", "[image]") {
  Tensor<float> im = random_image(3, 5, 5, 3);
  Tensor<float> g = img::to_gray(im);
  Tensor<float> ycc = img::rgb_to_ycbcr(im);
  REQUIRE(g.dim(0) == 1);
  for (int i = 0; i < 25; ++i) REQUIRE(g[i] == Catch::Approx(ycc[i]).margin(1e-6));
}

TEST_CASE("crops take the expected window and report offsets", "[image]") {
  Tensor<float> im({1, 6, 6});
  for (std::int64_t i = 0; i < 36; ++i) im[i] = static_cast<float>(i);
  Tensor<float> c = img::crop(im, 2, 3, 2, 2);
  REQUIRE(c[0] == 15.0f);  // row 2, col 3
  REQUIRE(c[3] == 22.0f);  // row 3, col 4
  REQUIRE_THROWS_AS(img::crop(im, 5, 5, 3, 3), ShapeError);

  int r0 = -1, c0 = -1;
  Tensor<float> cc = img::center_crop(im, 4, &r0, &c0);
  REQUIRE(r0 == 1);
  REQUIRE(c0 == 1);
  REQUIRE(cc[0] == 7.0f);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> rc = img::random_crop(im, 4, rng, &r0, &c0);
    REQUIRE(r0 >= 0);
    REQUIRE(r0 <= 2);
    REQUIRE(c0 >= 0);
    REQUIRE(c0 <= 2);
    REQUIRE(rc[0] == im[static_cast<std::int64_t>(r0) * 6 + c0]);
  }
}

TEST_CASE("horizontal flip mirrors columns and involutes", "[image]") {
  Tensor<float> im = random_image(3, 4, 5, 17);
  Tensor<float> f = img::flip_horizontal(im);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j)
        REQUIRE(f[(static_cast<std::int64_t>(c) * 4 + i) * 5 + j] ==
                im[(static_cast<std::int64_t>(c) * 4 + i) * 5 + (4 - j)]);
  Tensor<float> ff = img::flip_horizontal(f);
  for (std::int64_t i = 0; i < im.numel(); ++i) REQUIRE(ff[i] == im[i]);
}

TEST_CASE("mirrored patch extraction equals flip of the plain patch", "[image]") {
  Tensor<float> im = random_image(3, 10, 10, 23);
  Tensor<float> plain = img::extract_patch(im, 4, 6, 4, false);
  Tensor<float> mirrored = img::extract_patch(im, 4, 6, 4, true);
  Tensor<float> ref = img::flip_horizontal(plain);
  for (std::int64_t i = 0; i < ref.numel(); ++i) REQUIRE(mirrored[i] == ref[i]);
}

TEST_CASE("ppm and pgm round-trip through quantization", "[image]") {
  const fs::path dir = temp_dir("pnm");
  // Values on the exact 1/255 grid survive a write/read cycle bit-for-bit.
  Tensor<float> im({3, 4, 5});
  for (std::int64_t i = 0; i < im.numel(); ++i)
    im[i] = static_cast<float>((i * 7) % 256) / 255.0f;
  const std::string ppm = (dir / "a.ppm").string();
  img::write_ppm(ppm, im);
  Tensor<float> back = img::read_pnm(ppm);
  REQUIRE(back.shape() == im.shape());
  for (std::int64_t i = 0; i < im.numel(); ++i)
    REQUIRE(back[i] == Catch::Approx(im[i]).margin(1e-6));

  Tensor<float> gray({1, 3, 3});
  for (std::int64_t i = 0; i < 9; ++i) gray[i] = static_cast<float>(i) / 255.0f;
  const std::string pgm = (dir / "a.pgm").string();
  img::write_pgm(pgm, gray);
  Tensor<float> gback = img::read_pnm(pgm);
  REQUIRE(gback.dim(0) == 1);
  for (std::int64_t i = 0; i < 9; ++i) REQUIRE(gback[i] == Catch::Approx(gray[i]).margin(1e-6));
}

TEST_CASE("quantization clamps and rounds to nearest", "[image]") {
  Tensor<float> im({1, 1, 4});
  im[0] = -0.5f;        // clamps to 0
  im[1] = 1.5f;         // clamps to 255
  im[2] = 0.5f;         // rounds to 128 (0.5*255 = 127.5)
  im[3] = 2.0f / 255.0f;
  const fs::path dir = temp_dir("quant");
  const std::string p = (dir / "q.pgm").string();
  img::write_pgm(p, im);
  std::ifstream in(p, std::ios::binary);
  std::string header;
  in >> header;
  int w, h, maxv;
  in >> w >> h >> maxv;
  in.get();
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  REQUIRE(header == "P5");
  REQUIRE(maxv == 255);
  REQUIRE(bytes[0] == 0);
  REQUIRE(bytes[1] == 255);
  REQUIRE(bytes[2] == 128);
  REQUIRE(bytes[3] == 2);
}

TEST_CASE("pnm reader handles comments and rejects damage", "[image]") {
  const fs::path dir = temp_dir("bad");
  {
    std::ofstream out(dir / "comment.pgm", std::ios::binary);
    out << "P5\n# a comment line\n2 1\n# another\n255\n";
    out.put(7);
    out.put(9);
  }
  Tensor<float> ok = img::read_pnm((dir / "comment.pgm").string());
  REQUIRE(ok.dim(2) == 2);
  REQUIRE(ok[0] == Catch::Approx(7.0 / 255.0).margin(1e-6));

  {
    std::ofstream out(dir / "trunc.ppm", std::ios::binary);
    out << "P6\n2 2\n255\n";
    out.put(1);  // far too few bytes
  }
  REQUIRE_THROWS_AS(img::read_pnm((dir / "trunc.ppm").string()), IoError);

  {
    std::ofstream out(dir / "maxval.pgm", std::ios::binary);
    out << "P5\n1 1\n65535\n";
    out.put(1);
    out.put(1);
  }
  REQUIRE_THROWS_AS(img::read_pnm((dir / "maxval.pgm").string()), IoError);

  REQUIRE_THROWS_AS(img::read_pnm((dir / "missing.pgm").string()), IoError);
}
