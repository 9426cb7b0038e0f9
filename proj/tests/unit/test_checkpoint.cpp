#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "nirvis/checkpoint.hpp"

using namespace nirvis;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path p = fs::temp_directory_path() / "nirvis_ckpt";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Checkpoint sample_checkpoint() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> d(-2, 2);
  Checkpoint c;
  Tensor<float> w({3, 2, 3, 3});
  for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = d(rng);
  c.add("conv.w", w);
  Tensor<float> b({3});
  for (std::int64_t i = 0; i < 3; ++i) b[i] = d(rng);
  c.add("conv.b", b);
  c.add("scalarish", Tensor<float>({1}, {0.5f}));
  return c;
}

}  // namespace

TEST_CASE("checkpoint save/load/save is byte-identical", "[checkpoint]") {
  const fs::path dir = temp_dir();
  const Checkpoint original = sample_checkpoint();
  const std::string p1 = (dir / "a.ckpt").string(), p2 = (dir / "b.ckpt").string();
  save_checkpoint(p1, original);
  const Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);
  REQUIRE(slurp(p1) == slurp(p2));

  // Entry order, names, shapes and payloads all survive.
  REQUIRE(loaded.size() == original.size());
  for (std::size_t i = 0; i < original.entries().size(); ++i) {
    const auto& [n0, t0] = original.entries()[i];
    const auto& [n1, t1] = loaded.entries()[i];
    REQUIRE(n0 == n1);
    REQUIRE(t0.shape() == t1.shape());
    for (std::int64_t k = 0; k < t0.numel(); ++k) REQUIRE(t0[k] == t1[k]);
  }
}

TEST_CASE("duplicate entry names are rejected at insert", "[checkpoint]") {
  Checkpoint c;
  c.add("w", Tensor<float>({2}));
  try {
    c.add("w", Tensor<float>({3}));
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    REQUIRE(e.kind == CheckpointError::Kind::DuplicateName);
  }
}

TEST_CASE("require distinguishes missing entries", "[checkpoint]") {
  Checkpoint c;
  c.add("present", Tensor<float>({1}));
  REQUIRE(c.find("absent") == nullptr);
  try {
    c.require("absent");
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    REQUIRE(e.kind == CheckpointError::Kind::BadData);
  }
}

TEST_CASE("corrupt files raise the right error kinds", "[checkpoint]") {
  const fs::path dir = temp_dir();
  const std::string good = (dir / "good.ckpt").string();
  save_checkpoint(good, sample_checkpoint());
  const std::string bytes = slurp(good);

  auto write_bytes = [&](const std::string& name, const std::string& data) {
    const std::string p = (dir / name).string();
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    return p;
  };

  auto kind_of = [](const std::string& path) {
    try {
      load_checkpoint(path);
    } catch (const CheckpointError& e) {
      return e.kind;
    }
    FAIL("expected CheckpointError");
    return CheckpointError::Kind::BadHeader;
  };

  SECTION("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    REQUIRE(kind_of(write_bytes("magic.ckpt", b)) == CheckpointError::Kind::BadHeader);
  }
  SECTION("unsupported version") {
    std::string b = bytes;
    b[4] = 99;
    REQUIRE(kind_of(write_bytes("version.ckpt", b)) == CheckpointError::Kind::BadHeader);
  }
  SECTION("truncation") {
    for (std::size_t cut : {std::size_t(6), std::size_t(13), bytes.size() - 3}) {
      REQUIRE(kind_of(write_bytes("trunc.ckpt", bytes.substr(0, cut))) ==
              CheckpointError::Kind::Truncated);
    }
  }
  SECTION("implausible name length") {
    std::string b = bytes;
    // First entry's name_len field sits right after magic+version+count.
    b[12] = '\xff';
    b[13] = '\xff';
    b[14] = '\xff';
    b[15] = '\x7f';
    REQUIRE(kind_of(write_bytes("name.ckpt", b)) == CheckpointError::Kind::BadData);
  }
  SECTION("non-finite payload") {
    std::string b = bytes;
    // Last four bytes are the final f32; make it +inf (little-endian).
    b[b.size() - 4] = '\x00';
    b[b.size() - 3] = '\x00';
    b[b.size() - 2] = '\x80';
    b[b.size() - 1] = '\x7f';
    REQUIRE(kind_of(write_bytes("inf.ckpt", b)) == CheckpointError::Kind::BadData);
  }
  SECTION("missing file is an IO error") {
    REQUIRE_THROWS_AS(load_checkpoint((dir / "nope.ckpt").string()), IoError);
  }
}
