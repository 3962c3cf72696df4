#include <doctest.h>

#include <cstring>

#include "fixtures.hpp"
#include "shad/checkpoint.hpp"
#include "shad/io.hpp"

using namespace shad;
using shad::testing::TempDir;

TEST_SUITE("checkpoint") {
  TEST_CASE("save then load is bitwise equal") {
    TempDir dir("shad_test_ckpt");
    auto p = ModelParams<float>::initialize({60, 32, 2, 2, 64}, 9);
    save_checkpoint(p, dir.path / "m.ckpt");
    auto back = load_checkpoint(dir.path / "m.ckpt");
    CHECK(back.dims == p.dims);
    CHECK(std::memcmp(back.values.data(), p.values.data(), sizeof(float) * static_cast<std::size_t>(p.values.size())) == 0);
    CHECK(encode_checkpoint(back) == encode_checkpoint(p));
    CHECK(checkpoint_hash(back) == checkpoint_hash(p));
    CHECK(checkpoint_hash(p) == file_hash(dir.path / "m.ckpt"));
  }

  TEST_CASE("a fingerprint mismatch names both architectures") {
    auto small = ModelParams<float>::initialize({60, 32, 1, 2, 64}, 1);
    ModelDims want{60, 64, 1, 2, 64};
    try {
      decode_checkpoint(encode_checkpoint(small), want);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(small.dims.describe()) != std::string::npos);
      CHECK(msg.find(want.describe()) != std::string::npos);
    }
  }

  TEST_CASE("truncated and corrupted files report a byte offset") {
    const auto bytes = encode_checkpoint(ModelParams<float>::initialize({60, 16, 1, 2, 32}, 1));
    try {
      decode_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 3));
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_checkpoint(bad_magic), doctest::Contains("offset 0"), CheckpointError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "extra"), CheckpointError);
  }
}
