#include <doctest.h>

#include <filesystem>

#include "tapelab/checkpoint.hpp"
#include "tapelab/error.hpp"
#include "tiny_models.hpp"

using namespace tapelab;
using tapelab::testing::tiny_arch;
using tapelab::testing::tiny_samples;

namespace {

Checkpoint trained(Architecture arch) {
  auto a = tiny_arch();
  if (arch == Architecture::kEncDec) a.input_length = 120;
  const auto s = tiny_samples(a, 9, 2);
  TrainConfig c;
  c.arch = arch;
  c.net = a;
  c.k_max = 2;
  c.r_max = 2;
  c.epochs = 3;
  c.seed = 5;
  TrainResult r = train(s, c);
  Checkpoint ck;
  ck.model = std::move(r.model);
  ck.m2_pretrained = std::move(r.m2_pretrained);
  ck.config = c;
  ck.stats = {0.5, 0.2};
  ck.train_ids = s.ids;
  ck.test_ids = {"held_out"};
  ck.provenance = {{"tool", "tape-lab"}};
  return ck;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("every architecture round-trips exactly") {
    for (const auto arch : {Architecture::kRrae, Architecture::kClassicalAe, Architecture::kExtended,
                            Architecture::kEncDec}) {
      CAPTURE(to_string(arch));
      const Checkpoint ck = trained(arch);
      const std::string bytes = encode_checkpoint(ck);
      const Checkpoint back = decode_checkpoint(bytes);
      CHECK(encode_checkpoint(back) == bytes);
      CHECK(back.train_ids == ck.train_ids);
      CHECK(back.test_ids == ck.test_ids);
      CHECK(back.stats.mean == ck.stats.mean);
      CHECK(back.config.arch == arch);
      CHECK(back.m2_pretrained.has_value() == (arch == Architecture::kExtended));

      auto a = ck.config.net;
      const auto s = tiny_samples(a, 4, 8);
      const Prediction p1 = predict(ck.model, s.inputs);
      const Prediction p2 = predict(back.model, s.inputs);
      CHECK(p1.dic == p2.dic);
      CHECK(p1.classes == p2.classes);
      CHECK(p1.reconstruction == p2.reconstruction);
    }
  }

  TEST_CASE("files on disk") {
    const Checkpoint ck = trained(Architecture::kRrae);
    const auto dir = std::filesystem::temp_directory_path() / "tapelab_tests";
    std::filesystem::create_directories(dir);
    save_checkpoint(ck, dir / "m.ckpt");
    CHECK(encode_checkpoint(load_checkpoint(dir / "m.ckpt")) == encode_checkpoint(ck));
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), InvalidData);
  }

  TEST_CASE("corrupt containers are rejected") {
    const std::string bytes = encode_checkpoint(trained(Architecture::kRrae));
    CHECK_THROWS_AS(decode_checkpoint("NOTACKPT"), InvalidData);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 8)), InvalidData);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad_magic), InvalidData);
    std::string bad_header = bytes;
    bad_header[20] = '\x01';
    CHECK_THROWS_AS(decode_checkpoint(bad_header), InvalidData);
  }
}
