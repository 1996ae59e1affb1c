// test_serialization.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scoh/error.hpp"
#include "scoh/kv_config.hpp"
#include "scoh/tensor_io.hpp"
#include "support.hpp"

using namespace scoh;

namespace {

std::string TempPath(const std::string &name) {
  return (std::filesystem::temp_directory_path() / ("scoh_ser_" + name)).string();
}

void WriteText(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

TensorFile SampleFile() {
  TensorFile f;
  f.kind = "scnet";
  f.meta["variant"] = "proposal2";
  f.meta["note"] = "two words";
  f.tensors.push_back({"w", {3, 2}, Eigen::VectorXd::LinSpaced(6, -1.0, 1.5)});
  // A payload byte equal to '\n' must not confuse the reader.
  Eigen::VectorXd tricky(2);
  tricky << 1.0 / 3.0, std::bit_cast<float>(0x0A0A0A0Au);
  f.tensors.push_back({"b", {2}, tricky});
  return f;
}

}  // namespace

TEST_SUITE("serialization") {
  TEST_CASE("tensor file round trip") {
    const std::string path = TempPath("tensors.bin");
    const TensorFile f = SampleFile();
    WriteTensorFile(f, path);
    TensorFile g = ReadTensorFile(path);
    CHECK(g.kind == "scnet");
    CHECK(g.Meta("variant") == "proposal2");
    CHECK(g.Meta("note") == "two words");
    REQUIRE(g.tensors.size() == 2u);
    for (size_t i = 0; i < 2; ++i) {
      CHECK(g.tensors[i].name == f.tensors[i].name);
      CHECK(g.tensors[i].shape == f.tensors[i].shape);
      // Stored as float32, so the round trip is exact up to single precision.
      Eigen::VectorXd expected = f.tensors[i].data.cast<float>().cast<double>();
      CHECK(g.tensors[i].data == expected);
    }
    CHECK_THROWS_AS(g.Get("missing"), Error);
    CHECK_THROWS_AS(g.Meta("missing"), Error);
    std::filesystem::remove(path);
  }

  TEST_CASE("LoadInto checks shapes") {
    nn::Tensor p = nn::Tensor::Parameter({3, 2}, Eigen::VectorXd::Zero(6));
    const TensorFile f = SampleFile();
    LoadInto(p, f.Get("w"));
    CHECK(p.value() == f.Get("w").data);
    CHECK_THROWS_AS(LoadInto(p, f.Get("b")), Error);
  }

  TEST_CASE("corrupt tensor files") {
    const std::string path = TempPath("bad.bin");
    WriteText(path, "");
    CHECK_THROWS_AS(ReadTensorFile(path), Error);
    WriteText(path, "not-a-model 1 scnet\nend\n");
    CHECK_THROWS_AS(ReadTensorFile(path), Error);
    WriteText(path, "scoh-tensors 1 scnet\ntensor w f32 2x2\nabc");
    CHECK_THROWS_AS(ReadTensorFile(path), Error);
    WriteText(path, "scoh-tensors 1 scnet\ntensor w f64 1\n12345678\nend\n");
    CHECK_THROWS_AS(ReadTensorFile(path), Error);
    WriteText(path, "scoh-tensors 1 scnet\ntensor w f32 1xq\n");
    CHECK_THROWS_AS(ReadTensorFile(path), Error);
    WriteText(path, "scoh-tensors 1 scnet\nmeta a b\n");
    CHECK_THROWS_AS(ReadTensorFile(path), Error);
    WriteText(path, "scoh-tensors 1 scnet\nbogus\nend\n");
    CHECK_THROWS_AS(ReadTensorFile(path), Error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(ReadTensorFile(path), Error);

    TensorFile mismatch;
    mismatch.kind = "x";
    mismatch.tensors.push_back({"w", {2, 2}, Eigen::VectorXd::Zero(3)});
    CHECK_THROWS_AS(WriteTensorFile(mismatch, path), Error);
  }

  TEST_CASE("key value parsing") {
    KvConfig c = KvConfig::Parse("# comment\n\n  clips = 12 \nsnr=20.5\nlist = 1 2.5  -3\nname = a b\n");
    CHECK(c.GetInt("clips") == 12);
    CHECK(c.GetDouble("snr") == 20.5);
    CHECK(c.GetDoubles("list") == std::vector<double>{1.0, 2.5, -3.0});
    CHECK(c.GetString("name") == "a b");
    CHECK(c.Has("clips"));
    CHECK_FALSE(c.Has("comment"));
    CHECK_THROWS_AS(c.GetString("missing"), Error);
    CHECK_THROWS_AS(c.GetInt("snr"), Error);
    CHECK_THROWS_AS(c.GetDouble("name"), Error);
    CHECK_THROWS_AS(c.GetDoubles("name"), Error);
    CHECK_THROWS_AS(KvConfig::Parse("no equals sign\n"), Error);
    CHECK_THROWS_AS(KvConfig::Parse(" = value\n"), Error);
  }

  TEST_CASE("key value save and load") {
    KvConfig c;
    c.Set("b", "2");
    c.Set("a", "x y");
    const std::string path = TempPath("kv.txt");
    c.Save(path);
    KvConfig d = KvConfig::Load(path);
    CHECK(d.values() == c.values());
    CHECK(d.ToString() == "a = x y\nb = 2\n");
    std::filesystem::remove(path);
    CHECK_THROWS_AS(KvConfig::Load(path), Error);
  }

  TEST_CASE("scenario round trip") {
    ScenarioParams params;
    params.num_speakers = 3;
    params.overlap = 0.3;
    params.clip_len_s = 6.0;
    params.array = "uca7-4.25cm";
    Scenario sc = SampleScenario(params, 77);
    Scenario back = ScenarioFromConfig(KvConfig::Parse(ScenarioToConfig(sc).ToString()));
    CHECK(back.seed == sc.seed);
    CHECK(back.room.dims == sc.room.dims);
    CHECK(back.room.t60 == sc.room.t60);
    CHECK(back.room.sample_rate == sc.room.sample_rate);
    CHECK(back.room.sound_speed == sc.room.sound_speed);
    REQUIRE(back.room.num_mics() == 7);
    for (int m = 0; m < 7; ++m) CHECK(back.room.array_positions[m] == sc.room.array_positions[m]);
    REQUIRE(back.room.num_sources() == 3);
    for (int j = 0; j < 3; ++j) CHECK(back.room.source_positions[j] == sc.room.source_positions[j]);
    CHECK(back.azimuths_deg == sc.azimuths_deg);
    CHECK(back.timeline.clip_len_s == sc.timeline.clip_len_s);
    REQUIRE(back.timeline.num_speakers() == 3);
    for (int j = 0; j < 3; ++j) {
      REQUIRE(back.timeline.intervals[j].size() == sc.timeline.intervals[j].size());
      for (size_t k = 0; k < sc.timeline.intervals[j].size(); ++k) {
        CHECK(back.timeline.intervals[j][k].start == sc.timeline.intervals[j][k].start);
        CHECK(back.timeline.intervals[j][k].end == sc.timeline.intervals[j][k].end);
      }
    }
  }

  TEST_CASE("scenario config errors") {
    ScenarioParams params;
    params.clip_len_s = 3.0;
    KvConfig c = ScenarioToConfig(SampleScenario(params, 5));
    KvConfig broken = c;
    broken.Set("mic.0", "1 2");
    CHECK_THROWS_AS(ScenarioFromConfig(broken), Error);
    broken = c;
    broken.Set("source.0.spans", "1.0");
    CHECK_THROWS_AS(ScenarioFromConfig(broken), Error);
    broken = c;
    broken.Set("seed", "abc");
    CHECK_THROWS_AS(ScenarioFromConfig(broken), Error);
    CHECK_THROWS_AS(ScenarioFromConfig(KvConfig::Parse("seed = 1\n")), Error);
  }
}
