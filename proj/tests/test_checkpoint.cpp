// Copyright 2026 The subbayes Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "subbayes/checkpoint.hpp"
#include "subbayes/datasets.hpp"
#include "subbayes/error.hpp"
#include "subbayes/training.hpp"
#include "test_util.hpp"

namespace subbayes {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

TEST(Checkpoint, RoundTripIsExact) {
  SeededRng rng(1);
  const Network net = testing::small_adapted_net(rng, 3, 5, 2, 2);
  const auto dir = testing::temp_dir("ckpt_roundtrip");
  checkpoint_save(net, dir / "a", 7);
  const Network back = checkpoint_load(dir / "a");
  const Matrix x = standard_normal(rng, 9, 3);
  EXPECT_EQ(forward(back, x), forward(net, x));
  EXPECT_EQ(flatten(back).values, flatten(net).values);

  checkpoint_save(back, dir / "b", 7);
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path().filename();
  }
}

TEST(Checkpoint, TrainedToyKeepsAccuracy) {
  SeededRng rng(2);
  const double mean[] = {2.0, 2.0};
  const Dataset data = make_gaussian_blobs(100, mean, 0.7, rng);
  TrainConfig cfg;
  cfg.epochs = 10;
  const TrainResult res = train_map(testing::small_adapted_net(rng, 2, 6, 2, 2, 0.0), data, nullptr, cfg);
  const auto dir = testing::temp_dir("ckpt_trained");
  checkpoint_save(res.net, dir);
  const Network back = checkpoint_load(dir);
  EXPECT_EQ(accuracy_of(forward(back, data.X), data.y), accuracy_of(forward(res.net, data.X), data.y));
}

TEST(Checkpoint, WrongRankMetadataFails) {
  SeededRng rng(3);
  const Network net = testing::small_adapted_net(rng, 3, 5, 2, 2);
  const auto dir = testing::temp_dir("ckpt_rank");
  checkpoint_save(net, dir);
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  manifest["ranks"][0] = 5;
  std::ofstream(dir / "manifest.json", std::ios::trunc) << manifest.dump();
  EXPECT_THROW(checkpoint_load(dir), FormatError);
}

TEST(Checkpoint, MissingOrCorruptFilesFail) {
  SeededRng rng(4);
  const Network net = testing::small_adapted_net(rng, 3, 5, 2, 2);
  const auto dir = testing::temp_dir("ckpt_corrupt");
  EXPECT_THROW(checkpoint_load(dir), FormatError);
  checkpoint_save(net, dir);
  fs::remove(dir / "layer0_R.sbmx");
  EXPECT_THROW(checkpoint_load(dir), FormatError);
  checkpoint_save(net, dir);
  std::ofstream(dir / "manifest.json", std::ios::trunc) << "{not json";
  EXPECT_THROW(checkpoint_load(dir), FormatError);
}

}  // namespace
}  // namespace subbayes
