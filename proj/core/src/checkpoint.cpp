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

#include "subbayes/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "subbayes/error.hpp"
#include "subbayes/sbmx.hpp"

namespace subbayes {

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

Matrix load_checked(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  Matrix m = read_sbmx(path);
  if (m.rows() != rows || m.cols() != cols) {
    throw FormatError("checkpoint: " + path.filename().string() + " is " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", manifest expects " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  return m;
}

}  // namespace

void checkpoint_save(const Network& net, const std::filesystem::path& dir, std::optional<std::uint64_t> seed) {
  net.validate();
  std::filesystem::create_directories(dir);
  json layers = json::array();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::string stem = "layer" + std::to_string(i) + "_";
    json entry;
    if (const auto* a = std::get_if<AdaptedLinear>(&net.layers[i])) {
      entry["type"] = "adapted";
      entry["in"] = a->in_dim();
      entry["out"] = a->out_dim();
      entry["rank"] = a->rank();
      entry["scale"] = a->scale;
      entry["trainable_ab"] = a->trainable_ab;
      entry["projection"] = std::string(to_string(a->pair.kind));
      write_sbmx(dir / (stem + "W0.sbmx"), a->W0);
      write_sbmx(dir / (stem + "bias.sbmx"), a->bias);
      write_sbmx(dir / (stem + "A.sbmx"), a->pair.A);
      write_sbmx(dir / (stem + "B.sbmx"), a->pair.B);
      write_sbmx(dir / (stem + "R.sbmx"), a->R);
    } else if (const auto* p = std::get_if<PlainLinear>(&net.layers[i])) {
      entry["type"] = "plain";
      entry["in"] = p->W.rows();
      entry["out"] = p->W.cols();
      entry["trainable"] = p->trainable;
      write_sbmx(dir / (stem + "W.sbmx"), p->W);
      write_sbmx(dir / (stem + "b.sbmx"), p->b);
    } else {
      entry["type"] = "activation";
      entry["fn"] = std::string(to_string(std::get<Activation>(net.layers[i]).kind));
    }
    layers.push_back(entry);
  }
  json manifest;
  manifest["format"] = "subbayes-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["classes"] = net.classes;
  manifest["ranks"] = [&] {
    json r = json::array();
    for (const auto& s : theta_layout(net)) r.push_back(s.rank);
    return r;
  }();
  manifest["seed"] = seed ? json(*seed) : json(nullptr);
  manifest["layers"] = layers;
  std::ofstream f(dir / "manifest.json", std::ios::trunc);
  if (!f) throw FormatError("checkpoint: cannot write manifest in " + dir.string());
  f << manifest.dump(2) << '\n';
}

Network checkpoint_load(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw FormatError("checkpoint: missing manifest.json in " + dir.string());
  Network net;
  try {
    const json manifest = json::parse(f);
    if (manifest.at("format") != "subbayes-checkpoint" || manifest.at("version") != kCheckpointVersion) {
      throw FormatError("checkpoint: unsupported manifest format/version");
    }
    net.classes = manifest.at("classes").get<std::size_t>();
    const auto& layers = manifest.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& e = layers[i];
      const std::string stem = "layer" + std::to_string(i) + "_";
      const std::string type = e.at("type").get<std::string>();
      if (type == "adapted") {
        const auto n = e.at("in").get<std::size_t>();
        const auto m = e.at("out").get<std::size_t>();
        const auto r = e.at("rank").get<std::size_t>();
        AdaptedLinear a;
        a.W0 = load_checked(dir / (stem + "W0.sbmx"), n, m);
        a.bias = load_checked(dir / (stem + "bias.sbmx"), 1, m);
        a.pair.A = load_checked(dir / (stem + "A.sbmx"), n, r);
        a.pair.B = load_checked(dir / (stem + "B.sbmx"), r, m);
        a.pair.rank = r;
        a.pair.kind = parse_projection_kind(e.at("projection").get<std::string>());
        a.R = load_checked(dir / (stem + "R.sbmx"), r, r);
        a.scale = e.at("scale").get<double>();
        a.trainable_ab = e.at("trainable_ab").get<bool>();
        net.layers.emplace_back(std::move(a));
      } else if (type == "plain") {
        const auto n = e.at("in").get<std::size_t>();
        const auto m = e.at("out").get<std::size_t>();
        PlainLinear p;
        p.W = load_checked(dir / (stem + "W.sbmx"), n, m);
        p.b = load_checked(dir / (stem + "b.sbmx"), 1, m);
        p.trainable = e.at("trainable").get<bool>();
        net.layers.emplace_back(std::move(p));
      } else if (type == "activation") {
        net.layers.emplace_back(Activation{parse_activation(e.at("fn").get<std::string>())});
      } else {
        throw FormatError("checkpoint: unknown layer type '" + type + "'");
      }
    }
    const auto ranks = manifest.at("ranks").get<std::vector<std::size_t>>();
    const auto layout = theta_layout(net);
    if (ranks.size() != layout.size()) throw FormatError("checkpoint: rank list does not match adapted layers");
    for (std::size_t k = 0; k < ranks.size(); ++k) {
      if (ranks[k] != layout[k].rank) throw FormatError("checkpoint: rank metadata disagrees with layer " + std::to_string(k));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: malformed manifest: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint: " + std::string(e.what()));
  }
  try {
    net.validate();
  } catch (const ShapeError& e) {
    throw FormatError("checkpoint: " + std::string(e.what()));
  }
  return net;
}

}  // namespace subbayes
