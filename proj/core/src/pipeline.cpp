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

#include "subbayes/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "subbayes/checkpoint.hpp"
#include "subbayes/error.hpp"
#include "subbayes/predictive.hpp"
#include "subbayes/sbmx.hpp"
#include "subbayes/swag.hpp"
#include "subbayes/welford.hpp"

namespace subbayes {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw FormatError("cannot read " + p.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + p.string());
  f << text;
}

std::string hex(const unsigned char* d, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s += digits[d[i] >> 4];
    s += digits[d[i] & 0xF];
  }
  return s;
}

std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  return hex(md, len);
}

std::string epoch_dir(std::size_t e) { return "epoch_" + std::to_string(e); }

void require(const fs::path& p, const std::string& phase) {
  if (!fs::exists(p)) throw MissingArtifactError(phase, p.string());
}

double ood_score(const UncertaintyTriple& t, const std::string& which) {
  return which == "epistemic" ? t.epistemic : t.total;
}

std::vector<double> scores(std::span<const UncertaintyTriple> ts, const std::string& which) {
  std::vector<double> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(ood_score(t, which));
  return out;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

const std::uint64_t kInitStream = 1;
const std::uint64_t kPretrainStream = 2;
const std::uint64_t kMapStream = 3;
const std::uint64_t kSubsampleStream = 4;
const std::uint64_t kSwagStream = 5;
const std::uint64_t kPredictStream = 6;

}  // namespace

std::size_t RunConfig::burn_in_epoch() const {
  return swag.burn_in_epoch != 0 ? swag.burn_in_epoch : std::max<std::size_t>(1, train.epochs / 2);
}

std::size_t RunConfig::laplace_epoch() const {
  return laplace.checkpoint_epoch != 0 ? laplace.checkpoint_epoch : std::max<std::size_t>(1, train.epochs / 2);
}

void RunConfig::validate() const {
  train.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  if (!csv) {
    if (data.generator != "two-moons" && data.generator != "gaussian-blobs") {
      throw ConfigError("unknown data generator: " + data.generator);
    }
    if (data.n_pretrain == 0 || data.n_train == 0 || data.n_val == 0 || data.n_test == 0 || data.n_ood == 0) {
      throw ConfigError("data: all set sizes must be positive");
    }
    if (!(data.noise >= 0.0) || !(data.ood_std >= 0.0)) throw ConfigError("data: noise and ood_std must be >= 0");
    if ((!data.ood_shift_center.empty() && data.ood_shift_center.size() != 2) || data.ood_far_center.size() != 2) {
      throw ConfigError("data: OOD centers must have two coordinates");
    }
  }
  if (model.pretrain_epochs == 0) throw ConfigError("model.pretrain_epochs must be positive");
  if (!(model.pretrain_lr > 0.0)) throw ConfigError("model.pretrain_lr must be positive");
  for (auto h : model.hidden) {
    if (h == 0) throw ConfigError("model.hidden widths must be positive");
  }
  if (projection.rank == 0) throw ConfigError("projection.rank must be positive");
  if (projection.kind == ProjectionKind::Hybrid && projection.rank % 2 != 0) {
    throw ConfigError("projection.rank must be even for hybrid projections");
  }
  if (projection.whitening_source && *projection.whitening_source != "train" &&
      *projection.whitening_source != "pretrain") {
    throw ConfigError("projection.whitening_source must be 'train' or 'pretrain'");
  }
  if (burn_in_epoch() > train.epochs) throw ConfigError("swag.burn_in_epoch exceeds train.epochs");
  if (swag.epochs < 2) throw ConfigError("swag.epochs must be at least 2");
  if (swag.samples == 0 || laplace.samples == 0) throw ConfigError("posterior sample counts must be >= 1");
  if (!(swag.lr_factor > 0.0)) throw ConfigError("swag.lr_factor must be positive");
  if (laplace_epoch() > train.epochs) throw ConfigError("laplace.checkpoint_epoch exceeds train.epochs");
  if (laplace.grid.empty()) throw ConfigError("laplace.grid must be nonempty");
  for (double g : laplace.grid) {
    if (!(g > 0.0)) throw ConfigError("laplace.grid entries must be positive");
  }
  if (evaluate.ece_bins == 0) throw ConfigError("evaluate.ece_bins must be >= 1");
  if (evaluate.ood_score != "total" && evaluate.ood_score != "epistemic") {
    throw ConfigError("evaluate.ood_score must be 'total' or 'epistemic'");
  }
  for (const auto& p : evaluate.posteriors) {
    if (p != "map" && p != "swag" && p != "laplace") throw ConfigError("unknown posterior '" + p + "'");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    check_keys(j, {"seed", "output_dir", "train_fraction", "data", "model", "projection", "train", "swag", "laplace",
                   "evaluate"},
               "config");
    read_opt(j, "seed", cfg.seed);
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    read_opt(j, "train_fraction", cfg.train.train_fraction);

    if (j.contains("data")) {
      const json& d = j.at("data");
      check_keys(d, {"generator", "n_pretrain", "n_train", "n_val", "n_test", "n_ood", "noise", "blob_mean",
                     "pretrain_rotation", "ood_shift_center", "ood_shift_distance", "ood_far_center", "ood_std",
                     "csv"},
                 "data");
      read_opt(d, "generator", cfg.data.generator);
      read_opt(d, "n_pretrain", cfg.data.n_pretrain);
      read_opt(d, "n_train", cfg.data.n_train);
      read_opt(d, "n_val", cfg.data.n_val);
      read_opt(d, "n_test", cfg.data.n_test);
      read_opt(d, "n_ood", cfg.data.n_ood);
      read_opt(d, "noise", cfg.data.noise);
      read_opt(d, "blob_mean", cfg.data.blob_mean);
      read_opt(d, "pretrain_rotation", cfg.data.pretrain_rotation);
      read_opt(d, "ood_shift_center", cfg.data.ood_shift_center);
      read_opt(d, "ood_shift_distance", cfg.data.ood_shift_distance);
      read_opt(d, "ood_far_center", cfg.data.ood_far_center);
      read_opt(d, "ood_std", cfg.data.ood_std);
      if (d.contains("csv")) {
        const json& c = d.at("csv");
        check_keys(c, {"pretrain_train", "pretrain_val", "train", "val", "test", "ood"}, "data.csv");
        CsvSources s;
        s.pretrain_train = c.at("pretrain_train").get<std::string>();
        s.pretrain_val = c.at("pretrain_val").get<std::string>();
        s.train = c.at("train").get<std::string>();
        s.val = c.at("val").get<std::string>();
        s.test = c.at("test").get<std::string>();
        if (c.contains("ood")) {
          for (const auto& [name, path] : c.at("ood").items()) s.ood[name] = path.get<std::string>();
        }
        cfg.csv = std::move(s);
      }
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      check_keys(m, {"hidden", "activation", "pretrain_epochs", "pretrain_lr"}, "model");
      read_opt(m, "hidden", cfg.model.hidden);
      if (m.contains("activation")) cfg.model.activation = parse_activation(m.at("activation").get<std::string>());
      read_opt(m, "pretrain_epochs", cfg.model.pretrain_epochs);
      read_opt(m, "pretrain_lr", cfg.model.pretrain_lr);
    }
    if (j.contains("projection")) {
      const json& p = j.at("projection");
      check_keys(p, {"kind", "rank", "seed", "permute", "ridge", "whitening_source", "hybrid_first", "hybrid_second"},
                 "projection");
      if (p.contains("kind")) cfg.projection.kind = parse_projection_kind(p.at("kind").get<std::string>());
      read_opt(p, "rank", cfg.projection.rank);
      read_opt(p, "seed", cfg.projection.seed);
      read_opt(p, "permute", cfg.projection.permute);
      if (p.contains("ridge") && !p.at("ridge").is_null()) cfg.projection.ridge = p.at("ridge").get<double>();
      if (p.contains("whitening_source") && !p.at("whitening_source").is_null()) {
        cfg.projection.whitening_source = p.at("whitening_source").get<std::string>();
      }
      if (p.contains("hybrid_first")) {
        cfg.projection.hybrid_first = parse_projection_kind(p.at("hybrid_first").get<std::string>());
      }
      if (p.contains("hybrid_second")) {
        cfg.projection.hybrid_second = parse_projection_kind(p.at("hybrid_second").get<std::string>());
      }
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      check_keys(t, {"epochs", "batch_size", "lr", "weight_decay", "warmup_fraction", "alpha", "regime"}, "train");
      read_opt(t, "epochs", cfg.train.epochs);
      read_opt(t, "batch_size", cfg.train.batch_size);
      read_opt(t, "lr", cfg.train.lr);
      read_opt(t, "weight_decay", cfg.train.weight_decay);
      read_opt(t, "warmup_fraction", cfg.train.warmup_fraction);
      read_opt(t, "alpha", cfg.train.alpha);
      if (t.contains("regime")) cfg.train.regime = parse_regime(t.at("regime").get<std::string>());
    }
    if (j.contains("swag")) {
      const json& s = j.at("swag");
      check_keys(s, {"burn_in_epoch", "epochs", "k", "samples", "lr_factor"}, "swag");
      read_opt(s, "burn_in_epoch", cfg.swag.burn_in_epoch);
      read_opt(s, "epochs", cfg.swag.epochs);
      read_opt(s, "k", cfg.swag.k);
      read_opt(s, "samples", cfg.swag.samples);
      read_opt(s, "lr_factor", cfg.swag.lr_factor);
    }
    if (j.contains("laplace")) {
      const json& l = j.at("laplace");
      check_keys(l, {"structure", "checkpoint_epoch", "grid", "samples"}, "laplace");
      if (l.contains("structure")) {
        cfg.laplace.structure = parse_laplace_structure(l.at("structure").get<std::string>());
      }
      read_opt(l, "checkpoint_epoch", cfg.laplace.checkpoint_epoch);
      read_opt(l, "grid", cfg.laplace.grid);
      read_opt(l, "samples", cfg.laplace.samples);
    }
    if (j.contains("evaluate")) {
      const json& e = j.at("evaluate");
      check_keys(e, {"posteriors", "ece_bins", "ood_score", "ood_reference"}, "evaluate");
      read_opt(e, "posteriors", cfg.evaluate.posteriors);
      read_opt(e, "ece_bins", cfg.evaluate.ece_bins);
      read_opt(e, "ood_score", cfg.evaluate.ood_score);
      read_opt(e, "ood_reference", cfg.evaluate.ood_reference);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return parse_run_config(os.str());
}

std::string canonical_config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.generic_string();
  j["train_fraction"] = cfg.train.train_fraction;
  json d = {{"generator", cfg.data.generator},
            {"n_pretrain", cfg.data.n_pretrain},
            {"n_train", cfg.data.n_train},
            {"n_val", cfg.data.n_val},
            {"n_test", cfg.data.n_test},
            {"n_ood", cfg.data.n_ood},
            {"noise", cfg.data.noise},
            {"blob_mean", cfg.data.blob_mean},
            {"pretrain_rotation", cfg.data.pretrain_rotation},
            {"ood_shift_center", cfg.data.ood_shift_center},
            {"ood_shift_distance", cfg.data.ood_shift_distance},
            {"ood_far_center", cfg.data.ood_far_center},
            {"ood_std", cfg.data.ood_std}};
  if (cfg.csv) {
    json ood = json::object();
    for (const auto& [name, p] : cfg.csv->ood) ood[name] = p.generic_string();
    d["csv"] = {{"pretrain_train", cfg.csv->pretrain_train.generic_string()},
                {"pretrain_val", cfg.csv->pretrain_val.generic_string()},
                {"train", cfg.csv->train.generic_string()},
                {"val", cfg.csv->val.generic_string()},
                {"test", cfg.csv->test.generic_string()},
                {"ood", ood}};
  }
  j["data"] = d;
  j["model"] = {{"hidden", cfg.model.hidden},
                {"activation", std::string(to_string(cfg.model.activation))},
                {"pretrain_epochs", cfg.model.pretrain_epochs},
                {"pretrain_lr", cfg.model.pretrain_lr}};
  json p = {{"kind", std::string(to_string(cfg.projection.kind))},
            {"rank", cfg.projection.rank},
            {"seed", cfg.projection.seed},
            {"permute", cfg.projection.permute},
            {"hybrid_first", std::string(to_string(cfg.projection.hybrid_first))},
            {"hybrid_second", std::string(to_string(cfg.projection.hybrid_second))}};
  p["ridge"] = cfg.projection.ridge ? json(*cfg.projection.ridge) : json(nullptr);
  p["whitening_source"] = cfg.projection.whitening_source ? json(*cfg.projection.whitening_source) : json(nullptr);
  j["projection"] = p;
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr", cfg.train.lr},
                {"weight_decay", cfg.train.weight_decay},
                {"warmup_fraction", cfg.train.warmup_fraction},
                {"alpha", cfg.train.alpha},
                {"regime", std::string(to_string(cfg.train.regime))}};
  j["swag"] = {{"burn_in_epoch", cfg.swag.burn_in_epoch},
               {"epochs", cfg.swag.epochs},
               {"k", cfg.swag.k},
               {"samples", cfg.swag.samples},
               {"lr_factor", cfg.swag.lr_factor}};
  j["laplace"] = {{"structure", std::string(to_string(cfg.laplace.structure))},
                  {"checkpoint_epoch", cfg.laplace.checkpoint_epoch},
                  {"grid", cfg.laplace.grid},
                  {"samples", cfg.laplace.samples}};
  j["evaluate"] = {{"posteriors", cfg.evaluate.posteriors},
                   {"ece_bins", cfg.evaluate.ece_bins},
                   {"ood_score", cfg.evaluate.ood_score},
                   {"ood_reference", cfg.evaluate.ood_reference}};
  return j.dump(2) + "\n";
}

std::string git_blob_sha1(const std::string& bytes) {
  std::string blob = "blob " + std::to_string(bytes.size());
  blob.push_back('\0');
  blob += bytes;
  return sha1_hex(blob);
}

std::string git_blob_sha1_file(const fs::path& path) { return git_blob_sha1(read_file(path)); }

RunManifest RunManifest::load_or_empty(const fs::path& run_dir) {
  RunManifest m;
  const fs::path p = run_dir / "manifest.json";
  if (!fs::exists(p)) return m;
  try {
    const json j = json::parse(read_file(p));
    m.config_hash = j.value("config_hash", "");
    for (const auto& [name, ph] : j.at("phases").items()) {
      PhaseRecord r;
      r.wall_time_s = ph.value("wall_time_s", 0.0);
      r.artifacts = ph.value("artifacts", std::map<std::string, std::string>{});
      r.notes = ph.value("notes", std::map<std::string, std::string>{});
      m.phases[name] = std::move(r);
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed run manifest " + p.string() + ": " + e.what());
  }
  return m;
}

void RunManifest::save(const fs::path& run_dir) const {
  json j;
  j["config_hash"] = config_hash;
  json phases = json::object();
  for (const auto& [name, r] : this->phases) {
    phases[name] = {{"wall_time_s", r.wall_time_s}, {"artifacts", r.artifacts}, {"notes", r.notes}};
  }
  j["phases"] = phases;
  write_file(run_dir / "manifest.json", j.dump(2) + "\n");
}

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

fs::path Pipeline::phase_dir(const std::string& phase) const { return cfg_.output_dir / phase; }

void Pipeline::record(const std::string& phase, std::chrono::steady_clock::time_point start,
                      const std::map<std::string, std::string>& notes) {
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string canonical = canonical_config_json(cfg_);
  RunManifest m = RunManifest::load_or_empty(cfg_.output_dir);
  const std::string hash = sha1_hex(canonical);
  if (m.config_hash != hash) {
    m.phases.clear();
    m.config_hash = hash;
  }
  PhaseRecord r;
  r.wall_time_s = elapsed;
  r.notes = notes;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(phase_dir(phase))) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    r.artifacts[fs::relative(f, cfg_.output_dir).generic_string()] = git_blob_sha1_file(f);
  }
  m.phases[phase] = std::move(r);
  m.save(cfg_.output_dir);
  write_file(cfg_.output_dir / "config.json", canonical);
}

GeneratedData Pipeline::load_data() const {
  const fs::path dir = phase_dir("gen-data");
  const fs::path index = dir / "data.json";
  require(index, "gen-data");
  json j;
  try {
    j = json::parse(read_file(index));
  } catch (const json::exception& e) {
    throw FormatError("malformed " + index.string() + ": " + e.what());
  }
  const auto classes = j.at("classes").get<std::size_t>();
  auto load = [&](const std::string& name) {
    const fs::path p = dir / (name + ".csv");
    require(p, "gen-data");
    return read_csv(p, classes);
  };
  GeneratedData d;
  d.pretrain_train = load("pretrain_train");
  d.pretrain_val = load("pretrain_val");
  d.train = load("train");
  d.val = load("val");
  d.test = load("test");
  for (const auto& name : j.at("ood")) {
    const auto n = name.get<std::string>();
    d.ood.emplace_back(n, load("ood_" + n));
  }
  return d;
}

Dataset Pipeline::load_train_subset() const {
  return subsample(load_data().train, cfg_.train.train_fraction, sub_seed(cfg_.seed, kSubsampleStream));
}

Network Pipeline::load_checkpoint(const std::string& phase, const std::string& name) const {
  const fs::path dir = phase_dir(phase) / name;
  require(dir / "manifest.json", phase);
  return checkpoint_load(dir);
}

void Pipeline::gen_data() {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = phase_dir("gen-data");
  fs::remove_all(dir);
  fs::create_directories(dir);
  GeneratedData d;
  if (cfg_.csv) {
    const auto& s = *cfg_.csv;
    d.pretrain_train = read_csv(s.pretrain_train);
    d.pretrain_val = read_csv(s.pretrain_val);
    d.train = read_csv(s.train);
    d.val = read_csv(s.val);
    d.test = read_csv(s.test);
    for (const auto& [name, p] : s.ood) d.ood.emplace_back(name, read_csv(p));
    const std::size_t classes = std::max({d.pretrain_train.classes, d.pretrain_val.classes, d.train.classes,
                                          d.val.classes, d.test.classes});
    for (Dataset* ds : {&d.pretrain_train, &d.pretrain_val, &d.train, &d.val, &d.test}) ds->classes = classes;
  } else {
    d = generate_data(cfg_.data, cfg_.seed);
  }
  write_csv(dir / "pretrain_train.csv", d.pretrain_train);
  write_csv(dir / "pretrain_val.csv", d.pretrain_val);
  write_csv(dir / "train.csv", d.train);
  write_csv(dir / "val.csv", d.val);
  write_csv(dir / "test.csv", d.test);
  json ood = json::array();
  for (const auto& [name, ds] : d.ood) {
    write_csv(dir / ("ood_" + name + ".csv"), ds);
    ood.push_back(name);
  }
  json index = {{"classes", d.train.classes}, {"ood", ood}};
  write_file(dir / "data.json", index.dump(2) + "\n");
  record("gen-data", start, {{"train_rows", std::to_string(d.train.size())}});
}

void Pipeline::pretrain() {
  const auto start = std::chrono::steady_clock::now();
  const GeneratedData d = load_data();
  const fs::path dir = phase_dir("pretrain");
  fs::remove_all(dir);
  SeededRng rng(sub_seed(cfg_.seed, kInitStream));
  Network net = make_mlp(d.pretrain_train.X.cols(), cfg_.model.hidden, d.train.classes, cfg_.model.activation, rng);
  TrainConfig tc = cfg_.train;
  tc.epochs = cfg_.model.pretrain_epochs;
  tc.lr = cfg_.model.pretrain_lr;
  tc.train_fraction = 1.0;
  tc.seed = sub_seed(cfg_.seed, kPretrainStream);
  const TrainResult res = subbayes::train_map(std::move(net), d.pretrain_train, &d.pretrain_val, tc);
  checkpoint_save(res.net, dir / "checkpoint", cfg_.seed);
  const auto& last = res.history.back();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", last.val_accuracy);
  record("pretrain", start, {{"val_accuracy", buf}});
}

void Pipeline::project() {
  const auto start = std::chrono::steady_clock::now();
  const Network base = load_checkpoint("pretrain", "checkpoint");
  const GeneratedData d = load_data();
  const fs::path dir = phase_dir("project");
  fs::remove_all(dir);
  const bool from_pretrain = cfg_.projection.whitening_source && *cfg_.projection.whitening_source == "pretrain";
  const Dataset source = from_pretrain
                             ? d.pretrain_train
                             : subsample(d.train, cfg_.train.train_fraction, sub_seed(cfg_.seed, kSubsampleStream));
  ForwardCache cache;
  forward(base, source.X, &cache);

  std::map<std::string, std::string> notes;
  for (std::size_t layer : adaptable_layer_indices(base)) {
    const auto& plain = std::get<PlainLinear>(base.layers[layer]);
    const Matrix& inputs = cache.outputs[layer];
    WelfordState w(inputs.cols());
    w.update(inputs);
    const Matrix sigma = w.finalize();
    ProjectionSpec spec = cfg_.projection;
    spec.rank = std::min({cfg_.projection.rank, plain.W.rows(), plain.W.cols()});
    if (spec.kind == ProjectionKind::Hybrid && spec.rank % 2 != 0) --spec.rank;
    if (spec.rank == 0) throw ConfigError("projection rank clamps to 0 for layer " + std::to_string(layer));
    spec.seed = sub_seed(cfg_.projection.seed, layer);
    const ProjectionPair pair = build_projection(plain.W, spec, &sigma);
    const fs::path ldir = dir / ("layer" + std::to_string(layer));
    save_projection(ldir, pair);
    write_sbmx(ldir / "sigma_xx.sbmx", sigma);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6e", recon_error(plain.W, pair));
    notes["layer" + std::to_string(layer) + "_recon_error"] = buf;
    notes["layer" + std::to_string(layer) + "_rank"] = std::to_string(spec.rank);
  }
  record("project", start, notes);
}

void Pipeline::train_map() {
  const auto start = std::chrono::steady_clock::now();
  const Network base = load_checkpoint("pretrain", "checkpoint");
  std::vector<ProjectionPair> pairs;
  for (std::size_t layer : adaptable_layer_indices(base)) {
    const fs::path ldir = phase_dir("project") / ("layer" + std::to_string(layer));
    require(ldir / "meta.json", "project");
    pairs.push_back(load_projection(ldir));
  }
  Network net = adapt_network(base, pairs, cfg_.train.alpha, cfg_.train.regime == TrainRegime::All);
  const GeneratedData d = load_data();
  const Dataset train = subsample(d.train, cfg_.train.train_fraction, sub_seed(cfg_.seed, kSubsampleStream));
  const fs::path dir = phase_dir("train-map");
  fs::remove_all(dir);
  fs::create_directories(dir);

  TrainConfig tc = cfg_.train;
  tc.seed = sub_seed(cfg_.seed, kMapStream);
  const std::set<std::size_t> keep = {cfg_.burn_in_epoch(), cfg_.laplace_epoch(), cfg_.train.epochs};
  const TrainResult res = subbayes::train_map(std::move(net), train, &d.val, tc, [&](std::size_t e, const Network& n) {
    if (keep.count(e) != 0) checkpoint_save(n, dir / epoch_dir(e), cfg_.seed);
  });

  std::ostringstream hist;
  hist << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  for (const auto& r : res.history) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.train_accuracy,
                  r.val_loss, r.val_accuracy);
    hist << buf;
  }
  write_file(dir / "history.csv", hist.str());
  record("train-map", start,
         {{"train_rows", std::to_string(train.size())}, {"train_fraction", std::to_string(cfg_.train.train_fraction)}});
}

void Pipeline::fit_swag() {
  const auto start = std::chrono::steady_clock::now();
  Network net = load_checkpoint("train-map", epoch_dir(cfg_.burn_in_epoch()));
  const Dataset train = load_train_subset();
  const fs::path dir = phase_dir("fit-swag");
  fs::remove_all(dir);

  for (auto& l : net.layers) {
    if (auto* p = std::get_if<PlainLinear>(&l)) p->trainable = false;
  }
  TrainConfig tc = cfg_.train;
  tc.epochs = cfg_.swag.epochs;
  tc.lr = cfg_.train.lr * cfg_.swag.lr_factor;
  tc.schedule = LrSchedule::Constant;
  tc.regime = TrainRegime::CoresOnly;
  tc.seed = sub_seed(cfg_.seed, kSwagStream);
  SwagCollector collector(flatten(net).size(), cfg_.swag.k);
  const TrainResult res = subbayes::train_map(std::move(net), train, nullptr, tc,
                                              [&](std::size_t, const Network& n) { collector.collect(flatten(n).values); });
  const SwagPosterior post = swag_finalize(collector);
  save_swag(dir / "posterior", post, SwagMeta{cfg_.swag.k, cfg_.burn_in_epoch(), collector.collected()});
  checkpoint_save(res.net, dir / "net", cfg_.seed);
  record("fit-swag", start, {{"snapshots", std::to_string(collector.collected())}});
}

void Pipeline::fit_laplace() {
  const auto start = std::chrono::steady_clock::now();
  const Network net = load_checkpoint("train-map", epoch_dir(cfg_.laplace_epoch()));
  const Dataset train = load_train_subset();
  const fs::path dir = phase_dir("fit-laplace");
  fs::remove_all(dir);

  Curvature curv;
  if (cfg_.laplace.structure == LaplaceStructure::Diag) {
    curv = fit_ggn_diag(net, train);
  } else {
    curv = fit_kfac(net, train);
  }
  ThetaVector theta = flatten(net);
  const double data_nll = loss_nll(forward(net, train.X), train.y);
  const double lambda = tune_prior_precision(curv, theta.values, data_nll, cfg_.laplace.grid);
  const LaplacePosterior post(std::move(theta), std::move(curv), lambda);
  save_laplace(dir / "posterior", post, cfg_.laplace.grid);
  checkpoint_save(net, dir / "net", cfg_.seed);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", lambda);
  record("fit-laplace", start, {{"prior_precision", buf}, {"structure", std::string(to_string(post.structure()))}});
}

namespace {

struct LoadedPosterior {
  Network net;
  Posterior posterior;
  std::size_t samples = 1;
};

}  // namespace

static LoadedPosterior load_posterior(const Pipeline& p, const std::string& name) {
  const RunConfig& cfg = p.config();
  if (name == "map") {
    const fs::path dir = p.phase_dir("train-map") / epoch_dir(cfg.train.epochs);
    require(dir / "manifest.json", "train-map");
    return {checkpoint_load(dir), MapPoint{}, 1};
  }
  if (name == "swag") {
    const fs::path dir = p.phase_dir("fit-swag");
    require(dir / "posterior" / "meta.json", "fit-swag");
    require(dir / "net" / "manifest.json", "fit-swag");
    return {checkpoint_load(dir / "net"), load_swag(dir / "posterior"), cfg.swag.samples};
  }
  const fs::path dir = p.phase_dir("fit-laplace");
  require(dir / "posterior" / "meta.json", "fit-laplace");
  require(dir / "net" / "manifest.json", "fit-laplace");
  return {checkpoint_load(dir / "net"), load_laplace(dir / "posterior"), cfg.laplace.samples};
}

void Pipeline::evaluate() {
  const auto start = std::chrono::steady_clock::now();
  const GeneratedData d = load_data();
  const Dataset* reference = nullptr;
  for (const auto& [name, ds] : d.ood) {
    if (name == cfg_.evaluate.ood_reference) reference = &ds;
  }
  const fs::path dir = phase_dir("evaluate");
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::uint64_t seed = sub_seed(cfg_.seed, kPredictStream);
  for (const auto& name : cfg_.evaluate.posteriors) {
    const LoadedPosterior lp = load_posterior(*this, name);
    const PredictiveSamples test = bma_predict(lp.net, lp.posterior, d.test.X, lp.samples, seed);
    Metrics m = compute_metrics(test, d.test.y, cfg_.evaluate.ece_bins);
    const auto id = decompose_all(test);
    if (reference != nullptr) {
      const auto ood = decompose_all(bma_predict(lp.net, lp.posterior, reference->X, lp.samples, seed));
      const auto s_id = scores(id, cfg_.evaluate.ood_score);
      const auto s_ood = scores(ood, cfg_.evaluate.ood_score);
      m.auroc = auroc(s_ood, s_id);
      m.w1 = wasserstein1(s_ood, s_id);
    }
    write_file(dir / ("metrics_" + name + ".json"), metrics_to_json(m));
    write_file(dir / ("entropy_" + name + "_test.csv"), entropy_csv(id));
  }
  record("evaluate", start);
}

void Pipeline::ood() {
  const auto start = std::chrono::steady_clock::now();
  const GeneratedData d = load_data();
  const fs::path dir = phase_dir("ood");
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::uint64_t seed = sub_seed(cfg_.seed, kPredictStream);
  for (const auto& name : cfg_.evaluate.posteriors) {
    const LoadedPosterior lp = load_posterior(*this, name);
    const auto id = decompose_all(bma_predict(lp.net, lp.posterior, d.test.X, lp.samples, seed));
    write_file(dir / name / "test_entropy.csv", entropy_csv(id));
    const auto id_total = scores(id, "total");
    const auto id_epi = scores(id, "epistemic");
    json report;
    report["id"] = {{"mean_total_entropy", mean_of(id_total)}, {"mean_epistemic", mean_of(id_epi)}};
    json sets = json::object();
    for (const auto& [set, ds] : d.ood) {
      const auto o = decompose_all(bma_predict(lp.net, lp.posterior, ds.X, lp.samples, seed));
      write_file(dir / name / (set + "_entropy.csv"), entropy_csv(o));
      const auto o_total = scores(o, "total");
      const auto o_epi = scores(o, "epistemic");
      sets[set] = {{"mean_total_entropy", mean_of(o_total)},
                   {"mean_epistemic", mean_of(o_epi)},
                   {"auroc_total", auroc(o_total, id_total)},
                   {"auroc_epistemic", auroc(o_epi, id_epi)},
                   {"w1_total", wasserstein1(o_total, id_total)},
                   {"w1_epistemic", wasserstein1(o_epi, id_epi)}};
    }
    report["ood"] = sets;
    write_file(dir / ("ood_" + name + ".json"), report.dump(2) + "\n");
  }
  record("ood", start);
}

void Pipeline::run_all() {
  for (const char* phase : kPhases) run_phase(phase);
}

void Pipeline::run_phase(const std::string& phase) {
  if (phase == "gen-data") return gen_data();
  if (phase == "pretrain") return pretrain();
  if (phase == "project") return project();
  if (phase == "train-map") return train_map();
  if (phase == "fit-swag") return fit_swag();
  if (phase == "fit-laplace") return fit_laplace();
  if (phase == "evaluate") return evaluate();
  if (phase == "ood") return ood();
  throw ConfigError("unknown phase: " + phase);
}

}  // namespace subbayes
