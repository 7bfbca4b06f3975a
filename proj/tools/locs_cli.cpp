// SPDX-License-Identifier: Apache-2.0
// Command-line front end: dataset generation, training, evaluation,
// interactive subsets, property suites and frame/filter/normalization ablations.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "locs/checkpoint.hpp"
#include "locs/evaluate.hpp"
#include "locs/property_suites.hpp"
#include "locs/simulate.hpp"
#include "locs/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace locs;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  json j;
  f >> j;
  return j;
}

json section(const json& cfg, const char* key) {
  return cfg.contains(key) ? cfg.at(key) : json::object();
}

void write_json(const fs::path& path, const json& j) {
  if (path.empty()) return;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

EvalOptions eval_from_json(const json& j) {
  EvalOptions o;
  o.observed_len = j.value("observed_len", o.observed_len);
  o.horizon = j.value("horizon", o.horizon);
  o.seed = j.value("seed", o.seed);
  o.sample_edges = j.value("sample_edges", o.sample_edges);
  o.batch = j.value("batch", o.batch);
  return o;
}

// Overrides in a JSON object only for options given on the command line.
template <typename T>
void override(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

struct GenArgs {
  std::string config, out, split = "train";
  std::size_t scenes = 100;
  std::uint64_t seed = 0;
  std::optional<std::size_t> nodes, steps;
  std::optional<double> push;
};

struct TrainArgs {
  std::string config, data, out, loss_log;
  std::optional<std::size_t> epochs, batch, hidden, filter_hidden;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> decoder, frame, filters, norm;
};

struct EvalArgs {
  std::string config, checkpoint, data, csv, summary, indices;
  std::optional<std::size_t> observed, horizon;
  std::optional<std::uint64_t> seed;
};

json model_json(const json& cfg, const TrainArgs& a) {
  json m = section(cfg, "model");
  override(m, "decoder", a.decoder);
  override(m, "frame", a.frame);
  override(m, "filters", a.filters);
  override(m, "hidden", a.hidden);
  override(m, "filter_hidden", a.filter_hidden);
  return m;
}

json train_json(const json& cfg, const TrainArgs& a) {
  json t = section(cfg, "train");
  override(t, "epochs", a.epochs);
  override(t, "batch", a.batch);
  override(t, "lr", a.lr);
  override(t, "seed", a.seed);
  override(t, "norm", a.norm);
  return t;
}

json eval_json(const json& cfg, const EvalArgs& a) {
  json e = section(cfg, "eval");
  override(e, "observed_len", a.observed);
  override(e, "horizon", a.horizon);
  override(e, "seed", a.seed);
  return e;
}

DatasetBundle select(const DatasetBundle& data, const std::string& indices_path) {
  if (indices_path.empty()) return data;
  const json j = load_config(indices_path);
  const std::vector<std::size_t> idx = j.at("indices").get<std::vector<std::size_t>>();
  return data.subset(idx);
}

void report(const MetricsReport& r, const std::string& csv, const std::string& summary) {
  if (!csv.empty()) r.write_csv(csv);
  const json j = r.to_json();
  write_json(summary, j);
  std::printf("scenes %zu  one-step mse %.6g  final mse %.6g  (constant velocity %.6g)\n", r.scenes,
              r.one_step_mse, r.curves.mse.back(), r.baseline.mse.back());
  if (r.relations) std::printf("relation f1 %.4f\n", r.relations->f1());
}

int run_gen(const GenArgs& a, bool charged) {
  json c = section(load_config(a.config), charged ? "charged" : "synthetic");
  override(c, "nodes", a.nodes);
  override(c, "steps", a.steps);
  if (!charged) override(c, "push", a.push);
  const DatasetBundle b = charged ? gen_charged(ChargedConfig::from_json(c), a.scenes, a.seed, a.split)
                                  : gen_synthetic(SyntheticConfig::from_json(c), a.scenes, a.seed, a.split);
  write_dataset(b, a.out);
  std::printf("wrote %zu %s scenes to %s\n", b.meta.scenes, b.meta.kind.c_str(), a.out.c_str());
  return 0;
}

int run_train(const TrainArgs& a) {
  const json cfg = load_config(a.config);
  ModelConfig mc = ModelConfig::from_json(model_json(cfg, a));
  mc.dim = read_dataset_meta(a.data).dim;
  const TrainConfig tc = TrainConfig::from_json(train_json(cfg, a));
  const TrainResult r = train_to_checkpoint(a.data, mc, tc, a.out, a.loss_log, [](const LossRecord& rec) {
    if (rec.batch == 0) std::printf("epoch %zu  loss %.6g  nll %.6g  kl %.6g\n", rec.epoch, rec.loss, rec.nll, rec.kl);
    std::fflush(stdout);
  });
  std::printf("trained in %.1f s, checkpoint %s\n", r.seconds, a.out.c_str());
  return 0;
}

int run_eval(const EvalArgs& a) {
  const EvalOptions opts = eval_from_json(eval_json(load_config(a.config), a));
  auto [model, meta] = load_model(a.checkpoint);
  const NormSpec norm = NormSpec::from_json(meta.at("norm"));
  const DatasetBundle data = select(read_dataset(a.data), a.indices);
  report(evaluate_model(model, norm, data, opts), a.csv, a.summary);
  return 0;
}

int run_subset(const std::string& data_dir, std::size_t observed, std::size_t horizon, double threshold,
               const std::string& out, const std::string& write_dir) {
  const DatasetBundle data = read_dataset(data_dir);
  const std::vector<std::size_t> idx = interactive_subset(data, observed, horizon, threshold);
  write_json(out, {{"dataset", data_dir},
                   {"observed_len", observed},
                   {"horizon", horizon},
                   {"threshold", threshold},
                   {"indices", idx}});
  if (!write_dir.empty()) write_dataset(data.subset(idx), write_dir);
  std::printf("%zu of %zu scenes exceed constant-velocity error %.3g\n", idx.size(), data.meta.scenes, threshold);
  return 0;
}

int run_props(std::vector<std::string> suites, std::uint64_t seed, const std::string& out) {
  if (suites.empty()) suites = suite_names();
  json all = json::array();
  bool ok = true;
  for (const auto& name : suites) {
    const SuiteReport r = run_suite(name, seed);
    std::printf("[%s] %s\n%s", r.passed() ? "PASS" : "FAIL", r.name.c_str(), r.summary().c_str());
    std::fflush(stdout);
    ok = ok && r.passed();
    all.push_back(r.to_json());
  }
  write_json(out, {{"seed", seed}, {"passed", ok}, {"suites", all}});
  return ok ? 0 : 1;
}

int run_ablate(const std::string& config, const std::string& train_dir, const std::string& test_dir,
               std::vector<std::string> frames, std::vector<std::string> filters, std::vector<std::string> norms,
               const std::string& out_dir) {
  const json cfg = load_config(config);
  const DatasetBundle train = read_dataset(train_dir);
  const DatasetBundle test = read_dataset(test_dir);
  const EvalOptions opts = eval_from_json(section(cfg, "eval"));
  if (frames.empty()) frames = {"roto_translated", "translated_only", "global"};
  if (filters.empty()) filters = {"anisotropic"};
  if (norms.empty()) norms = {"speed"};
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "ablation.csv");
  csv << "frame,filters,norm,one_step_mse,final_mse,baseline_final_mse,f1\n";
  json rows = json::array();
  for (const auto& fr : frames)
    for (const auto& fi : filters)
      for (const auto& no : norms) {
        json m = section(cfg, "model");
        m["frame"] = fr;
        m["filters"] = fi;
        m["dim"] = train.meta.dim;
        json t = section(cfg, "train");
        t["norm"] = no;
        TrainResult r = train_model(train, ModelConfig::from_json(m), TrainConfig::from_json(t));
        const MetricsReport rep = evaluate_model(r.model, r.norm, test, opts);
        const double f1 = rep.relations ? rep.relations->f1() : -1.0;
        std::printf("%s/%s/%s  final mse %.6g  f1 %.4f\n", fr.c_str(), fi.c_str(), no.c_str(),
                    rep.curves.mse.back(), f1);
        std::fflush(stdout);
        csv << fr << "," << fi << "," << no << "," << rep.one_step_mse << "," << rep.curves.mse.back() << ","
            << rep.baseline.mse.back() << "," << f1 << "\n";
        rep.write_csv(fs::path(out_dir) / (fr + "_" + fi + "_" + no + ".csv"));
        json row = rep.to_json();
        row["frame"] = fr;
        row["filters"] = fi;
        row["norm"] = no;
        rows.push_back(row);
      }
  write_json(fs::path(out_dir) / "ablation.json", rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local-frame relational inference for geometric graphs"};
  app.require_subcommand(1);

  GenArgs synth, charged;
  for (auto [name, args] : {std::pair{"gen-synth", &synth}, std::pair{"gen-charged", &charged}}) {
    auto* c = app.add_subcommand(name, std::string("generate a ") +
                                           (args == &synth ? "synthetic pushed-particle" : "charged-particle") +
                                           " dataset");
    c->add_option("--config", args->config, "JSON config file");
    c->add_option("--out", args->out, "output dataset directory")->required();
    c->add_option("--scenes", args->scenes, "number of scenes");
    c->add_option("--seed", args->seed, "generator seed");
    c->add_option("--split", args->split, "split label stored in the metadata");
    c->add_option("--nodes", args->nodes);
    c->add_option("--steps", args->steps);
    if (args == &synth) c->add_option("--push", args->push, "push acceleration");
  }

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--config", ta.config, "JSON config file");
  train->add_option("--data", ta.data, "training dataset directory")->required();
  train->add_option("--out", ta.out, "checkpoint path")->required();
  train->add_option("--loss-log", ta.loss_log, "CSV loss log");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch", ta.batch);
  train->add_option("--lr", ta.lr);
  train->add_option("--seed", ta.seed);
  train->add_option("--hidden", ta.hidden);
  train->add_option("--filter-hidden", ta.filter_hidden);
  train->add_option("--decoder", ta.decoder)->check(CLI::IsMember({"markovian", "recurrent"}));
  train->add_option("--frame", ta.frame)->check(CLI::IsMember({"roto_translated", "translated_only", "global"}));
  train->add_option("--filters", ta.filters)->check(CLI::IsMember({"anisotropic", "isotropic"}));
  train->add_option("--norm", ta.norm)->check(CLI::IsMember({"none", "speed", "minmax"}));

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--config", ea.config, "JSON config file");
  eval->add_option("--checkpoint", ea.checkpoint)->required();
  eval->add_option("--data", ea.data, "test dataset directory")->required();
  eval->add_option("--indices", ea.indices, "JSON file from the subset command");
  eval->add_option("--csv", ea.csv, "per-step error curve CSV");
  eval->add_option("--summary", ea.summary, "JSON summary");
  eval->add_option("--observed", ea.observed);
  eval->add_option("--horizon", ea.horizon);
  eval->add_option("--seed", ea.seed);

  std::string sub_data, sub_out, sub_write;
  std::size_t sub_obs = 25, sub_h = 25;
  double sub_thr = 1.5;
  auto* subset = app.add_subcommand("subset", "select scenes where constant velocity fails");
  subset->add_option("--data", sub_data)->required();
  subset->add_option("--out", sub_out, "JSON index file")->required();
  subset->add_option("--write", sub_write, "also write the subset as a dataset directory");
  subset->add_option("--observed", sub_obs);
  subset->add_option("--horizon", sub_h);
  subset->add_option("--threshold", sub_thr);

  std::vector<std::string> suites;
  std::uint64_t props_seed = 0;
  std::string props_out;
  auto* props = app.add_subcommand("check-props", "run the property suites");
  props->add_option("--suite", suites, "suite names (default: all)")->check(CLI::IsMember(suite_names()));
  props->add_option("--seed", props_seed);
  props->add_option("--out", props_out, "JSON report");

  std::string ab_config, ab_train, ab_test, ab_out = "ablation";
  std::vector<std::string> ab_frames, ab_filters, ab_norms;
  auto* ablate = app.add_subcommand("ablate", "train and evaluate a frame/filter/normalization grid");
  ablate->add_option("--config", ab_config);
  ablate->add_option("--train", ab_train)->required();
  ablate->add_option("--test", ab_test)->required();
  ablate->add_option("--frames", ab_frames)->check(CLI::IsMember({"roto_translated", "translated_only", "global"}));
  ablate->add_option("--filters", ab_filters)->check(CLI::IsMember({"anisotropic", "isotropic"}));
  ablate->add_option("--norms", ab_norms)->check(CLI::IsMember({"none", "speed", "minmax"}));
  ablate->add_option("--out", ab_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-synth")) return run_gen(synth, false);
    if (app.got_subcommand("gen-charged")) return run_gen(charged, true);
    if (*train) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*subset) return run_subset(sub_data, sub_obs, sub_h, sub_thr, sub_out, sub_write);
    if (*props) return run_props(suites, props_seed, props_out);
    if (*ablate) return run_ablate(ab_config, ab_train, ab_test, ab_frames, ab_filters, ab_norms, ab_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
