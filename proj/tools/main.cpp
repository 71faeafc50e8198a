// Copyright 2026 The spanlat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// spanlat command line. Subcommands:
//   train-recon     fit subspaces so every node ranks its ancestors first
//   train-linkpred  fit on a partial closure split, calibrate an F1 threshold
//   eval            score an existing checkpoint against a dataset
//   query           rank stored concepts against a boolean concept query
//   export          dump per-node summary rows from a checkpoint
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime error.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spanlat/lattice.hpp"
#include "spanlat/metrics.hpp"
#include "spanlat/projector.hpp"
#include "spanlat/taxonomy.hpp"
#include "spanlat/training.hpp"

namespace {

using nlohmann::ordered_json;
using namespace spanlat;

/// Everything a run needs, serializable so the output directory always holds
/// the exact resolved settings. File values load first, flags override.
struct RunConfig {
  std::string dataset;
  std::string output;
  std::string loss;  // "infonce" (reconstruction) or "margin" (link pred)
  int d = 16;
  int n = 16;
  double lambda = 0.2;
  double init_std = 1e-4;
  double temperature = 1.0;
  double gamma_pos = 0.9;
  double gamma_neg = 0.1;
  double lr = 5e-4;
  double lr_decay = 1.0;
  double clip_norm = 10.0;
  int batch_size = 128;
  int negatives = 19;
  int eval_negatives = 10;
  int max_epochs = 400;
  int eval_every = 5;
  int patience = 10;
  std::uint64_t seed = 0;
  std::vector<double> coverage = {0.0};  // >1 entry runs the whole grid
  double val_frac = 0.05;
  double test_frac = 0.1;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["dataset"] = c.dataset;
  j["output"] = c.output;
  j["loss"] = c.loss;
  j["d"] = c.d;
  j["n"] = c.n;
  j["lambda"] = c.lambda;
  j["init_std"] = c.init_std;
  j["temperature"] = c.temperature;
  j["gamma_pos"] = c.gamma_pos;
  j["gamma_neg"] = c.gamma_neg;
  j["lr"] = c.lr;
  j["lr_decay"] = c.lr_decay;
  j["clip_norm"] = c.clip_norm;
  j["batch_size"] = c.batch_size;
  j["negatives"] = c.negatives;
  j["eval_negatives"] = c.eval_negatives;
  j["max_epochs"] = c.max_epochs;
  j["eval_every"] = c.eval_every;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["coverage"] = c.coverage;
  j["val_frac"] = c.val_frac;
  j["test_frac"] = c.test_frac;
  return j;
}

/// Applies the keys present in `j` onto `c`. Unknown keys are config errors
/// so typos never silently fall back to defaults.
void merge_json(RunConfig& c, const ordered_json& j) {
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "dataset") c.dataset = value.get<std::string>();
      else if (key == "output") c.output = value.get<std::string>();
      else if (key == "loss") c.loss = value.get<std::string>();
      else if (key == "d") c.d = value.get<int>();
      else if (key == "n") c.n = value.get<int>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "init_std") c.init_std = value.get<double>();
      else if (key == "temperature") c.temperature = value.get<double>();
      else if (key == "gamma_pos") c.gamma_pos = value.get<double>();
      else if (key == "gamma_neg") c.gamma_neg = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "lr_decay") c.lr_decay = value.get<double>();
      else if (key == "clip_norm") c.clip_norm = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "negatives") c.negatives = value.get<int>();
      else if (key == "eval_negatives") c.eval_negatives = value.get<int>();
      else if (key == "max_epochs") c.max_epochs = value.get<int>();
      else if (key == "eval_every") c.eval_every = value.get<int>();
      else if (key == "patience") c.patience = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "coverage") c.coverage = value.get<std::vector<double>>();
      else if (key == "val_frac") c.val_frac = value.get<double>();
      else if (key == "test_frac") c.test_frac = value.get<double>();
      else throw ConfigError("unknown config key \"" + key + "\"");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key \"" + key + "\": " + e.what());
    }
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + ": expected a JSON object");
  RunConfig c;
  merge_json(c, j);
  return c;
}

void validate(const RunConfig& c, bool linkpred) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.dataset.empty()) fail("dataset path is required");
  if (c.output.empty()) fail("output directory is required");
  if (c.d < 1) fail("d must be at least 1");
  if (c.n < 1) fail("n must be at least 1");
  if (c.n > c.d) fail("n must not exceed d");
  if (!(c.lambda > 0.0)) fail("lambda must be positive");
  if (!(c.init_std > 0.0)) fail("init_std must be positive");
  if (!(c.temperature > 0.0)) fail("temperature must be positive");
  if (!(c.gamma_neg >= 0.0 && c.gamma_neg < c.gamma_pos && c.gamma_pos <= 1.0))
    fail("margins need 0 <= gamma_neg < gamma_pos <= 1");
  if (!(c.lr > 0.0)) fail("lr must be positive");
  if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) fail("lr_decay must lie in (0, 1]");
  if (c.clip_norm < 0.0) fail("clip_norm must be nonnegative (0 disables)");
  if (c.batch_size < 1) fail("batch_size must be at least 1");
  if (c.negatives < 1) fail("negatives must be at least 1");
  if (c.eval_negatives < 1) fail("eval_negatives must be at least 1");
  if (c.max_epochs < 1) fail("max_epochs must be at least 1");
  if (c.eval_every < 1) fail("eval_every must be at least 1");
  if (c.patience < 1) fail("patience must be at least 1");
  if (c.loss != "infonce" && c.loss != "margin")
    fail("loss must be \"infonce\" or \"margin\"");
  if (linkpred) {
    if (c.coverage.empty()) fail("coverage needs at least one value");
    for (double cov : c.coverage)
      if (!(cov >= 0.0 && cov <= 1.0)) fail("coverage values must lie in [0, 1]");
    if (!(c.val_frac >= 0.0 && c.val_frac <= 1.0)) fail("val_frac must lie in [0, 1]");
    if (!(c.test_frac >= 0.0 && c.test_frac <= 1.0)) fail("test_frac must lie in [0, 1]");
    double worst = *std::max_element(c.coverage.begin(), c.coverage.end());
    if (c.val_frac + c.test_frac + worst > 1.0 + 1e-12)
      fail("val_frac + test_frac + coverage must not exceed 1");
  }
}

TrainConfig to_train_config(const RunConfig& c) {
  TrainConfig t;
  t.d = c.d;
  t.n = c.n;
  t.lambda = c.lambda;
  t.init_std = c.init_std;
  t.temperature = c.temperature;
  t.gamma_pos = c.gamma_pos;
  t.gamma_neg = c.gamma_neg;
  t.batch_size = c.batch_size;
  t.negatives = c.negatives;
  t.eval_negatives = c.eval_negatives;
  t.max_epochs = c.max_epochs;
  t.eval_every = c.eval_every;
  t.patience = c.patience;
  t.seed = c.seed;
  t.adam.lr = c.lr;
  t.adam.lr_decay = c.lr_decay;
  t.adam.clip_norm = c.clip_norm;
  return t;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_config(const std::filesystem::path& dir, const RunConfig& c) {
  write_text(dir / "resolved_config.json", to_json(c).dump(2) + "\n");
}

std::string fmt(double x) {
  std::ostringstream out;
  out << std::setprecision(12) << x;
  return out.str();
}

/// Tab-separated rows to a file, space-aligned columns to the console.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string tsv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i)
      out << header[i] << (i + 1 < header.size() ? '\t' : '\n');
    for (const auto& row : rows)
      for (std::size_t i = 0; i < row.size(); ++i)
        out << row[i] << (i + 1 < row.size() ? '\t' : '\n');
    return out.str();
  }

  void print(std::ostream& out) const {
    std::vector<std::size_t> width(header.size(), 0);
    auto widen = [&](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i)
        width[i] = std::max(width[i], row[i].size());
    };
    widen(header);
    for (const auto& row : rows) widen(row);
    auto line = [&](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i)
        out << std::left << std::setw(static_cast<int>(width[i]) + 2) << row[i];
      out << "\n";
    };
    line(header);
    for (const auto& row : rows) line(row);
  }
};

Taxonomy load_closed(const std::string& path) {
  return transitive_closure(load_edges(path));
}

int run_train_recon(const RunConfig& cfg) {
  Taxonomy t = load_closed(cfg.dataset);
  std::filesystem::create_directories(cfg.output);
  write_config(cfg.output, cfg);
  TrainResult result = train_reconstruction(t, to_train_config(cfg));
  save_checkpoint(result.table, (std::filesystem::path(cfg.output) / "checkpoint.bin").string());
  write_text(std::filesystem::path(cfg.output) / "metrics.tsv", result.log);
  ReconEval eval = evaluate_reconstruction(result.table, t);
  Table summary{{"metric", "value"},
                {{"map", fmt(eval.ranking.map)},
                 {"mean_rank", fmt(eval.ranking.mean_rank)},
                 {"rho_vs_descendants", fmt(eval.dims.rho_vs_descendants)},
                 {"rho_vs_rank", fmt(eval.dims.rho_vs_rank)},
                 {"stop", result.stop_reason}}};
  summary.print(std::cout);
  return 0;
}

/// One coverage value: returns the calibrated threshold report.
ThresholdF1 linkpred_once(const Taxonomy& t, const RunConfig& cfg,
                          const std::filesystem::path& dir, double coverage) {
  std::filesystem::create_directories(dir);
  RunConfig resolved = cfg;
  resolved.coverage = {coverage};
  resolved.output = dir.string();
  write_config(dir, resolved);
  LinkPredSplit split =
      make_linkpred_split(t, coverage, cfg.val_frac, cfg.test_frac, cfg.seed);
  save_split_manifest(split, t, (dir / "split_manifest.tsv").string());
  TrainResult result = train_linkpred(t, split, to_train_config(cfg));
  save_checkpoint(result.table, (dir / "checkpoint.bin").string());
  write_text(dir / "metrics.tsv", result.log);
  LinkPredEval eval = evaluate_linkpred(result.table, t, split, cfg.eval_negatives,
                                        cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  return eval.f1;
}

int run_train_linkpred(const RunConfig& cfg) {
  Taxonomy t = load_closed(cfg.dataset);
  std::filesystem::path out(cfg.output);
  Table summary{{"coverage", "threshold", "val_f1", "test_f1"}, {}};
  if (cfg.coverage.size() == 1) {
    ThresholdF1 f1 = linkpred_once(t, cfg, out, cfg.coverage[0]);
    summary.rows.push_back({fmt(cfg.coverage[0]), fmt(f1.threshold), fmt(f1.val_f1),
                            fmt(f1.test_f1)});
  } else {
    std::filesystem::create_directories(out);
    write_config(out, cfg);
    for (double cov : cfg.coverage) {
      std::ostringstream leaf;
      leaf << "coverage_" << std::fixed << std::setprecision(2) << cov;
      ThresholdF1 f1 = linkpred_once(t, cfg, out / leaf.str(), cov);
      summary.rows.push_back({fmt(cov), fmt(f1.threshold), fmt(f1.val_f1), fmt(f1.test_f1)});
    }
    write_text(out / "coverage_summary.tsv", summary.tsv());
  }
  summary.print(std::cout);
  return 0;
}

/// Shared by eval/query/export: reject explicit --d/--n that contradict the
/// checkpoint instead of silently trusting one side.
void check_shape(const EmbeddingTable& table, int d, int n) {
  if (d != 0 && d != table.ambient_dim())
    throw ConfigError("checkpoint has d=" + std::to_string(table.ambient_dim()) +
                      " but --d says " + std::to_string(d));
  if (n != 0 && n != table.num_vectors())
    throw ConfigError("checkpoint has n=" + std::to_string(table.num_vectors()) +
                      " but --n says " + std::to_string(n));
}

int run_eval(const std::string& checkpoint, const std::string& dataset,
             const std::string& mode, const std::string& manifest,
             const std::string& output, int d, int n, int eval_negatives,
             std::uint64_t seed) {
  EmbeddingTable table = load_checkpoint(checkpoint);
  check_shape(table, d, n);
  Taxonomy t = load_closed(dataset);
  std::filesystem::path out(output);
  std::filesystem::create_directories(out);
  if (mode == "recon") {
    ReconEval eval = evaluate_reconstruction(table, t);
    Table summary{{"metric", "value"},
                  {{"map", fmt(eval.ranking.map)},
                   {"mean_rank", fmt(eval.ranking.mean_rank)},
                   {"rho_vs_descendants", fmt(eval.dims.rho_vs_descendants)},
                   {"rho_vs_rank", fmt(eval.dims.rho_vs_rank)},
                   {"edges_ranked", std::to_string(eval.ranking.edges.size())}}};
    Table ranking{{"child", "parent", "rank"}, {}};
    for (std::size_t i = 0; i < eval.ranking.edges.size(); ++i)
      ranking.rows.push_back({t.name_of(eval.ranking.edges[i].child),
                              t.name_of(eval.ranking.edges[i].parent),
                              fmt(eval.ranking.ranks[i])});
    Table dims{{"node", "effective_dim", "descendants", "rank"}, {}};
    for (const DimensionRow& row : eval.dims.rows)
      dims.rows.push_back({row.name, fmt(row.effective_dim),
                           std::to_string(row.descendants), std::to_string(row.rank)});
    write_text(out / "summary.tsv", summary.tsv());
    write_text(out / "ranking_report.tsv", ranking.tsv());
    write_text(out / "dimension_report.tsv", dims.tsv());
    summary.print(std::cout);
    return 0;
  }
  if (mode == "linkpred") {
    if (manifest.empty())
      throw ConfigError("--manifest is required in linkpred mode");
    LinkPredSplit split = load_split_manifest(t, manifest);
    LinkPredEval eval = evaluate_linkpred(table, t, split, eval_negatives, seed);
    Table summary{{"threshold", "val_f1", "test_f1"},
                  {{fmt(eval.f1.threshold), fmt(eval.f1.val_f1), fmt(eval.f1.test_f1)}}};
    Table scores{{"split", "score", "label"}, {}};
    for (const LabeledScore& s : eval.val_scores)
      scores.rows.push_back({"val", fmt(s.score), s.label ? "1" : "0"});
    for (const LabeledScore& s : eval.test_scores)
      scores.rows.push_back({"test", fmt(s.score), s.label ? "1" : "0"});
    write_text(out / "threshold_report.tsv", summary.tsv());
    write_text(out / "score_report.tsv", scores.tsv());
    summary.print(std::cout);
    return 0;
  }
  throw ConfigError("mode must be \"recon\" or \"linkpred\"");
}

int run_query(const std::string& checkpoint, const std::string& query_text, int k,
              const std::string& direction, const std::string& projector_kind) {
  EmbeddingTable table = load_checkpoint(checkpoint);
  ConceptStore store;
  for (NodeId id = 0; id < table.num_nodes(); ++id) {
    if (projector_kind == "soft") {
      store.add(table.names[id], table.soft(id));
    } else {
      store.add(table.names[id], hard_projector(SpanMatrix(table.params[id])));
    }
  }
  QueryPtr q;
  try {
    q = parse_query(query_text);
  } catch (const ParseError& e) {
    std::cerr << "query parse error at offset " << e.offset() << ": " << e.what() << "\n";
    return 1;
  }
  RankDirection dir = direction == "candidate" ? RankDirection::kCandidateAsConditioned
                                               : RankDirection::kQueryAsConditioned;
  std::vector<RankedConcept> ranked = rank_by_query(*q, store, k, dir);
  std::cout << "# query: " << print_query(*q) << "\n";
  for (std::size_t i = 0; i < ranked.size(); ++i)
    std::cout << (i + 1) << "\t" << ranked[i].name << "\t" << fmt(ranked[i].score) << "\n";
  return 0;
}

int run_export(const std::string& checkpoint, const std::string& output) {
  EmbeddingTable table = load_checkpoint(checkpoint);
  std::vector<double> dims = effective_dims(table);
  std::ostringstream out;
  out << "# d=" << table.ambient_dim() << " n=" << table.num_vectors()
      << " lambda=" << fmt(table.reg.lambda_diag[0]) << " nodes=" << table.num_nodes()
      << " seed=" << table.seed << " step=" << table.step << "\n";
  Table rows{{"node", "effective_dim", "span_frobenius"}, {}};
  for (NodeId id = 0; id < table.num_nodes(); ++id)
    rows.rows.push_back({table.names[id], fmt(dims[id]), fmt(frobenius_norm(table.params[id]))});
  out << rows.tsv();
  if (output.empty() || output == "-") {
    std::cout << out.str();
  } else {
    write_text(output, out.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subspace concept embeddings: train, evaluate, and query"};
  app.require_subcommand(1);

  RunConfig flags;   // values as given on the command line
  std::string config_path;

  // Options shared by both training subcommands, registered per subcommand so
  // help screens stay scoped. Returns the list of flag names to merge.
  auto add_train_options = [&](CLI::App* sub, bool linkpred) {
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    sub->add_option("--dataset", flags.dataset, "edge list file (child<TAB>parent)");
    sub->add_option("--output", flags.output, "run directory for artifacts");
    sub->add_option("--loss", flags.loss, "loss name, fixed per subcommand");
    sub->add_option("--d", flags.d, "ambient dimension");
    sub->add_option("--n", flags.n, "vectors per concept span");
    sub->add_option("--lambda", flags.lambda, "soft projector ridge");
    sub->add_option("--init-std", flags.init_std, "Gaussian init scale");
    sub->add_option("--lr", flags.lr, "Adam learning rate");
    sub->add_option("--lr-decay", flags.lr_decay, "per-epoch learning-rate factor");
    sub->add_option("--clip-norm", flags.clip_norm, "global gradient-norm clip, 0 disables");
    sub->add_option("--batch-size", flags.batch_size, "positive edges per step");
    sub->add_option("--negatives", flags.negatives, "negatives per positive edge");
    sub->add_option("--max-epochs", flags.max_epochs, "epoch cap");
    sub->add_option("--eval-every", flags.eval_every, "epochs between metric snapshots");
    sub->add_option("--patience", flags.patience, "stale snapshots before stopping");
    sub->add_option("--seed", flags.seed, "RNG seed for init, sampling, and splits");
    if (linkpred) {
      sub->add_option("--gamma-pos", flags.gamma_pos, "margin for positive scores");
      sub->add_option("--gamma-neg", flags.gamma_neg, "margin for negative scores");
      sub->add_option("--eval-negatives", flags.eval_negatives,
                      "corruptions per edge when calibrating F1");
      sub->add_option("--coverage", flags.coverage,
                      "fraction(s) of non-basic closure edges added to training; "
                      "a comma-separated list runs the whole grid")
          ->delimiter(',');
      sub->add_option("--val-frac", flags.val_frac, "validation fraction of non-basic edges");
      sub->add_option("--test-frac", flags.test_frac, "test fraction of non-basic edges");
    } else {
      sub->add_option("--temperature", flags.temperature, "softmax temperature");
    }
  };

  CLI::App* recon = app.add_subcommand(
      "train-recon", "fit subspaces to reconstruct a full taxonomy closure");
  add_train_options(recon, false);
  CLI::App* linkpred = app.add_subcommand(
      "train-linkpred", "fit on a partial closure and calibrate an F1 threshold");
  add_train_options(linkpred, true);

  std::string checkpoint, dataset, mode, manifest, output, query_text;
  std::string direction = "query";
  std::string projector_kind = "soft";
  int k = 5;
  int eval_d = 0, eval_n = 0, eval_negatives = 10;
  std::uint64_t eval_seed = 0;

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint against a dataset");
  eval->add_option("--checkpoint", checkpoint, "trained table file")->required();
  eval->add_option("--dataset", dataset, "edge list file")->required();
  eval->add_option("--mode", mode, "recon or linkpred")->required();
  eval->add_option("--manifest", manifest, "split manifest (linkpred mode)");
  eval->add_option("--output", output, "report directory")->required();
  eval->add_option("--d", eval_d, "expected ambient dimension, 0 skips the check");
  eval->add_option("--n", eval_n, "expected vectors per span, 0 skips the check");
  eval->add_option("--eval-negatives", eval_negatives, "corruptions per edge (linkpred)");
  eval->add_option("--seed", eval_seed, "seed for corruption sampling (linkpred)");

  CLI::App* query = app.add_subcommand("query", "rank concepts against a boolean query");
  query->add_option("--checkpoint", checkpoint, "trained table file")->required();
  query->add_option("--query", query_text, "e.g. '\"dog\" OR (cat AND NOT bird)'")->required();
  query->add_option("-k,--top", k, "results to print");
  query->add_option("--direction", direction,
                    "which side conditions the score: query or candidate")
      ->check(CLI::IsMember({"query", "candidate"}));
  query->add_option("--projector", projector_kind, "soft or hard concept projectors")
      ->check(CLI::IsMember({"soft", "hard"}));

  CLI::App* exp = app.add_subcommand("export", "per-node summary table from a checkpoint");
  exp->add_option("--checkpoint", checkpoint, "trained table file")->required();
  exp->add_option("--output", output, "TSV path, - or empty for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (recon->parsed() || linkpred->parsed()) {
      CLI::App* sub = recon->parsed() ? recon : linkpred;
      RunConfig cfg;
      cfg.loss = recon->parsed() ? "infonce" : "margin";
      if (!config_path.empty()) {
        RunConfig file_cfg;
        file_cfg.loss = cfg.loss;
        ordered_json j;
        {
          std::ifstream in(config_path);
          if (!in) throw ConfigError("cannot open config file " + config_path);
          try {
            in >> j;
          } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config file " + config_path + ": " + e.what());
          }
        }
        if (!j.is_object())
          throw ConfigError("config file " + config_path + ": expected a JSON object");
        merge_json(file_cfg, j);
        cfg = file_cfg;
      }
      auto used = [&](const std::string& name) { return sub->count(name) > 0; };
      if (used("--dataset")) cfg.dataset = flags.dataset;
      if (used("--output")) cfg.output = flags.output;
      if (used("--loss")) cfg.loss = flags.loss;
      if (used("--d")) cfg.d = flags.d;
      if (used("--n")) cfg.n = flags.n;
      if (used("--lambda")) cfg.lambda = flags.lambda;
      if (used("--init-std")) cfg.init_std = flags.init_std;
      if (used("--lr")) cfg.lr = flags.lr;
      if (used("--lr-decay")) cfg.lr_decay = flags.lr_decay;
      if (used("--clip-norm")) cfg.clip_norm = flags.clip_norm;
      if (used("--batch-size")) cfg.batch_size = flags.batch_size;
      if (used("--negatives")) cfg.negatives = flags.negatives;
      if (used("--max-epochs")) cfg.max_epochs = flags.max_epochs;
      if (used("--eval-every")) cfg.eval_every = flags.eval_every;
      if (used("--patience")) cfg.patience = flags.patience;
      if (used("--seed")) cfg.seed = flags.seed;
      if (linkpred->parsed()) {
        if (used("--gamma-pos")) cfg.gamma_pos = flags.gamma_pos;
        if (used("--gamma-neg")) cfg.gamma_neg = flags.gamma_neg;
        if (used("--eval-negatives")) cfg.eval_negatives = flags.eval_negatives;
        if (used("--coverage")) cfg.coverage = flags.coverage;
        if (used("--val-frac")) cfg.val_frac = flags.val_frac;
        if (used("--test-frac")) cfg.test_frac = flags.test_frac;
      } else if (used("--temperature")) {
        cfg.temperature = flags.temperature;
      }
      const bool is_linkpred = linkpred->parsed();
      const std::string canonical = is_linkpred ? "margin" : "infonce";
      if (cfg.loss != canonical)
        throw ConfigError((is_linkpred ? std::string("train-linkpred")
                                       : std::string("train-recon")) +
                          " uses the " + canonical + " loss; got \"" + cfg.loss + "\"");
      validate(cfg, is_linkpred);
      return is_linkpred ? run_train_linkpred(cfg) : run_train_recon(cfg);
    }
    if (eval->parsed())
      return run_eval(checkpoint, dataset, mode, manifest, output, eval_d, eval_n,
                      eval_negatives, eval_seed);
    if (query->parsed())
      return run_query(checkpoint, query_text, k, direction, projector_kind);
    if (exp->parsed()) return run_export(checkpoint, output);
    return 1;  // unreachable: require_subcommand
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
