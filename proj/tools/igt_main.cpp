// igt: command-line front end for ingestion, subgraph inspection, training,
// evaluation and diagnostics.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "igt/config.hpp"
#include "igt/errors.hpp"
#include "igt/log.hpp"
#include "igt/positions.hpp"
#include "igt/toy.hpp"
#include "igt/workspace.hpp"

namespace {

using namespace igt;

struct DataOptions {
  std::string path;
  bool toy = false;

  void add_to(CLI::App* cmd) {
    auto* d = cmd->add_option("-d,--data", path,
                              "dataset directory (train.txt, valid.txt, test.txt) or IGTKG1 file");
    auto* t = cmd->add_flag("--toy", toy, "use the built-in synthetic toy graph");
    d->excludes(t);
  }

  Workspace open() const {
    if (toy) return make_workspace(make_toy_dataset());
    if (path.empty()) throw ConfigError("one of --data or --toy is required");
    return open_workspace(path);
  }
};

struct ConfigOptions {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> epochs;

  void add_to(CLI::App* cmd, bool with_epochs) {
    cmd->add_option("-c,--config", file, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "config override key=value (repeatable)");
    cmd->add_option("--seed", seed, "random seed (overrides config and IGT_SEED)");
    if (with_epochs) cmd->add_option("--epochs", epochs, "training epochs");
  }

  // Precedence: config file < --set < IGT_SEED < explicit flags.
  TrainConfig resolve(TrainConfig base = {}) const {
    if (!file.empty()) load_config_file(base, file);
    apply_overrides(base, sets);
    apply_environment(base);
    if (seed) apply_setting(base, "seed", std::to_string(*seed));
    if (epochs) base.epochs = *epochs;
    base.validate();
    return base;
  }
};

struct SamplerOptions {
  std::optional<std::uint32_t> radius, m_hr, m_h, m_r;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--radius", radius, "sampling radius l");
    cmd->add_option("--m-hr", m_hr, "T_hr budget");
    cmd->add_option("--m-h", m_h, "T_h budget");
    cmd->add_option("--m-r", m_r, "T_r budget");
  }

  SamplerConfig apply(SamplerConfig c) const {
    if (radius) c.radius = *radius;
    if (m_hr) c.m_hr = *m_hr;
    if (m_h) c.m_h = *m_h;
    if (m_r) c.m_r = *m_r;
    c.validate();
    return c;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

std::string config_sidecar(const std::string& checkpoint) { return checkpoint + ".config"; }

// ---------------------------------------------------------------- ingest

struct IngestCmd {
  DataOptions data;
  std::string out;

  void run() const {
    const Workspace ws = data.open();
    std::printf("entities   %zu\n", ws.data.entities.size());
    std::printf("relations  %zu\n", ws.data.relations.size());
    std::printf("train      %zu\n", ws.data.train.size());
    std::printf("valid      %zu\n", ws.data.valid.size());
    std::printf("test       %zu\n", ws.data.test.size());
    std::printf("train graph (doubled) %zu triples, %zu duplicates dropped\n",
                ws.graph.triple_count(), ws.graph.duplicates_dropped());
    if (!out.empty()) {
      save_dataset(out, ws.data);
      std::printf("wrote %s\n", out.c_str());
    }
  }
};

// ---------------------------------------------------------------- sample / inspect

struct SampleCmd {
  DataOptions data;
  SamplerOptions sampler;
  std::string head, relation, gold;
  std::uint64_t seed = 0;
  bool grids = false;

  void run() const {
    const Workspace ws = data.open();
    const auto h = ws.graph.entity_by_name(head);
    const auto r = ws.graph.relation_by_name(relation);
    std::optional<EntityId> g;
    if (!gold.empty()) g = ws.graph.entity_by_name(gold);
    SamplerConfig cfg = sampler.apply({});
    cfg.seed = seed;
    Rng rng(derive_seed(seed, {h.index, r.flat()}));
    const Subgraph sg = extract_subgraph(ws.graph, h, r, g, cfg, rng);
    std::cout << format_subgraph(sg, ws.graph);
    if (!grids) return;
    std::cout << "\nTOKENS:";
    for (const auto& t : sg.tokens) {
      switch (t.kind) {
        case TokenKind::Entity: std::cout << '\t' << ws.graph.entity_name(EntityId{t.id}); break;
        case TokenKind::Relation:
          std::cout << '\t' << ws.graph.relation_name(RelationId::from_flat(t.id));
          break;
        case TokenKind::Mask: std::cout << "\t[MASK]"; break;
      }
    }
    const auto p = build_distance_matrix(sg);
    const auto d = build_distinction_matrix(sg, p);
    std::cout << "\n\nP:\n" << format_grid(p) << "\nD:\n" << format_grid(d);
    const auto b = bucketize(p, BucketMap{});
    std::cout << "\nbeyond bucket range: " << b.beyond_range_count << '\n';
  }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
  DataOptions data;
  ConfigOptions config;
  std::string out, log, provider_cache;
  bool quiet = false;

  void run() const {
    // The toy graph gets the small model it was tuned with.
    const TrainConfig cfg = config.resolve(data.toy ? toy_train_config() : TrainConfig{});
    const Workspace ws = data.open();
    auto model = build_model(cfg, ws, provider_cache);
    std::ofstream log_stream;
    TrainHooks hooks;
    if (!log.empty()) {
      log_stream.open(log);
      if (!log_stream) throw ConfigError("cannot write " + log);
      hooks.step_log = &log_stream;
    }
    hooks.checkpoint = out;
    write_file(config_sidecar(out), format_config(cfg));
    const auto start = std::chrono::steady_clock::now();
    hooks.on_epoch = [&](const EpochRecord& e) {
      if (quiet) return;
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("epoch %4u  loss %.4f", e.epoch, e.mean_loss);
      if (e.valid) {
        std::printf("  valid MRR %.4f  Hits@1 %.4f  Hits@10 %.4f", e.valid->mrr, e.valid->hits1,
                    e.valid->hits10);
      }
      std::printf("  %.1fs\n", secs);
      std::fflush(stdout);
    };
    const TrainResult r = train(*model, ws.graph, ws.data.valid, ws.filter, cfg, hooks);
    std::printf("%zu steps", r.steps);
    if (r.best_epoch) std::printf(", best valid MRR %.4f at epoch %u", r.best_valid_mrr, *r.best_epoch);
    std::printf("\ncheckpoint %s\n", out.c_str());
  }
};

// ---------------------------------------------------------------- eval

struct EvalCmd {
  DataOptions data;
  std::string checkpoint, split = "test", json, provider_cache;
  std::vector<std::string> sets;
  bool raw = false, rankings = false;
  std::size_t max_triples = 0;
  std::optional<std::uint64_t> seed;

  void run() const {
    TrainConfig cfg;
    load_config_file(cfg, config_sidecar(checkpoint));
    apply_overrides(cfg, sets);
    cfg.validate();
    const Workspace ws = data.open();
    auto model = build_model(cfg, ws, provider_cache);
    load_checkpoint(checkpoint, *model);
    EvalOptions opts;
    opts.filtered = !raw;
    opts.max_triples = max_triples;
    opts.sampler = cfg.sampler;
    opts.seed = derive_seed(seed.value_or(cfg.seed), {0x7e57});
    opts.keep_rankings = rankings;
    const EvalReport rep = evaluate_ranking(*model, ws.graph, ws.split(split), ws.filter, opts, split);
    std::cout << report_text(rep);
    if (!json.empty()) write_file(json, report_json(rep));
  }
};

// ---------------------------------------------------------------- diagnostics

struct DiagnosticsCmd {
  DataOptions data;
  SamplerOptions sampler;
  std::size_t queries = 10000;
  std::uint64_t seed = 0;
  std::string json;

  void run() const {
    const Workspace ws = data.open();
    const SamplerConfig cfg = sampler.apply({});
    const auto start = std::chrono::steady_clock::now();
    const auto d = training_diagnostics(ws.graph, cfg, BucketMap{}, queries, seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%-10s %8s %8s %8s %8s\n", "inputs", "count", "A.IT", "A.IL", "A.BBR");
    std::printf("%-10s %8zu %8.2f %8.2f %8.2f\n", "all", d.overall.inputs, d.overall.a_it,
                d.overall.a_il, d.overall.a_bbr);
    if (d.saturated) {
      std::printf("%-10s %8zu %8.2f %8.2f %8.2f\n", "saturated", d.saturated->inputs,
                  d.saturated->a_it, d.saturated->a_il, d.saturated->a_bbr);
    } else {
      std::printf("%-10s %8d\n", "saturated", 0);
    }
    std::printf("%.1fs\n", secs);
    if (json.empty()) return;
    auto block = [](const Diagnostics& x) {
      return nlohmann::json{{"inputs", x.inputs}, {"a_it", x.a_it}, {"a_il", x.a_il},
                            {"a_bbr", x.a_bbr}};
    };
    nlohmann::json j{{"overall", block(d.overall)}, {"saturated_queries", d.saturated_queries}};
    j["saturated"] = d.saturated ? block(*d.saturated) : nlohmann::json();
    write_file(json, j.dump(2));
  }
};

// ---------------------------------------------------------------- export-report

struct ExportCmd {
  std::string input, out;

  void run() const {
    const EvalReport rep = report_from_json(read_file(input));
    const std::string text = report_text(rep);
    if (out.empty()) {
      std::cout << text;
    } else {
      write_file(out, text);
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgraph-encoder knowledge graph completion toolkit"};
  app.require_subcommand(1);
  bool no_warnings = false;
  app.add_flag("--no-warnings", no_warnings, "suppress sampler warnings");

  IngestCmd ingest;
  auto* c_ingest = app.add_subcommand("ingest", "load a dataset and write an IGTKG1 snapshot");
  ingest.data.add_to(c_ingest);
  c_ingest->add_option("-o,--out", ingest.out, "output IGTKG1 file");

  SampleCmd sample;
  auto* c_sample = app.add_subcommand("sample", "extract and dump one subgraph");
  SampleCmd inspect;
  inspect.grids = true;
  auto* c_inspect = app.add_subcommand("inspect", "dump one subgraph with its P and D matrices");
  for (auto [cmd, s] : {std::pair{c_sample, &sample}, std::pair{c_inspect, &inspect}}) {
    s->data.add_to(cmd);
    s->sampler.add_to(cmd);
    cmd->add_option("--head", s->head, "head entity name")->required();
    cmd->add_option("--relation", s->relation, "relation name (\"inverse of NAME\" allowed)")
        ->required();
    cmd->add_option("--gold", s->gold, "gold tail; enables training-mode exclusions");
    cmd->add_option("--seed", s->seed, "sampling seed");
  }

  TrainCmd train_cmd;
  auto* c_train = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd.data.add_to(c_train);
  train_cmd.config.add_to(c_train, true);
  c_train->add_option("-o,--out", train_cmd.out, "checkpoint path (config saved alongside)")
      ->required();
  c_train->add_option("--log", train_cmd.log, "per-step TSV loss log");
  c_train->add_option("--provider-cache", train_cmd.provider_cache, "IGTEMB1 file for provider=cache");
  c_train->add_flag("-q,--quiet", train_cmd.quiet, "no per-epoch output");

  EvalCmd eval_cmd;
  auto* c_eval = app.add_subcommand("eval", "rank a split with a trained checkpoint");
  eval_cmd.data.add_to(c_eval);
  c_eval->add_option("--checkpoint", eval_cmd.checkpoint, "checkpoint written by train")
      ->required()
      ->check(CLI::ExistingFile);
  c_eval->add_option("--split", eval_cmd.split, "train, valid or test");
  c_eval->add_flag("--raw", eval_cmd.raw, "raw instead of filtered ranking");
  c_eval->add_option("--max-triples", eval_cmd.max_triples, "evaluate only the first N triples");
  c_eval->add_option("--json", eval_cmd.json, "write the JSON report here");
  c_eval->add_flag("--rankings", eval_cmd.rankings, "include per-query ranks in the JSON report");
  c_eval->add_option("--seed", eval_cmd.seed, "evaluation sampling seed");
  c_eval->add_option("--set", eval_cmd.sets, "config override key=value (repeatable)");
  c_eval->add_option("--provider-cache", eval_cmd.provider_cache, "IGTEMB1 file for provider=cache");

  DiagnosticsCmd diag;
  auto* c_diag = app.add_subcommand("diagnostics", "A.IT / A.IL / A.BBR over training inputs");
  diag.data.add_to(c_diag);
  diag.sampler.add_to(c_diag);
  c_diag->add_option("--queries", diag.queries, "training queries to sample (0 = all)");
  c_diag->add_option("--seed", diag.seed, "sampling seed");
  c_diag->add_option("--json", diag.json, "write the diagnostics as JSON");

  ExportCmd export_cmd;
  auto* c_export = app.add_subcommand("export-report", "render a JSON evaluation report as text");
  c_export->add_option("input", export_cmd.input, "JSON report")->required()->check(CLI::ExistingFile);
  c_export->add_option("-o,--out", export_cmd.out, "write the text here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  if (no_warnings) set_warnings_enabled(false);

  try {
    if (c_ingest->parsed()) ingest.run();
    if (c_sample->parsed()) sample.run();
    if (c_inspect->parsed()) inspect.run();
    if (c_train->parsed()) train_cmd.run();
    if (c_eval->parsed()) eval_cmd.run();
    if (c_diag->parsed()) diag.run();
    if (c_export->parsed()) export_cmd.run();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "igt: %s\n", e.what());
    return 1;
  }
  return 0;
}
