#include "igt/eval.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "igt/errors.hpp"

namespace igt {

std::size_t rank_candidates(const Vec& scores, EntityId gold,
                            const std::unordered_set<std::uint32_t>& known_true) {
  if (gold.index >= scores.size()) {
    throw LookupError("rank_candidates: gold " + std::to_string(gold.index) + " outside " +
                      std::to_string(scores.size()) + " candidates");
  }
  const double g = scores(gold.index);
  std::size_t higher = 0, ties = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    if (id == gold.index || known_true.contains(id)) continue;
    if (scores(i) > g) {
      ++higher;
    } else if (scores(i) == g) {
      ++ties;
    }
  }
  return 1 + higher + (ties + 1) / 2;
}

double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ContractError("mrr of an empty rank list");
  double s = 0.0;
  for (auto r : ranks) s += 1.0 / static_cast<double>(r);
  return s / static_cast<double>(ranks.size());
}

double hits_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw ContractError("hits_at_k of an empty rank list");
  std::size_t n = 0;
  for (auto r : ranks) n += r <= k ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(ranks.size());
}

void DiagnosticsAccumulator::add(const Subgraph& sg) {
  const auto p = build_distance_matrix(sg);
  const auto buckets = bucketize(p, map_);
  ++n_;
  triples_ += static_cast<double>(sg.triples.size());
  tokens_ += static_cast<double>(sg.size());
  beyond_ += static_cast<double>(buckets.beyond_range_count);
}

Diagnostics DiagnosticsAccumulator::result() const {
  if (n_ == 0) throw ContractError("diagnostics over an empty subgraph stream");
  const auto n = static_cast<double>(n_);
  return {n_, triples_ / n, tokens_ / n, beyond_ / n};
}

Diagnostics collect_diagnostics(std::span<const Subgraph> subgraphs, const BucketMap& map) {
  DiagnosticsAccumulator acc(map);
  for (const auto& sg : subgraphs) acc.add(sg);
  return acc.result();
}

namespace {

std::uint64_t filter_key(EntityId h, RelationId r) {
  return (static_cast<std::uint64_t>(h.index) << 32) | r.flat();
}

}  // namespace

FilterIndex::FilterIndex(const std::unordered_set<Triple, TripleHash>& known) {
  for (const auto& t : known) map_[filter_key(t.head, t.relation)].insert(t.tail.index);
}

const std::unordered_set<std::uint32_t>& FilterIndex::tails(EntityId h, RelationId r) const {
  auto it = map_.find(filter_key(h, r));
  return it == map_.end() ? empty_ : it->second;
}

MetricBlock summarize(std::span<const std::size_t> ranks) {
  MetricBlock b;
  b.count = ranks.size();
  if (ranks.empty()) return b;
  b.mrr = mrr(ranks);
  b.hits1 = hits_at_k(ranks, 1);
  b.hits3 = hits_at_k(ranks, 3);
  b.hits10 = hits_at_k(ranks, 10);
  return b;
}

EvalReport evaluate_ranking(const Model& model, const KnowledgeGraph& graph,
                            std::span<const Triple> triples, const FilterIndex& filter,
                            const EvalOptions& options, const std::string& split) {
  if (!graph.doubled()) throw ContractError("evaluate_ranking needs the inverse-doubled graph");
  EvalReport report;
  report.split = split;
  report.filtered = options.filtered;
  const std::size_t n = options.max_triples ? std::min(options.max_triples, triples.size())
                                            : triples.size();
  std::vector<std::size_t> all, tail_ranks, head_ranks;
  DiagnosticsAccumulator diag(model.config.encoder.buckets);
  const std::unordered_set<std::uint32_t> none;
  for (std::size_t i = 0; i < n; ++i) {
    for (int dir = 0; dir < (options.both_directions ? 2 : 1); ++dir) {
      const Triple q = dir == 0 ? triples[i] : triples[i].inverted();
      Rng rng(derive_seed(options.seed, {i, static_cast<std::uint64_t>(dir)}));
      const Subgraph sg = extract_subgraph(graph, q.head, q.relation, std::nullopt,
                                           options.sampler, rng);
      diag.add(sg);
      const Vec scores = model.predict(sg);
      const auto& known = options.filtered ? filter.tails(q.head, q.relation) : none;
      const std::size_t rank = rank_candidates(scores, q.tail, known);
      all.push_back(rank);
      (dir == 0 ? tail_ranks : head_ranks).push_back(rank);
      if (options.keep_rankings) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (Eigen::Index j = 0; j < scores.size(); ++j) {
          const float f = static_cast<float>(scores(j));
          h = fnv1a(std::string_view(reinterpret_cast<const char*>(&f), sizeof f), h);
        }
        report.rankings.push_back({q.head, q.relation, q.tail, rank, h});
      }
    }
  }
  report.overall = summarize(all);
  report.tail = summarize(tail_ranks);
  report.head = summarize(head_ranks);
  if (!all.empty()) report.diagnostics = diag.result();
  return report;
}

TrainingDiagnostics training_diagnostics(const KnowledgeGraph& graph, const SamplerConfig& sampler,
                                         const BucketMap& map, std::size_t max_queries,
                                         std::uint64_t seed) {
  if (!graph.doubled()) throw ContractError("training_diagnostics needs the inverse-doubled graph");
  const std::size_t total = graph.triple_count();
  const std::size_t n = max_queries ? std::min(max_queries, total) : total;
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  Rng pick(derive_seed(seed, {0}));
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + uniform_index(pick, total - i)]);

  DiagnosticsAccumulator all(map), sat(map);
  TrainingDiagnostics out;
  for (std::size_t i = 0; i < n; ++i) {
    const Triple& q = graph.triple(order[i]);
    Rng rng(derive_seed(seed, {order[i], 1}));
    const Subgraph sg = extract_subgraph(graph, q.head, q.relation, q.tail, sampler, rng);
    all.add(sg);
    if (saturated(ring1_pool_sizes(graph, q.head, q.relation, q.tail), sampler)) {
      sat.add(sg);
      ++out.saturated_queries;
    }
  }
  out.overall = all.result();
  if (out.saturated_queries) out.saturated = sat.result();
  return out;
}

namespace {

nlohmann::json block_json(const MetricBlock& b) {
  return {{"count", b.count}, {"mrr", b.mrr}, {"hits@1", b.hits1}, {"hits@3", b.hits3},
          {"hits@10", b.hits10}};
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::json j;
  j["split"] = r.split;
  j["protocol"] = r.filtered ? "filtered" : "raw";
  j["overall"] = block_json(r.overall);
  j["tail"] = block_json(r.tail);
  j["head"] = block_json(r.head);
  j["diagnostics"] = {{"inputs", r.diagnostics.inputs},
                      {"a_it", r.diagnostics.a_it},
                      {"a_il", r.diagnostics.a_il},
                      {"a_bbr", r.diagnostics.a_bbr}};
  if (!r.rankings.empty()) {
    auto& arr = j["rankings"] = nlohmann::json::array();
    for (const auto& x : r.rankings) {
      arr.push_back({{"head", x.head.index},
                     {"relation", x.relation.flat()},
                     {"gold", x.gold.index},
                     {"rank", x.rank},
                     {"scores_digest", x.scores_digest}});
    }
  }
  return j.dump(2);
}

EvalReport report_from_json(std::string_view text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    auto block = [](const nlohmann::json& b) {
      MetricBlock m;
      m.count = b.at("count").get<std::size_t>();
      m.mrr = b.at("mrr").get<double>();
      m.hits1 = b.at("hits@1").get<double>();
      m.hits3 = b.at("hits@3").get<double>();
      m.hits10 = b.at("hits@10").get<double>();
      return m;
    };
    r.split = j.at("split").get<std::string>();
    const auto protocol = j.at("protocol").get<std::string>();
    if (protocol != "filtered" && protocol != "raw") {
      throw FormatError("report: unknown protocol \"" + protocol + "\"");
    }
    r.filtered = protocol == "filtered";
    r.overall = block(j.at("overall"));
    r.tail = block(j.at("tail"));
    r.head = block(j.at("head"));
    const auto& d = j.at("diagnostics");
    r.diagnostics = {d.at("inputs").get<std::size_t>(), d.at("a_it").get<double>(),
                     d.at("a_il").get<double>(), d.at("a_bbr").get<double>()};
    if (j.contains("rankings")) {
      for (const auto& x : j.at("rankings")) {
        r.rankings.push_back({EntityId{x.at("head").get<std::uint32_t>()},
                              RelationId::from_flat(x.at("relation").get<std::uint32_t>()),
                              EntityId{x.at("gold").get<std::uint32_t>()},
                              x.at("rank").get<std::size_t>(),
                              x.at("scores_digest").get<std::uint64_t>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s %8s\n", "split", "queries", "MRR",
                "Hits@1", "Hits@3", "Hits@10");
  os << line;
  auto row = [&](const std::string& label, const MetricBlock& b) {
    std::snprintf(line, sizeof line, "%-16s %8zu %8.4f %8.4f %8.4f %8.4f\n", label.c_str(),
                  b.count, b.mrr, b.hits1, b.hits3, b.hits10);
    os << line;
  };
  const std::string tag = r.split + (r.filtered ? "" : " (raw)");
  row(tag, r.overall);
  row("  tail", r.tail);
  row("  head", r.head);
  std::snprintf(line, sizeof line, "A.IT %.2f  A.IL %.2f  A.BBR %.2f  over %zu inputs\n",
                r.diagnostics.a_it, r.diagnostics.a_il, r.diagnostics.a_bbr,
                r.diagnostics.inputs);
  os << line;
  return os.str();
}

}  // namespace igt
