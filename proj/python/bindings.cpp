#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>

#include "igt/config.hpp"
#include "igt/eval.hpp"
#include "igt/fusion.hpp"
#include "igt/objective.hpp"
#include "igt/positions.hpp"
#include "igt/rng.hpp"
#include "igt/sampler.hpp"
#include "igt/toy.hpp"
#include "igt/workspace.hpp"

namespace py = pybind11;
using namespace igt;

namespace {

template <class Tag>
py::array_t<int> to_array(const RelativeMatrix<Tag>& m) {
  const auto n = static_cast<py::ssize_t>(m.size());
  py::array_t<int> out({n, n});
  auto v = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    for (py::ssize_t j = 0; j < n; ++j) v(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  return out;
}

const char* kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::Entity: return "entity";
    case TokenKind::Relation: return "relation";
    case TokenKind::Mask: return "mask";
  }
  return "?";
}

py::dict subgraph_dict(const Subgraph& sg) {
  py::list tokens, triples;
  for (const auto& t : sg.tokens) tokens.append(py::make_tuple(kind_name(t.kind), t.id, t.triple));
  for (const auto& s : sg.triples) {
    triples.append(py::make_tuple(s.triple.head.index, s.triple.relation.flat(), s.triple.tail.index,
                                  set_tag(s.set), s.ring));
  }
  std::vector<std::uint32_t> pos, neg;
  for (auto e : sg.pos_entities) pos.push_back(e.index);
  for (auto e : sg.neg_entities) neg.push_back(e.index);
  const auto p = build_distance_matrix(sg);
  py::dict d;
  d["tokens"] = tokens;
  d["triples"] = triples;
  d["pos"] = pos;
  d["neg"] = neg;
  d["exhausted"] = sg.exhausted;
  d["P"] = to_array(p);
  d["D"] = to_array(build_distinction_matrix(sg, p));
  return d;
}

py::dict metrics_dict(const MetricBlock& b) {
  py::dict d;
  d["count"] = b.count;
  d["mrr"] = b.mrr;
  d["hits1"] = b.hits1;
  d["hits3"] = b.hits3;
  d["hits10"] = b.hits10;
  return d;
}

py::dict diagnostics_dict(const Diagnostics& g) {
  py::dict d;
  d["inputs"] = g.inputs;
  d["a_it"] = g.a_it;
  d["a_il"] = g.a_il;
  d["a_bbr"] = g.a_bbr;
  return d;
}

Vec to_vec(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
  Vec v(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) v(i) = a.at(i);
  return v;
}

py::array_t<double> to_numpy(const Vec& v) {
  py::array_t<double> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out.mutable_at(i) = v(i);
  return out;
}

// A dataset plus one model built from a configuration, for interactive use.
class Session {
 public:
  Session(std::optional<std::filesystem::path> source, const std::vector<std::string>& overrides)
      : ws_(source ? open_workspace(*source) : make_workspace(make_toy_dataset())),
        config_(toy_train_config(0)) {
    apply_overrides(config_, overrides);
    config_.validate();
    model_ = build_model(config_, ws_);
  }

  py::dict stats() const {
    py::dict d;
    d["entities"] = ws_.graph.entity_count();
    d["relations"] = ws_.data.relations.size();
    d["train"] = ws_.data.train.size();
    d["valid"] = ws_.data.valid.size();
    d["test"] = ws_.data.test.size();
    return d;
  }

  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> split(const std::string& name) const {
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> out;
    for (const auto& t : ws_.split(name)) out.emplace_back(t.head.index, t.relation.flat(), t.tail.index);
    return out;
  }

  py::dict subgraph(std::uint32_t head, std::uint32_t relation, std::optional<std::uint32_t> gold_tail,
                    std::uint64_t seed) const {
    Rng rng(seed);
    std::optional<EntityId> gold;
    if (gold_tail) gold = EntityId{*gold_tail};
    return subgraph_dict(
        extract_subgraph(ws_.graph, EntityId{head}, RelationId::from_flat(relation), gold, config_.sampler, rng));
  }

  py::dict train(std::uint32_t epochs) {
    auto cfg = config_;
    cfg.epochs = epochs;
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = igt::train(*model_, ws_.graph, ws_.data.valid, ws_.filter, cfg);
    }
    py::list losses, valid;
    for (const auto& e : r.epochs) {
      losses.append(e.mean_loss);
      valid.append(e.valid ? py::object(metrics_dict(*e.valid)) : py::none());
    }
    py::dict d;
    d["steps"] = r.steps;
    d["epoch_loss"] = losses;
    d["valid"] = valid;
    d["best_epoch"] = r.best_epoch ? py::object(py::int_(*r.best_epoch)) : py::none();
    return d;
  }

  py::dict evaluate(const std::string& split, std::size_t max_triples, bool filtered, std::uint64_t seed) const {
    EvalOptions opt;
    opt.sampler = config_.sampler;
    opt.max_triples = max_triples;
    opt.filtered = filtered;
    opt.seed = seed;
    EvalReport r;
    {
      py::gil_scoped_release release;
      r = evaluate_ranking(*model_, ws_.graph, ws_.split(split), ws_.filter, opt, split);
    }
    py::dict d;
    d["split"] = r.split;
    d["overall"] = metrics_dict(r.overall);
    d["tail"] = metrics_dict(r.tail);
    d["head"] = metrics_dict(r.head);
    d["diagnostics"] = diagnostics_dict(r.diagnostics);
    return d;
  }

  py::dict diagnostics(std::size_t max_queries, std::uint64_t seed) const {
    const auto t = training_diagnostics(ws_.graph, config_.sampler, config_.model.encoder.buckets, max_queries, seed);
    py::dict d;
    d["overall"] = diagnostics_dict(t.overall);
    d["saturated"] = t.saturated ? py::object(diagnostics_dict(*t.saturated)) : py::none();
    d["saturated_queries"] = t.saturated_queries;
    return d;
  }

  std::string config_text() const { return format_config(config_); }

 private:
  Workspace ws_;
  TrainConfig config_;
  std::unique_ptr<Model> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Knowledge-graph completion with an induced-subgraph transformer";
  m.attr("G2G") = kG2G;

  py::class_<Session>(m, "Session")
      .def(py::init<std::optional<std::filesystem::path>, const std::vector<std::string>&>(),
           py::arg("source") = py::none(), py::arg("overrides") = std::vector<std::string>{})
      .def("stats", &Session::stats)
      .def("split", &Session::split, py::arg("name"))
      .def("subgraph", &Session::subgraph, py::arg("head"), py::arg("relation"),
           py::arg("gold_tail") = py::none(), py::arg("seed") = 0)
      .def("train", &Session::train, py::arg("epochs"))
      .def("evaluate", &Session::evaluate, py::arg("split") = "test", py::arg("max_triples") = 0,
           py::arg("filtered") = true, py::arg("seed") = 0)
      .def("diagnostics", &Session::diagnostics, py::arg("max_queries") = 0, py::arg("seed") = 0)
      .def("config_text", &Session::config_text);

  m.def("adaptive_beta2", &adaptive_beta2, py::arg("l_pos"), py::arg("l_neg"));
  m.def(
      "total_loss",
      [](double l_ce, double l_pos, double l_neg, double beta1) {
        const auto b = total_loss(l_ce, l_pos, l_neg, beta1);
        py::dict d;
        d["l_ce"] = b.l_ce;
        d["l_pos"] = b.l_pos;
        d["l_neg"] = b.l_neg;
        d["beta2"] = b.beta2;
        d["total"] = b.total;
        return d;
      },
      py::arg("l_ce"), py::arg("l_pos"), py::arg("l_neg"), py::arg("beta1"));
  m.def(
      "rank",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& scores, std::uint32_t gold,
         const std::vector<std::uint32_t>& filtered) {
        std::unordered_set<std::uint32_t> known(filtered.begin(), filtered.end());
        return rank_candidates(to_vec(scores), EntityId{gold}, known);
      },
      py::arg("scores"), py::arg("gold"), py::arg("filtered") = std::vector<std::uint32_t>{});
  m.def(
      "mrr", [](const std::vector<std::size_t>& ranks) { return mrr(ranks); }, py::arg("ranks"));
  m.def(
      "hits_at_k", [](const std::vector<std::size_t>& ranks, std::size_t k) { return hits_at_k(ranks, k); },
      py::arg("ranks"), py::arg("k"));

  m.def(
      "write_embedding_cache",
      [](const std::filesystem::path& path, std::uint64_t width, std::uint8_t flags,
         const std::map<std::uint64_t, py::array_t<double>>& entities,
         const std::map<std::uint64_t, py::array_t<double>>& relations,
         const std::map<std::pair<std::uint64_t, std::uint64_t>, py::array_t<double>>& pairs) {
        EmbeddingCache c;
        c.width = width;
        c.flags = flags;
        for (const auto& [k, v] : entities) c.entities[k] = to_vec(v);
        for (const auto& [k, v] : relations) c.relations[k] = to_vec(v);
        for (const auto& [k, v] : pairs) c.pairs[k] = to_vec(v);
        write_embedding_cache(path, c);
      },
      py::arg("path"), py::arg("width"), py::arg("flags") = 0, py::arg("entities") = py::dict(),
      py::arg("relations") = py::dict(), py::arg("pairs") = py::dict());
  m.def(
      "read_embedding_cache",
      [](const std::filesystem::path& path) {
        const auto c = read_embedding_cache(path);
        py::dict entities, relations, pairs;
        for (const auto& [k, v] : c.entities) entities[py::int_(k)] = to_numpy(v);
        for (const auto& [k, v] : c.relations) relations[py::int_(k)] = to_numpy(v);
        for (const auto& [k, v] : c.pairs) pairs[py::make_tuple(k.first, k.second)] = to_numpy(v);
        py::dict d;
        d["width"] = c.width;
        d["flags"] = c.flags;
        d["entities"] = entities;
        d["relations"] = relations;
        d["pairs"] = pairs;
        return d;
      },
      py::arg("path"));
}
