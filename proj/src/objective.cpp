#include "igt/objective.hpp"

#include <cmath>

#include "igt/errors.hpp"

namespace igt {

ClassifierHead::ClassifierHead(Eigen::Index in_width, Eigen::Index hidden_width,
                               Eigen::Index n_entities, Rng& rng)
    : hidden("classifier.hidden", ParamGroup::Other, in_width, hidden_width, rng),
      output("classifier.output", ParamGroup::Other, hidden_width, n_entities, rng) {}

Vec ClassifierHead::logits(const Vec& x, Cache* cache) const {
  if (x.size() != input_width()) {
    throw ContractError("classifier: input width " + std::to_string(x.size()) + " != " +
                        std::to_string(input_width()));
  }
  Vec pre = hidden.forward(x);
  Vec act = gelu(pre);
  Vec out = output.forward(act);
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return out;
}

Vec ClassifierHead::backward(const Cache& c, const Vec& dlogits) {
  const Vec dact = output.backward(c.act, dlogits);
  const Vec dpre = gelu_backward(c.pre, dact);
  return hidden.backward(c.input, dpre);
}

double loss_ce(const Vec& probabilities, EntityId gold) {
  if (gold.index >= probabilities.size()) {
    throw LookupError("loss_ce: gold entity " + std::to_string(gold.index) + " outside " +
                      std::to_string(probabilities.size()) + " classes");
  }
  return -std::log(probabilities(gold.index));
}

double mean_loss(const std::vector<double>& items) {
  if (items.empty()) return 0.0;
  double s = 0.0;
  for (double v : items) s += v;
  return s / static_cast<double>(items.size());
}

double adaptive_beta2(double l_pos, double l_neg) {
  if (!(l_pos >= 0.0) || !(l_neg >= 0.0) || !std::isfinite(l_pos) || !std::isfinite(l_neg)) {
    throw ContractError("adaptive_beta2: losses must be finite and non-negative");
  }
  if (l_pos > l_neg) return 1.0;
  if (l_neg == 0.0) return 1.0;
  return 0.5 * l_pos / l_neg;
}

LossBreakdown total_loss(double l_ce, double l_pos, double l_neg, double beta1,
                         std::size_t pos_count, std::size_t neg_count) {
  LossBreakdown out;
  out.l_ce = l_ce;
  out.l_pos = l_pos;
  out.l_neg = l_neg;
  out.beta2 = adaptive_beta2(l_pos, l_neg);
  out.total = l_ce + beta1 * (l_pos - out.beta2 * l_neg);
  out.pos_count = pos_count;
  out.neg_count = neg_count;
  return out;
}

void ObjectiveConfig::validate() const {
  if (!(beta1 >= 0.0) || !std::isfinite(beta1)) throw ConfigError("beta1 must be >= 0");
}

ObjectiveHead::ObjectiveHead(Eigen::Index d_model, Eigen::Index d_prefix,
                             Eigen::Index hidden_width, Eigen::Index n_entities, Rng& rng)
    : triple_pool("pool.triple", ParamGroup::Other, d_model, d_model, rng),
      classifier(d_prefix + d_model, hidden_width, n_entities, rng) {}

Vec ObjectiveHead::pool_triple(const Mat& states, std::size_t h, std::size_t r, std::size_t x,
                               PoolCache* cache) const {
  Mat seq(3, states.cols());
  seq.row(0) = states.row(static_cast<Eigen::Index>(h));
  seq.row(1) = states.row(static_cast<Eigen::Index>(r));
  seq.row(2) = states.row(static_cast<Eigen::Index>(x));
  return triple_pool.forward(seq, cache);
}

Vec ObjectiveHead::classifier_input(const Vec& prefix, const Vec& pooled) const {
  if (prefix.size() != prefix_width() || pooled.size() != triple_pool.output_width()) {
    throw ContractError("classifier input: widths " + std::to_string(prefix.size()) + " + " +
                        std::to_string(pooled.size()) + " do not match the head (" +
                        std::to_string(classifier.input_width()) + ")");
  }
  Vec x(prefix.size() + pooled.size());
  x << prefix, pooled;
  return x;
}

Vec ObjectiveHead::predict(const Mat& states, const Subgraph& sg, const Vec& prefix) const {
  const Vec pooled =
      pool_triple(states, sg.head_position(), sg.relation_position(), sg.mask_position());
  return classifier.classify(classifier_input(prefix, pooled));
}

namespace {

struct Item {
  std::size_t r_pos = 0;
  std::size_t x_pos = 0;
  EntityId label;
  PoolCache pool;
  ClassifierHead::Cache head;
  Vec probs;
  double loss = 0.0;
};

std::size_t entity_slot(const Subgraph& sg, EntityId e) {
  auto p = sg.entity_position(e);
  if (!p) throw ContractError("objective: entity " + std::to_string(e.index) + " has no token");
  return *p;
}

}  // namespace

LossBreakdown objective_forward_backward(ObjectiveHead& head, const Mat& states, const Subgraph& sg,
                                         EntityId gold, const Vec& prefix,
                                         const ObjectiveConfig& config, double scale,
                                         ObjectiveGrads* grads) {
  if (static_cast<std::size_t>(states.rows()) != sg.size()) {
    throw ContractError("objective: state rows != subgraph tokens");
  }
  const std::size_t h_pos = sg.head_position();
  const std::size_t r_pos = sg.relation_position();

  auto run = [&](Item& it) {
    const Vec pooled = head.pool_triple(states, h_pos, it.r_pos, it.x_pos, &it.pool);
    it.probs = softmax(head.classifier.logits(head.classifier_input(prefix, pooled), &it.head));
    it.loss = loss_ce(it.probs, it.label);
  };
  auto relation_for = [&](std::size_t x_pos) {
    if (!config.occurrence_relation) return r_pos;
    return sg.positions[sg.tokens[x_pos].triple].relation;
  };

  Item target{r_pos, sg.mask_position(), gold, {}, {}, {}, 0.0};
  run(target);
  auto build = [&](const std::vector<EntityId>& set) {
    std::vector<Item> items;
    items.reserve(set.size());
    for (EntityId e : set) {
      const auto x = entity_slot(sg, e);
      items.push_back(Item{relation_for(x), x, e, {}, {}, {}, 0.0});
      run(items.back());
    }
    return items;
  };
  std::vector<Item> pos = build(sg.pos_entities);
  std::vector<Item> neg = build(sg.neg_entities);

  auto losses = [](const std::vector<Item>& items) {
    std::vector<double> v;
    v.reserve(items.size());
    for (const auto& it : items) v.push_back(it.loss);
    return mean_loss(v);
  };
  const LossBreakdown out =
      total_loss(target.loss, losses(pos), losses(neg), config.beta1, pos.size(), neg.size());
  if (!grads) return out;

  grads->d_states = Mat::Zero(states.rows(), states.cols());
  grads->d_prefix = Vec::Zero(prefix.size());
  const auto d_prefix = prefix.size();
  auto back = [&](Item& it, double weight) {
    if (weight == 0.0) return;
    Vec dlogits = it.probs;
    dlogits(it.label.index) -= 1.0;
    dlogits *= weight * scale;
    const Vec dx = head.classifier.backward(it.head, dlogits);
    grads->d_prefix += dx.head(d_prefix);
    const Mat dseq = head.triple_pool.backward(it.pool, dx.tail(dx.size() - d_prefix));
    grads->d_states.row(static_cast<Eigen::Index>(h_pos)) += dseq.row(0);
    grads->d_states.row(static_cast<Eigen::Index>(it.r_pos)) += dseq.row(1);
    grads->d_states.row(static_cast<Eigen::Index>(it.x_pos)) += dseq.row(2);
  };
  back(target, 1.0);
  if (!pos.empty()) {
    const double w = config.beta1 / static_cast<double>(pos.size());
    for (auto& it : pos) back(it, w);
  }
  if (!neg.empty()) {
    const double w = -config.beta1 * out.beta2 / static_cast<double>(neg.size());
    for (auto& it : neg) back(it, w);
  }
  return out;
}

}  // namespace igt
