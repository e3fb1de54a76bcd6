#pragma once

// Subgraph multi-classification objective: pooled triple representation, an
// N-way MLP classifier, cross-entropy on the query plus averaged losses over
// the Pos and Neg entity sets, combined with the adaptive beta2 weight.

#include <cstddef>
#include <vector>

#include "igt/nn.hpp"
#include "igt/sampler.hpp"

namespace igt {

/// Linear -> GELU -> Linear to one logit per entity.
struct ClassifierHead {
  Linear hidden;
  Linear output;

  ClassifierHead() = default;
  ClassifierHead(Eigen::Index in_width, Eigen::Index hidden_width, Eigen::Index n_entities,
                 Rng& rng);

  struct Cache {
    Vec input, pre, act;
  };

  Eigen::Index input_width() const { return hidden.in_features(); }
  Eigen::Index classes() const { return output.out_features(); }
  /// Throws ContractError on an input width mismatch.
  Vec logits(const Vec& x, Cache* cache = nullptr) const;
  Vec classify(const Vec& x) const { return softmax(logits(x)); }
  Vec backward(const Cache& cache, const Vec& dlogits);
  void collect(ParamList& out) { hidden.collect(out); output.collect(out); }
};

/// -log p[gold]. Throws LookupError when gold is out of range.
double loss_ce(const Vec& probabilities, EntityId gold);

/// Mean of per-item losses; 0 for an empty set.
double mean_loss(const std::vector<double>& items);

/// 1 when l_pos > l_neg, else 0.5 * l_pos / l_neg; 1 when both are 0.
/// Throws ContractError on negative or non-finite input.
double adaptive_beta2(double l_pos, double l_neg);

struct LossBreakdown {
  double l_ce = 0.0;
  double l_pos = 0.0;
  double l_neg = 0.0;
  double beta2 = 1.0;
  double total = 0.0;
  std::size_t pos_count = 0;
  std::size_t neg_count = 0;
};

/// total = l_ce + beta1 * (l_pos - beta2 * l_neg) with beta2 from adaptive_beta2.
LossBreakdown total_loss(double l_ce, double l_pos, double l_neg, double beta1,
                         std::size_t pos_count = 0, std::size_t neg_count = 0);

struct ObjectiveConfig {
  double beta1 = 0.5;
  /// Pos/Neg inputs use the relation token of the triple that introduced the
  /// candidate entity instead of the query's relation token.
  bool occurrence_relation = false;

  void validate() const;
};

/// Triple pooler plus classifier. Every classifier input is
/// concat(prefix, Pool([s_h, s_r, s_x])) where prefix is the provider vector
/// (possibly empty).
struct ObjectiveHead {
  PoolingOperator triple_pool;
  ClassifierHead classifier;

  ObjectiveHead() = default;
  ObjectiveHead(Eigen::Index d_model, Eigen::Index d_prefix, Eigen::Index hidden_width,
                Eigen::Index n_entities, Rng& rng);

  Eigen::Index prefix_width() const {
    return classifier.input_width() - triple_pool.output_width();
  }

  /// Pooled triple representation of token rows (h, r, x).
  Vec pool_triple(const Mat& states, std::size_t h, std::size_t r, std::size_t x,
                  PoolCache* cache = nullptr) const;
  /// concat(prefix, pooled). Throws ContractError on width drift.
  Vec classifier_input(const Vec& prefix, const Vec& pooled) const;
  /// Probabilities for the query slot.
  Vec predict(const Mat& states, const Subgraph& sg, const Vec& prefix) const;
  void collect(ParamList& out) { triple_pool.collect(out); classifier.collect(out); }
};

struct ObjectiveGrads {
  Mat d_states;
  Vec d_prefix;
};

/// Full objective for one subgraph. When grads is non-null, parameter grads of
/// the head are accumulated (scaled by `scale`) and dL/d(states), dL/d(prefix)
/// are returned through it. beta2 is held constant in the backward pass.
LossBreakdown objective_forward_backward(ObjectiveHead& head, const Mat& states, const Subgraph& sg,
                                         EntityId gold, const Vec& prefix,
                                         const ObjectiveConfig& config, double scale = 1.0,
                                         ObjectiveGrads* grads = nullptr);

}  // namespace igt
