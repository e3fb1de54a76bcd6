#pragma once

// Training loop: per-epoch resampling, micro-batch gradient accumulation,
// AdamW with one linear warm-up/decay schedule per parameter group, periodic
// validation and best-snapshot retention.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "igt/eval.hpp"
#include "igt/model.hpp"
#include "igt/sampler.hpp"

namespace igt {

struct GroupSchedule {
  double lr = 1e-3;
  double warmup = 0.0;  ///< Fraction of total steps.
};

struct TrainConfig {
  ModelConfig model;
  SamplerConfig sampler;
  std::uint32_t epochs = 10;
  std::uint32_t batch_size = 16;
  std::uint32_t grad_accum = 4;
  GroupSchedule encoder_schedule{1e-4, 0.02};
  GroupSchedule provider_schedule{1e-5, 0.04};
  GroupSchedule other_schedule{1e-3, 0.01};
  double weight_decay = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Provider parameters receive no updates.
  bool freeze_provider = false;
  /// Validate every this many epochs; 0 disables validation.
  std::uint32_t eval_every = 1;
  std::size_t eval_max_triples = 0;
  /// Reload the best validation snapshot when training ends.
  bool restore_best = true;
  std::uint64_t seed = 0;

  void validate() const;
  const GroupSchedule& schedule(ParamGroup g) const;
};

/// Linear ramp 0 -> base_lr over warmup * total steps, then linear decay to 0
/// at total_steps. Throws ContractError unless 0 <= step <= total_steps.
double lr_at(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction);

/// Decoupled weight decay Adam over an explicit parameter list.
class AdamW {
 public:
  AdamW(ParamList params, double beta1, double beta2, double eps, double weight_decay);
  /// lr_for(group) gives the learning rate of each group for this step;
  /// parameters whose rate is 0 are left untouched.
  void step(const std::function<double(ParamGroup)>& lr_for);
  std::size_t steps() const { return t_; }

 private:
  ParamList params_;
  std::vector<Mat> m_, v_;
  double b1_, b2_, eps_, wd_;
  std::size_t t_ = 0;
};

struct StepRecord {
  std::size_t step = 0;
  std::uint32_t epoch = 0;
  double l_ce = 0, l_pos = 0, l_neg = 0, beta2 = 0, total = 0;  ///< Means over the step's queries.
  std::size_t pos_count = 0, neg_count = 0;                     ///< Sums over the step's queries.
};

struct EpochRecord {
  std::uint32_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<MetricBlock> valid;
};

struct TrainResult {
  std::size_t steps = 0;
  std::vector<StepRecord> log;
  std::vector<EpochRecord> epochs;
  std::optional<std::uint32_t> best_epoch;
  double best_valid_mrr = -1.0;
};

struct TrainHooks {
  /// Receives one tab-separated line per optimizer step (header first).
  std::ostream* step_log = nullptr;
  /// Written after construction (epoch 0) and whenever validation improves.
  std::filesystem::path checkpoint;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Training queries are both directions of every training triple. `graph` is
/// the doubled training graph; `valid` is the base-direction validation split.
/// Throws NumericError (with a dump of the offending query) on a non-finite loss.
TrainResult train(Model& model, const KnowledgeGraph& graph, std::span<const Triple> valid,
                  const FilterIndex& filter, const TrainConfig& config,
                  const TrainHooks& hooks = {});

std::string step_log_header();
std::string format_step(const StepRecord& r);

}  // namespace igt
