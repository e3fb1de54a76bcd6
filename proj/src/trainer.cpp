#include "igt/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "igt/errors.hpp"

namespace igt {

void TrainConfig::validate() const {
  model.validate();
  sampler.validate();
  if (batch_size == 0 || grad_accum == 0) throw ConfigError("batch_size and grad_accum must be >= 1");
  for (const auto* g : {&encoder_schedule, &provider_schedule, &other_schedule}) {
    if (!(g->lr > 0.0)) throw ConfigError("learning rates must be > 0");
    if (!(g->warmup >= 0.0 && g->warmup < 1.0)) throw ConfigError("warm-up fractions must be in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

const GroupSchedule& TrainConfig::schedule(ParamGroup g) const {
  switch (g) {
    case ParamGroup::Encoder: return encoder_schedule;
    case ParamGroup::Provider: return provider_schedule;
    case ParamGroup::Other: break;
  }
  return other_schedule;
}

double lr_at(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction) {
  if (step > total_steps) {
    throw ContractError("lr_at: step " + std::to_string(step) + " beyond " +
                        std::to_string(total_steps));
  }
  const double warm = warmup_fraction * static_cast<double>(total_steps);
  const auto s = static_cast<double>(step);
  if (s < warm) return base_lr * s / warm;
  const double rest = static_cast<double>(total_steps) - warm;
  if (rest <= 0.0) return 0.0;
  return base_lr * (static_cast<double>(total_steps) - s) / rest;
}

AdamW::AdamW(ParamList params, double beta1, double beta2, double eps, double weight_decay)
    : params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {
  for (const auto* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(const std::function<double(ParamGroup)>& lr_for) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    const double lr = lr_for(p.group);
    if (lr == 0.0) continue;
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * p.grad;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * p.grad.cwiseAbs2();
    const Mat update = (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps_);
    if (wd_ > 0.0) p.value *= 1.0 - lr * wd_;
    p.value -= lr * update;
  }
}

std::string step_log_header() {
  return "step\tepoch\tl_ce\tl_pos\tl_neg\tbeta2\ttotal\tpos_count\tneg_count";
}

std::string format_step(const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu\t%u\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%zu\t%zu", r.step,
                r.epoch, r.l_ce, r.l_pos, r.l_neg, r.beta2, r.total, r.pos_count, r.neg_count);
  return buf;
}

namespace {

/// Fisher-Yates with the portable index draw.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

std::vector<Mat> snapshot(const ParamList& params) {
  std::vector<Mat> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

std::string dump(const KnowledgeGraph& g, const Triple& q, const LossBreakdown& l,
                 std::uint32_t epoch, std::size_t step) {
  std::ostringstream os;
  os << "non-finite loss at epoch " << epoch << ", step " << step << ", query ("
     << g.entity_name(q.head) << ", " << g.relation_name(q.relation) << ", "
     << g.entity_name(q.tail) << "): l_ce=" << l.l_ce << " l_pos=" << l.l_pos
     << " l_neg=" << l.l_neg << " beta2=" << l.beta2 << " total=" << l.total;
  return os.str();
}

}  // namespace

TrainResult train(Model& model, const KnowledgeGraph& graph, std::span<const Triple> valid,
                  const FilterIndex& filter, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (!graph.doubled()) throw ContractError("train needs the inverse-doubled graph");
  TrainResult result;
  const ParamList params = model.parameters();
  AdamW opt(params, config.adam_beta1, config.adam_beta2, config.adam_eps, config.weight_decay);
  model.zero_grad();

  const std::size_t queries = graph.triple_count();
  const std::size_t per_step = static_cast<std::size_t>(config.batch_size) * config.grad_accum;
  const std::size_t steps_per_epoch = (queries + per_step - 1) / per_step;
  const std::size_t total_steps = steps_per_epoch * config.epochs;

  if (hooks.step_log) *hooks.step_log << step_log_header() << '\n';
  if (!hooks.checkpoint.empty()) save_checkpoint(hooks.checkpoint, model);

  std::vector<Mat> best;
  EvalOptions eval_opts;
  eval_opts.sampler = config.sampler;
  eval_opts.max_triples = config.eval_max_triples;
  eval_opts.seed = derive_seed(config.seed, {0x7a11d});

  std::vector<std::size_t> order(queries);
  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(derive_seed(config.seed, {epoch, 0}));
    shuffle(order, order_rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t begin = s * per_step;
      const std::size_t end = std::min(queries, begin + per_step);
      const double scale = 1.0 / static_cast<double>(end - begin);
      StepRecord rec;
      rec.step = result.steps + 1;
      rec.epoch = epoch;
      // Micro-batches accumulate into the same gradient buffers before one update.
      for (std::size_t mb = begin; mb < end; mb += config.batch_size) {
        const std::size_t mb_end = std::min(end, mb + config.batch_size);
        for (std::size_t k = mb; k < mb_end; ++k) {
          const std::size_t qi = order[k];
          const Triple& q = graph.triple(qi);
          Rng rng(derive_seed(config.seed, {epoch, qi, 1}));
          const Subgraph sg = extract_subgraph(graph, q.head, q.relation, q.tail, config.sampler, rng);
          Rng drop(derive_seed(config.seed, {epoch, qi, 2}));
          const LossBreakdown l = model.accumulate(
              sg, q.tail, scale, config.model.encoder.dropout > 0.0 ? &drop : nullptr);
          if (!std::isfinite(l.total)) throw NumericError(dump(graph, q, l, epoch, rec.step));
          rec.l_ce += l.l_ce * scale;
          rec.l_pos += l.l_pos * scale;
          rec.l_neg += l.l_neg * scale;
          rec.beta2 += l.beta2 * scale;
          rec.total += l.total * scale;
          rec.pos_count += l.pos_count;
          rec.neg_count += l.neg_count;
        }
      }
      const std::size_t k = result.steps;
      opt.step([&](ParamGroup g) {
        if (g == ParamGroup::Provider && config.freeze_provider) return 0.0;
        const auto& sch = config.schedule(g);
        return lr_at(k, total_steps, sch.lr, sch.warmup);
      });
      model.zero_grad();
      ++result.steps;
      epoch_loss += rec.total * static_cast<double>(end - begin);
      if (hooks.step_log) *hooks.step_log << format_step(rec) << '\n';
      result.log.push_back(rec);
    }
    EpochRecord er;
    er.epoch = epoch;
    er.mean_loss = queries ? epoch_loss / static_cast<double>(queries) : 0.0;
    if (config.eval_every && epoch % config.eval_every == 0 && !valid.empty()) {
      const EvalReport rep = evaluate_ranking(model, graph, valid, filter, eval_opts, "valid");
      er.valid = rep.overall;
      if (rep.overall.mrr > result.best_valid_mrr) {
        result.best_valid_mrr = rep.overall.mrr;
        result.best_epoch = epoch;
        best = snapshot(params);
        if (!hooks.checkpoint.empty()) save_checkpoint(hooks.checkpoint, model);
      }
    }
    result.epochs.push_back(er);
    if (hooks.on_epoch) hooks.on_epoch(er);
  }
  if (!best.empty()) {
    if (config.restore_best) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    }
  } else if (!hooks.checkpoint.empty() && config.epochs > 0) {
    save_checkpoint(hooks.checkpoint, model);
  }
  return result;
}

}  // namespace igt
