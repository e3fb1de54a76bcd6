#include "igt/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include "igt/errors.hpp"

namespace igt {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("config key \"" + std::string(key) + "\": cannot parse \"" +
                    std::string(value) + "\" as " + expected);
}

template <class T>
T parse_uint(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

int parse_int(std::string_view key, std::string_view v) {
  int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "a boolean");
}

struct Entry {
  std::string key;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    auto u32 = [&t](const char* k, auto member) {
      t.push_back({k,
                   [k, member](TrainConfig& c, std::string_view v) {
                     member(c) = parse_uint<std::uint32_t>(k, v);
                   },
                   [member](const TrainConfig& c) {
                     return std::to_string(member(const_cast<TrainConfig&>(c)));
                   }});
    };
    auto u64 = [&t](const char* k, auto member) {
      t.push_back({k,
                   [k, member](TrainConfig& c, std::string_view v) {
                     member(c) = parse_uint<std::uint64_t>(k, v);
                   },
                   [member](const TrainConfig& c) {
                     return std::to_string(member(const_cast<TrainConfig&>(c)));
                   }});
    };
    auto dbl = [&t](const char* k, auto member) {
      t.push_back({k,
                   [k, member](TrainConfig& c, std::string_view v) {
                     member(c) = parse_double(k, v);
                   },
                   [member](const TrainConfig& c) {
                     return num(member(const_cast<TrainConfig&>(c)));
                   }});
    };
    auto flag = [&t](const char* k, auto member) {
      t.push_back({k,
                   [k, member](TrainConfig& c, std::string_view v) {
                     member(c) = parse_bool(k, v);
                   },
                   [member](const TrainConfig& c) {
                     return std::string(member(const_cast<TrainConfig&>(c)) ? "true" : "false");
                   }});
    };
    using C = TrainConfig;
    u64("seed", [](C& c) -> std::uint64_t& { return c.seed; });
    u32("epochs", [](C& c) -> std::uint32_t& { return c.epochs; });
    u32("batch_size", [](C& c) -> std::uint32_t& { return c.batch_size; });
    u32("grad_accum", [](C& c) -> std::uint32_t& { return c.grad_accum; });
    dbl("weight_decay", [](C& c) -> double& { return c.weight_decay; });
    dbl("adam_beta1", [](C& c) -> double& { return c.adam_beta1; });
    dbl("adam_beta2", [](C& c) -> double& { return c.adam_beta2; });
    dbl("adam_eps", [](C& c) -> double& { return c.adam_eps; });
    flag("freeze_provider", [](C& c) -> bool& { return c.freeze_provider; });
    u32("eval_every", [](C& c) -> std::uint32_t& { return c.eval_every; });
    u64("eval_max_triples", [](C& c) -> std::size_t& { return c.eval_max_triples; });
    flag("restore_best", [](C& c) -> bool& { return c.restore_best; });
    dbl("lr_encoder", [](C& c) -> double& { return c.encoder_schedule.lr; });
    dbl("lr_provider", [](C& c) -> double& { return c.provider_schedule.lr; });
    dbl("lr_other", [](C& c) -> double& { return c.other_schedule.lr; });
    dbl("warmup_encoder", [](C& c) -> double& { return c.encoder_schedule.warmup; });
    dbl("warmup_provider", [](C& c) -> double& { return c.provider_schedule.warmup; });
    dbl("warmup_other", [](C& c) -> double& { return c.other_schedule.warmup; });
    u32("radius", [](C& c) -> std::uint32_t& { return c.sampler.radius; });
    u32("m_hr", [](C& c) -> std::uint32_t& { return c.sampler.m_hr; });
    u32("m_h", [](C& c) -> std::uint32_t& { return c.sampler.m_h; });
    u32("m_r", [](C& c) -> std::uint32_t& { return c.sampler.m_r; });
    u32("d_model", [](C& c) -> std::uint32_t& { return c.model.encoder.d_model; });
    u32("n_heads", [](C& c) -> std::uint32_t& { return c.model.encoder.n_heads; });
    u32("n_layers", [](C& c) -> std::uint32_t& { return c.model.encoder.n_layers; });
    u32("d_ff", [](C& c) -> std::uint32_t& { return c.model.encoder.d_ff; });
    dbl("dropout", [](C& c) -> double& { return c.model.encoder.dropout; });
    dbl("init_sigma", [](C& c) -> double& { return c.model.encoder.init_sigma; });
    u32("num_distance_buckets",
        [](C& c) -> std::uint32_t& { return c.model.encoder.buckets.num_distance_buckets; });
    t.push_back({"max_exact_distance",
                 [](C& c, std::string_view v) {
                   c.model.encoder.buckets.max_exact_distance = parse_int("max_exact_distance", v);
                 },
                 [](const C& c) { return std::to_string(c.model.encoder.buckets.max_exact_distance); }});
    flag("share_g2g", [](C& c) -> bool& { return c.model.encoder.distinction.share_g2g; });
    u32("classifier_hidden", [](C& c) -> std::uint32_t& { return c.model.classifier_hidden; });
    dbl("beta1", [](C& c) -> double& { return c.model.objective.beta1; });
    flag("occurrence_relation", [](C& c) -> bool& { return c.model.objective.occurrence_relation; });
    dbl("lambda", [](C& c) -> double& { return c.model.fusion.lambda; });
    t.push_back({"relation_scope",
                 [](C& c, std::string_view v) { c.model.fusion.scope = parse_scope(v); },
                 [](const C& c) { return std::string(scope_name(c.model.fusion.scope)); }});
    t.push_back({"provider", [](C& c, std::string_view v) { c.model.provider = std::string(v); },
                 [](const C& c) { return c.model.provider; }});
    u32("stub_d_llm", [](C& c) -> std::uint32_t& { return c.model.stub.d_llm; });
    u32("stub_layers", [](C& c) -> std::uint32_t& { return c.model.stub.n_layers; });
    u32("stub_heads", [](C& c) -> std::uint32_t& { return c.model.stub.n_heads; });
    u32("stub_d_ff", [](C& c) -> std::uint32_t& { return c.model.stub.d_ff; });
    u32("stub_max_words", [](C& c) -> std::uint32_t& { return c.model.stub.max_description_words; });
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(TrainConfig& config, std::string_view key, std::string_view value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(config, trim(value));
      if (key == "seed") config.sampler.seed = config.seed;
      return;
    }
  }
  throw ConfigError("unknown config key \"" + std::string(key) + "\"");
}

void apply_config_text(TrainConfig& config, std::string_view text, std::string_view source) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(std::string(source), lineno, "expected key = value");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(std::string(source), lineno, e.what());
    }
  }
}

void load_config_file(TrainConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override \"" + o + "\" is not key=value");
    const std::string_view sv(o);
    apply_setting(config, trim(sv.substr(0, eq)), trim(sv.substr(eq + 1)));
  }
}

bool apply_environment(TrainConfig& config) {
  const char* s = std::getenv("IGT_SEED");
  if (!s || !*s) return false;
  apply_setting(config, "seed", s);
  return true;
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.key);
  return out;
}

}  // namespace igt
