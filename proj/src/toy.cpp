#include "igt/toy.hpp"

#include <string>
#include <utility>
#include <vector>

#include "igt/rng.hpp"

namespace igt {

Dataset make_toy_dataset(std::uint64_t split_seed) {
  Dataset d;
  auto name = [](std::uint32_t g, std::uint32_t p) {
    return "g" + std::to_string(g) + "p" + std::to_string(p);
  };
  for (std::uint32_t g = 0; g < kToyGroups; ++g) {
    for (std::uint32_t p = 0; p < kToyPositions; ++p) {
      d.entities.add(name(g, p));
      d.entity_text[name(g, p)] = "group " + std::to_string(g) + " position " + std::to_string(p);
    }
  }
  struct Rule {
    const char* name;
    const char* text;
    std::vector<std::pair<int, int>> offsets;  // (dg, dp)
  };
  const Rule rules[] = {{"neighbor", "adjacent position", {{0, 1}, {0, -1}}},
                        {"across", "same position in an adjacent group", {{1, 0}, {-1, 0}}},
                        {"skip", "two positions away", {{0, 2}, {0, -2}}},
                        {"opposite", "opposite position", {{0, 5}}}};
  auto wrap = [](int v, std::uint32_t n) {
    const int m = static_cast<int>(n);
    return static_cast<std::uint32_t>(((v % m) + m) % m);
  };
  std::vector<Triple> all;
  for (const auto& rule : rules) {
    const auto r = d.relations.add(rule.name);
    d.relation_text[rule.name] = rule.text;
    for (std::uint32_t g = 0; g < kToyGroups; ++g) {
      for (std::uint32_t p = 0; p < kToyPositions; ++p) {
        for (const auto& [dg, dp] : rule.offsets) {
          const auto h = d.entities.at(name(g, p));
          const auto t = d.entities.at(name(wrap(static_cast<int>(g) + dg, kToyGroups),
                                            wrap(static_cast<int>(p) + dp, kToyPositions)));
          all.push_back({EntityId{h}, RelationId{r, false}, EntityId{t}});
        }
      }
    }
  }
  Rng rng(split_seed);
  for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[uniform_index(rng, i)]);
  const std::size_t n_train = all.size() * 8 / 10;
  const std::size_t n_valid = all.size() / 10;
  d.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.valid.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                 all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  d.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), all.end());
  d.entities.freeze();
  d.relations.freeze();
  return d;
}

TrainConfig toy_train_config(std::uint64_t seed) {
  TrainConfig c;
  c.model.encoder.d_model = 32;
  c.model.encoder.n_heads = 4;
  c.model.encoder.n_layers = 2;
  c.model.encoder.d_ff = 64;
  c.epochs = 200;
  c.batch_size = 16;
  c.grad_accum = 1;
  c.encoder_schedule = {1e-3, 0.02};
  c.provider_schedule = {1e-4, 0.04};
  c.other_schedule = {1e-3, 0.01};
  c.eval_every = 20;
  c.seed = seed;
  c.sampler.seed = seed;
  return c;
}

}  // namespace igt
