#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "fixtures.hpp"
#include "igt/config.hpp"
#include "igt/errors.hpp"

using namespace igt;

TEST_CASE("keys and values") {
  TrainConfig c;
  apply_setting(c, "epochs", "7");
  apply_setting(c, "lambda", "0.25");
  apply_setting(c, "relation_scope", "mr_l");
  apply_setting(c, "provider", "stub");
  apply_setting(c, "share_g2g", "false");
  apply_setting(c, "m_r", "3");
  CHECK(c.epochs == 7);
  CHECK(c.model.fusion.lambda == 0.25);
  CHECK(c.model.fusion.scope == RelationScope::Local);
  CHECK(c.model.provider == "stub");
  CHECK_FALSE(c.model.encoder.distinction.share_g2g);
  CHECK(c.sampler.m_r == 3);
  CHECK_THROWS_AS(apply_setting(c, "nonsense", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "epochs", "many"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "relation_scope", "everything"), ConfigError);
}

TEST_CASE("config text reports the failing line") {
  TrainConfig c;
  apply_config_text(c, "# comment\n\nseed = 12\n d_model=64 \n");
  CHECK(c.seed == 12);
  CHECK(c.model.encoder.d_model == 64);
  try {
    apply_config_text(c, "seed = 1\nbogus line\n", "cfg");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(apply_config_text(c, "epochs = x\n"), ParseError);
}

TEST_CASE("format_config round trips") {
  TrainConfig a;
  apply_overrides(a, {"epochs=3", "beta1=0.25", "provider=stub", "stub_d_llm=32", "radius=3"});
  TrainConfig b;
  apply_config_text(b, format_config(a));
  CHECK(format_config(b) == format_config(a));
  CHECK(b.model.objective.beta1 == 0.25);
  CHECK(b.sampler.radius == 3);
  for (const auto& key : config_keys()) CHECK(format_config(a).find(key + " = ") != std::string::npos);
  CHECK_THROWS_AS(apply_overrides(a, {"epochs"}), ConfigError);
}

TEST_CASE("config file and environment seed") {
  fixture::TempDir dir("cfg");
  std::ofstream(dir / "c.cfg") << "seed = 4\nepochs = 2\n";
  TrainConfig c;
  load_config_file(c, dir / "c.cfg");
  CHECK(c.seed == 4);
  CHECK_THROWS_AS(load_config_file(c, dir / "missing.cfg"), ConfigError);

  ::setenv("IGT_SEED", "77", 1);
  CHECK(apply_environment(c));
  CHECK(c.seed == 77);
  ::unsetenv("IGT_SEED");
  CHECK_FALSE(apply_environment(c));
}

TEST_CASE("defaults") {
  TrainConfig c;
  CHECK(c.epochs == 10);
  CHECK(c.grad_accum == 4);
  CHECK(c.sampler.radius == 2);
  CHECK(c.sampler.total() == 15);
  CHECK(c.model.encoder.buckets.num_distance_buckets == 32);
  CHECK(c.model.objective.beta1 == 0.5);
  CHECK(c.model.fusion.lambda == 0.5);
  CHECK(c.model.fusion.scope == RelationScope::Global);
}
