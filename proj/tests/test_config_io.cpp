#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "exitflow/config.hpp"
#include "exitflow/io.hpp"
#include "exitflow/runner.hpp"

using namespace exitflow;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("config roundtrip is lossless") {
  RunConfig cfg;
  cfg.label = "roundtrip";
  cfg.domain_kind = "ball";
  cfg.domain_center = {0.1, -0.2};
  cfg.domain_radius = 0.8;
  cfg.dynamic_kind = "profile";
  cfg.profile_kind = "affine";
  cfg.profile_a = 1.25;
  cfg.profile_b = -0.125;
  cfg.profile_floor = 0.5;
  cfg.cost_kind = "affine";
  cfg.cost_base = 0.3;
  cfg.cost_slope = {0.2, 0.1};
  cfg.grid_h = 1.0 / 48.0;
  cfg.particles = 1234;
  cfg.seed = 99;
  cfg.eps_study = {0.2, 0.1};
  cfg.mollify_frac = {0.05};

  const std::string text = serialize_config(cfg);
  const RunConfig back = parse_config_json(text);
  CHECK(serialize_config(back) == text);
  CHECK(config_digest(back) == config_digest(cfg));
  CHECK(back.label == "roundtrip");
  CHECK(back.profile_b == doctest::Approx(-0.125));
  CHECK(back.seed == 99);
  REQUIRE(back.eps_study.size() == 2);
  CHECK(back.eps_study[1] == doctest::Approx(0.1));

  // digest reacts to any field change
  RunConfig other = cfg;
  other.seed = 100;
  CHECK(config_digest(other) != config_digest(cfg));
}

TEST_CASE("config file io") {
  RunConfig cfg;
  cfg.label = "file-io";
  const std::string path = temp_path("exitflow_cfg_test.json");
  save_config(cfg, path);
  const RunConfig back = load_config(path);
  CHECK(config_digest(back) == config_digest(cfg));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_config(path), ConfigInvalid);
}

TEST_CASE("config validation rejects bad input") {
  CHECK_THROWS_AS(parse_config_json("not json at all"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config_json("{\"schema_version\": 2}"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config_json("{\"domain\": {\"kind\": \"hexagon\"}}"),
                  ConfigInvalid);
  CHECK_THROWS_AS(parse_config_json("{\"grid\": {\"h\": -0.1}}"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config_json("{\"grid\": {\"cfl\": 1.7}}"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config_json("{\"particles\": 0}"), ConfigInvalid);
  CHECK_THROWS_AS(
      parse_config_json("{\"scheme\": {\"kind\": \"newton\"}}"),
      ConfigInvalid);
  CHECK_THROWS_AS(parse_config_json("{\"dynamic\": {\"kind\": \"magic\"}}"),
                  ConfigInvalid);
  CHECK_THROWS_AS(parse_config_json("{\"cost\": {\"kind\": \"quadratic\"}}"),
                  ConfigInvalid);

  // messages carry the offending key
  try {
    parse_config_json("{\"domain\": {\"kind\": \"hexagon\"}}");
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    CHECK(std::string(e.what()).find("domain.kind") != std::string::npos);
  }
  try {
    parse_config_json("{\"grid\": {\"cfl\": 1.7}}");
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    CHECK(std::string(e.what()).find("cfl") != std::string::npos);
  }

  // unknown keys are tolerated so configs can carry annotations
  const RunConfig ok = parse_config_json(
      "{\"comment\": \"note\", \"grid\": {\"h\": 0.05, \"hint\": 3}}");
  CHECK(ok.grid_h == doctest::Approx(0.05));
}

TEST_CASE("bundled configs load and materialize") {
  namespace fs = std::filesystem;
  const fs::path dir(EXITFLOW_CONFIGS_DIR);
  REQUIRE(fs::exists(dir));
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    CAPTURE(entry.path().string());
    const RunConfig cfg = load_config(entry.path().string());
    CHECK(cfg.schema_version == 1);
    CHECK_FALSE(cfg.label.empty());

    // every bundled config must materialize into a consistent setup
    const RunSetup s = make_setup(cfg);
    CHECK(s.k_min > 0.0);
    CHECK(s.k_max >= s.k_min);
    CHECK(s.t_upper > 0.0);
    CHECK(s.tg.t_end() >= s.t_upper - 1e-12);
    CHECK(s.tg.dt > 0.0);
    CHECK(s.sg.size() > 0);

    // round-trip through the canonical form preserves the digest
    const RunConfig back = parse_config_json(serialize_config(cfg));
    CHECK(config_digest(back) == config_digest(cfg));
  }
  CHECK(seen == 8);
}

TEST_CASE("materialization matches the declaration") {
  RunConfig cfg;
  cfg.domain_kind = "interval";
  cfg.interval_a = 0.0;
  cfg.interval_b = 2.0;
  cfg.cost_kind = "affine";
  cfg.cost_base = 0.2;
  cfg.cost_slope = {0.1, 0.0};
  cfg.profile_kind = "cosine";
  cfg.profile_mean = 1.0;
  cfg.profile_amp = 0.4;
  cfg.profile_eps = 0.2;

  const SignedDomain dom = make_domain(cfg);
  CHECK(dom.dim() == 1);
  CHECK(dom.max_depth() == doctest::Approx(1.0));
  const BoundaryCost cost = make_cost(cfg);
  CHECK(cost.value(dom, {0.0, 0.0}, 1e-9) == doctest::Approx(0.2));
  const TimeProfile zeta = make_profile(cfg);
  CHECK(zeta.value(0.0) == doctest::Approx(1.4));

  cfg.initial_kind = "uniform_ball";
  cfg.initial_center = {1.0, 0.0};
  cfg.initial_radius = 0.25;
  const InitialDensity init = make_initial(cfg);
  CHECK(init.kind == InitialDensity::Kind::UniformBall);
  CHECK(init.supports(dom, {1.1, 0.0}));
  CHECK_FALSE(init.supports(dom, {1.5, 0.0}));

  cfg.scheme = "damped_picard";
  cfg.theta = 0.75;
  const EquilibriumParams ep = make_equilibrium_params(cfg);
  CHECK(ep.scheme == EquilibriumParams::Scheme::DampedPicard);
  CHECK(ep.theta == doctest::Approx(0.75));
}

TEST_CASE("setup sizes the horizon past the certified exit bound") {
  RunConfig cfg;
  cfg.domain_kind = "ball";
  cfg.domain_radius = 1.0;
  cfg.profile_kind = "constant";
  cfg.profile_c = 1.0;
  cfg.grid_h = 1.0 / 32.0;

  const RunSetup s = make_setup(cfg);
  CHECK(s.k_min == doctest::Approx(1.0));
  CHECK(s.k_max == doctest::Approx(1.0));
  CHECK(s.t_upper == doctest::Approx(1.0));
  CHECK(s.tg.t_end() >= s.t_upper - 1e-12);
  CHECK(s.tg.dt <= cfg.cfl * cfg.grid_h / s.k_max + 1e-15);
  CHECK(s.sg.dim == 2);
  // grid covers the domain plus the boundary band
  CHECK(s.sg.origin.x < -1.0 - 2.9 * s.sg.h);
  CHECK(s.sg.node(s.sg.nx - 1, 0).x > 1.0 + 2.9 * s.sg.h);

  const SpeedField f = profile_field(s);
  CHECK(f.time_constant());
  CHECK(f.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("tensor io roundtrip") {
  const std::string path = temp_path("exitflow_tensor_test.f64");
  const std::vector<double> data{1.0, -2.5, 3.25, 0.0, 1e-17, 42.0};
  write_tensor(path, data, {2, 3}, {"row", "col"});

  std::vector<std::int64_t> shape;
  const std::vector<double> back = read_tensor(path, &shape);
  REQUIRE(shape == std::vector<std::int64_t>{2, 3});
  REQUIRE(back.size() == data.size());
  for (size_t i = 0; i < data.size(); ++i) CHECK(back[i] == data[i]);

  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}

TEST_CASE("manifest determinism separates wall time") {
  Manifest a;
  a.set_config_digest(0xabcdef);
  a.set_seed(7);
  a.add_artifact("phi", std::vector<double>{1.0, 2.0, 3.0});
  a.add_artifact("rho", std::vector<double>{0.5});
  a.set_wall_seconds(12.5);

  Manifest b;
  b.set_config_digest(0xabcdef);
  b.set_seed(7);
  b.add_artifact("rho", std::vector<double>{0.5});
  b.add_artifact("phi", std::vector<double>{1.0, 2.0, 3.0});
  b.set_wall_seconds(99.0);  // timing must not affect identity

  CHECK(a.deterministic_digest() == b.deterministic_digest());

  Manifest c = a;
  c.add_artifact("extra", std::vector<double>{0.0});
  CHECK(c.deterministic_digest() != a.deterministic_digest());

  Manifest d;
  d.set_config_digest(0xabcdef);
  d.set_seed(8);
  d.add_artifact("phi", std::vector<double>{1.0, 2.0, 3.0});
  d.add_artifact("rho", std::vector<double>{0.5});
  CHECK(d.deterministic_digest() != a.deterministic_digest());
}

TEST_CASE("jsonl logger appends one object per line") {
  const std::string path = temp_path("exitflow_log_test.jsonl");
  std::remove(path.c_str());
  {
    JsonlLogger log(path);
    log.append("{\"iter\":1}");
    log.append("{\"iter\":2}");
  }
  const std::string text = read_text_file(path);
  CHECK(text == "{\"iter\":1}\n{\"iter\":2}\n");
  std::remove(path.c_str());
}
