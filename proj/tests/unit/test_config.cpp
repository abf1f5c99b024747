#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lipflow/config.hpp"
#include "lipflow/experiment.hpp"

using namespace lipflow;
using namespace lipflow::config;

TEST_CASE("minimal config and defaults") {
  const auto cfg = parse_config(R"(
[source]
kind = "gauss_ball"
center = [0.0, 0.0]

[target]
kind = "swiss_roll"
n = 50
)");
  REQUIRE(cfg.source.dist);
  CHECK(cfg.source.n == 0);
  CHECK(cfg.source.load(Role::source).size() == 200);
  CHECK(cfg.target.load(Role::target).size() == 50);
  CHECK(cfg.transport.dt == doctest::Approx(0.2));
  CHECK(cfg.transport.checkpoint_every == 100);
  CHECK(cfg.output.dir == "lipflow_out");
}

TEST_CASE("transport keys") {
  const auto cfg = parse_config(R"(
[source]
kind = "gauss_ball"
[target]
kind = "gauss_ball"
center = [1.0, 1.0]
[transport]
L = 4.0
f = "alpha"
alpha = 3.0
integrator = "heun"
widths = [16, 16, 1]
activation = "smooth_relu"
[output]
replay = true
)");
  CHECK(cfg.transport.lipschitz == 4.0);
  CHECK(cfg.transport.dt == doctest::Approx(0.05));
  CHECK(cfg.transport.fdiv.kind == fdiv::Kind::alpha);
  CHECK(cfg.transport.fdiv.alpha == 3.0);
  CHECK(cfg.transport.integrator == transport::Integrator::heun);
  CHECK(cfg.transport.widths == std::vector<int>{16, 16, 1});
  CHECK(cfg.transport.checkpoint_every == 1);

  const auto inf = parse_config("[source]\nkind = \"gauss_ball\"\n[target]\nkind = \"gauss_ball\"\n[transport]\nL = \"inf\"\n");
  CHECK(std::isinf(inf.transport.lipschitz));
}

TEST_CASE("rejections") {
  CHECK_THROWS_AS(parse_config("[source]\nkind = \"gauss_ball\"\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("[source]\nkind = \"gauss_ball\"\ncolour = 1\n[target]\nkind = \"gauss_ball\"\n"),
                  InvalidArgument);
  CHECK_THROWS_AS(parse_config("[source]\nkind = \"gauss_ball\"\ncsv = \"a.csv\"\n[target]\nkind = \"gauss_ball\"\n"),
                  InvalidArgument);
  CHECK_THROWS_AS(parse_config("[source]\nkind = \"gauss_ball\"\n[target]\nkind = \"gauss_ball\"\n[transport]\nf = \"js\"\n"),
                  InvalidArgument);
  CHECK_THROWS_AS(parse_config("not toml = = 1"), InvalidArgument);
  CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), IoError);
}

TEST_CASE("csv sides resolve against the config directory") {
  const auto cfg = parse_config("[source]\ncsv = \"pts.csv\"\n[target]\nkind = \"gauss_ball\"\n", "/data/run");
  CHECK_FALSE(cfg.source.dist);
  CHECK(cfg.source.csv == std::filesystem::path("/data/run/pts.csv"));
}

TEST_CASE("distribution text") {
  const auto [spec, n] = parse_dist_text("kind = \"sierpinski\"\nlevel = 4\n");
  CHECK(spec.kind == datasets::DistKind::sierpinski);
  CHECK(n == 0);
  CHECK(default_count(spec) == 4096);
  const auto [inline_spec, m] = parse_dist_text("{ kind = \"swiss_roll\", noise = 0.1, n = 7 }");
  CHECK(inline_spec.kind == datasets::DistKind::swiss_roll);
  CHECK(m == 7);
}

TEST_CASE("every shipped config parses") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(LIPFLOW_CONFIG_DIR)) {
    if (entry.path().extension() != ".toml") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++count;
  }
  CHECK(count > 0);
}

TEST_CASE("overrides and thread resolution") {
  auto cfg = parse_config("[source]\nkind = \"gauss_ball\"\n[target]\nkind = \"gauss_ball\"\n");
  experiment::Overrides o;
  o.seed = 77;
  o.out = "elsewhere";
  o.latent_dim = 1;
  o.deterministic = true;
  experiment::apply_overrides(cfg, o);
  CHECK(cfg.transport.seed == 77);
  CHECK(cfg.output.dir == "elsewhere");
  CHECK(cfg.latent.dim == 1);
  CHECK(cfg.deterministic);
  CHECK(experiment::resolve_threads(8, true) == 1);
  CHECK(experiment::resolve_threads(3, false) >= 1);
}
