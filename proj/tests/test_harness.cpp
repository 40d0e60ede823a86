#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rfloop/harness/config.hpp"
#include "rfloop/harness/dataset.hpp"
#include "rfloop/harness/experiment.hpp"
#include "rfloop/harness/output.hpp"
#include "rfloop/harness/power_law.hpp"
#include "rfloop/harness/validate.hpp"

using namespace rfloop;
using namespace rfloop::harness;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig cfg;
  cfg.N_train = 8;
  cfg.N_test = 32;
  cfg.width = 16;
  cfg.reps_empirical = 6;
  cfg.reps_mean = 6;
  cfg.reps_contraction = 8;
  cfg.workers = 1;
  cfg.gamma = 0.05;
  cfg.sweep.widths = {8, 16, 24};
  cfg.sweep.depths = {1, 2};
  cfg.sweep.gammas = {0.01, 0.1, 1.0};
  cfg.sweep.nn_train_sizes = {4, 8};
  cfg.sweep.nn_widths = {8, 16};
  return cfg;
}

std::string csv_of(const std::vector<SweepRecord>& r) {
  std::ostringstream out;
  write_csv(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("config defaults follow the reference protocol") {
  const ExperimentConfig cfg;
  CHECK(cfg.N_train == 64);
  CHECK(cfg.N_test == 1024);
  CHECK(cfg.gamma == 5e-3);
  CHECK(cfg.reps_empirical == 400);
  CHECK(cfg.reps_mean == 400);
  CHECK(cfg.reps_contraction == 600);
  CHECK(cfg.sweep.widths.front() == 256);
  CHECK(cfg.sweep.widths[1] == 384);
  CHECK(cfg.sweep.widths.back() == 2048);
  REQUIRE(cfg.sweep.gammas.size() == 12);
  CHECK(cfg.sweep.gammas.front() == doctest::Approx(1e-4));
  CHECK(cfg.sweep.gammas.back() == doctest::Approx(1.0));
  CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("fast profile shrinks replicates and widths") {
  ExperimentConfig cfg;
  apply_fast_profile(cfg);
  CHECK(cfg.fast);
  CHECK(cfg.reps_empirical == 100);
  CHECK(cfg.reps_mean == 100);
  CHECK(cfg.reps_contraction == 150);
  CHECK(cfg.sweep.widths.back() == 1024);
  CHECK(cfg.width <= 1024);
}

TEST_CASE("config JSON round trip and validation errors") {
  ExperimentConfig cfg = tiny();
  cfg.target = Target::abs;
  cfg.activation = Activation::relu;
  cfg.master_seed = 123456789012345ULL;
  nlohmann::json j;
  to_json(j, cfg);
  ExperimentConfig back;
  from_json(j, back);
  nlohmann::json j2;
  to_json(j2, back);
  CHECK(j == j2);
  CHECK(back.master_seed == cfg.master_seed);

  ExperimentConfig bad;
  CHECK_THROWS_AS(from_json(nlohmann::json{{"target", "cos"}}, bad), ConfigError);
  CHECK_THROWS_AS(from_json(nlohmann::json{{"N_train", "many"}}, bad), ConfigError);
  ExperimentConfig dec = tiny();
  dec.sweep.widths = {16, 8};
  CHECK_THROWS_AS(validate_config(dec), ConfigError);
  ExperimentConfig neg = tiny();
  neg.gamma = -1;
  CHECK_THROWS_AS(validate_config(neg), ConfigError);
  ExperimentConfig empty = tiny();
  empty.sweep.gammas.clear();
  CHECK_THROWS_AS(validate_config(empty), ConfigError);
}

TEST_CASE("targets and dataset normalization") {
  CHECK(target_value(Target::poly, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(target_value(Target::poly, 1.0)) < 1e-15);
  CHECK(target_value(Target::sin2x, 0.5) == std::sin(1.0));
  CHECK(target_value(Target::abs, -2.0) == 2.0);

  const Dataset d = make_dataset(Target::sin2x, 64, 128, 7);
  CHECK(std::abs(d.y_train.mean()) < 1e-12);
  const double sd = std::sqrt((d.y_train.array() - d.y_train.mean()).square().mean());
  CHECK(std::abs(sd - 1.0) < 1e-12);
  for (Index i = 0; i < d.num_test(); ++i)
    CHECK(d.y_test(i) == doctest::Approx((target_value(Target::sin2x, d.x_test(i, 0)) - d.target_mean) / d.target_std));

  const Dataset again = make_dataset(Target::sin2x, 64, 128, 7);
  CHECK(again.x_train == d.x_train);
  CHECK(again.y_test == d.y_test);
  const Dataset small = make_dataset(Target::sin2x, 16, 128, 7);
  CHECK(small.x_train == d.x_train.topRows(16));
  CHECK(small.x_test == d.x_test);

  CHECK_THROWS_AS(make_dataset(Target::sin2x, 1, 8, 1), ConfigError);
}

TEST_CASE("summarize: stderr is sample std over sqrt(reps)") {
  const double v[] = {1.0, 2.0, 4.0, 5.0};
  const auto s = summarize(v);
  CHECK(s.mean == 3.0);
  CHECK(s.standard_error == doctest::Approx(std::sqrt(10.0 / 3.0) / 2.0));
  const double one[] = {2.5};
  CHECK(summarize(one).standard_error == 0.0);
}

TEST_CASE("deterministic features: empirical, tree and total coincide") {
  ExperimentConfig cfg = tiny();
  cfg.weight_scale = 0.0;
  cfg.bias_scale = 0.0;
  const auto r = run_point(cfg, 16, 2, 0.05, 8);
  const Dataset d = make_dataset(cfg.target, 8, cfg.N_test, block_seed(cfg.master_seed, SeedBlock::dataset));
  const double train = d.y_train.squaredNorm() / 8;
  const double c = d.y_test.squaredNorm() / cfg.N_test;
  CHECK(r[Observable::train].empirical.mean == doctest::Approx(train).epsilon(1e-14));
  CHECK(r[Observable::train].loops.tree == doctest::Approx(train).epsilon(1e-14));
  CHECK(r[Observable::test].empirical.mean == doctest::Approx(c).epsilon(1e-14));
  CHECK(r[Observable::test].loops.tree == doctest::Approx(c).epsilon(1e-14));
  for (Observable o : kObservables) {
    CHECK(r[o].empirical.standard_error < 1e-14);  // rounding in the mean only
    CHECK(r[o].loops.one_loop == 0.0);
  }
  CHECK(r.control == 0.0);
  CHECK_FALSE(r.flagged);
}

TEST_CASE("run_point is reproducible and independent of the worker count") {
  ExperimentConfig cfg = tiny();
  const auto a = run_point(cfg, 16, 2, 0.05, 8);
  const auto b = run_point(cfg, 16, 2, 0.05, 8);
  cfg.workers = 3;
  const auto c = run_point(cfg, 16, 2, 0.05, 8);
  CHECK(csv_of({a}) == csv_of({b}));
  CHECK(csv_of({a}) == csv_of({c}));
  CHECK(a.control_stderr == c.control_stderr);
  cfg.master_seed += 1;
  CHECK(csv_of({a}) != csv_of({run_point(cfg, 16, 2, 0.05, 8)}));
}

TEST_CASE("gamma sweep reuses samples but matches separate points bitwise") {
  const ExperimentConfig cfg = tiny();
  const auto sweep = sweep_gamma(cfg);
  REQUIRE(sweep.size() == 3);
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto single = run_point(cfg, cfg.width, cfg.depth, cfg.sweep.gammas[i], cfg.N_train, SweepKind::gamma);
    CHECK(csv_of({sweep[i]}) == csv_of({single}));
  }
}

TEST_CASE("width sweep holds gamma fixed while lambda scales with n") {
  const ExperimentConfig cfg = tiny();
  const auto recs = sweep_width(cfg);
  REQUIRE(recs.size() == cfg.sweep.widths.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].gamma == cfg.gamma);
    CHECK(recs[i].n == cfg.sweep.widths[i]);
    CHECK(recs[i].lambda == doctest::Approx(cfg.gamma * recs[i].n / cfg.N_train).epsilon(1e-15));
    for (Observable o : kObservables) CHECK(recs[i][o].loops.gamma_used == cfg.gamma);
    CHECK(recs[i][Observable::gap].loops.tree == recs[i][Observable::test].loops.tree - recs[i][Observable::train].loops.tree);
    CHECK(recs[i][Observable::gap].loops.one_loop ==
          recs[i][Observable::test].loops.one_loop - recs[i][Observable::train].loops.one_loop);
  }
}

TEST_CASE("depth and nn sweeps cover their grids") {
  const ExperimentConfig cfg = tiny();
  const auto depth = sweep_depth(cfg);
  REQUIRE(depth.size() == 2);
  CHECK(depth[1].L == 2);
  CHECK(depth[1].n == cfg.width);
  const auto nn = sweep_nn(cfg);
  REQUIRE(nn.size() == 4);
  CHECK(nn[0].N == 4);
  CHECK(nn[0].n == 8);
  CHECK(nn[3].N == 8);
  CHECK(nn[3].n == 16);
}

TEST_CASE("CSV schema, second-loop column and manifest") {
  ExperimentConfig cfg = tiny();
  const auto plain = run_point(cfg, 16, 2, 0.05, 8);
  const std::string text = csv_of({plain});
  std::istringstream in(text);
  std::string header, row;
  std::getline(in, header);
  CHECK(header == kCsvHeader);
  int rows = 0;
  while (std::getline(in, row)) {
    ++rows;
    int commas = 0;
    for (char ch : row) commas += ch == ',';
    CHECK(commas == 13);
    CHECK(row.find(",,") != std::string::npos);  // empty second_loop
    CHECK((row.back() == '0' || row.back() == '1'));
  }
  CHECK(rows == 3);

  cfg.second_loop = true;
  const auto with2 = run_point(cfg, 16, 2, 0.05, 8);
  REQUIRE(with2[Observable::train].loops.second_loop.has_value());
  CHECK(with2[Observable::train].loops.total ==
        with2[Observable::train].loops.tree + with2[Observable::train].loops.one_loop +
            *with2[Observable::train].loops.second_loop);

  const auto man = make_manifest(cfg, SweepKind::point, std::vector<SweepRecord>{plain}, 1.5);
  CHECK(man.at("config").at("N_train") == 8);
  CHECK(man.at("seed_blocks").contains("contraction"));
  CHECK(man.at("records").size() == 1);
  CHECK(man.contains("eigen_version"));
  CHECK(man.at("total_wall_time") == 1.5);

  const auto j = to_json(plain[Observable::test].loops);
  for (const char* key : {"observable", "tree", "one_loop", "second_loop", "total", "control", "n", "N", "gamma",
                          "seed_block"})
    CHECK(j.contains(key));
  CHECK(j.at("second_loop").is_null());
}

TEST_CASE("format_real round-trips") {
  for (double v : {0.0, 5e-3, 1.0 / 3.0, -2.5e-300, 123456789.125}) CHECK(std::stod(format_real(v)) == v);
  CHECK(format_real(0.005) == "0.005");
}

TEST_CASE("power-law fits") {
  const double xs[] = {64, 128, 256, 512, 1024};
  double inv[5], inv2[5], flat[5];
  for (int i = 0; i < 5; ++i) {
    inv[i] = 3.0 / xs[i];
    inv2[i] = 7.0 / (xs[i] * xs[i]);
    flat[i] = 0.25;
  }
  const auto a = fit_power_law(xs, inv);
  CHECK(std::abs(a.slope + 1.0) < 1e-10);
  CHECK(a.r_squared == doctest::Approx(1.0));
  CHECK(a.points_used == 5);
  CHECK(std::abs(fit_power_law(xs, inv2).slope + 2.0) < 1e-10);
  CHECK(std::abs(fit_power_law(xs, flat).slope) < 1e-12);
  CHECK_THROWS_AS(fit_power_law(std::span<const double>(xs, 2), std::span<const double>(inv, 2)), ContractError);
  double with_zero[5] = {1, 2, 0, 4, 5};
  CHECK_THROWS_AS(fit_power_law(xs, with_zero), ContractError);
}

TEST_CASE("validate: default battery passes, injected asymmetry is caught") {
  ValidateOptions opts;
  opts.identity_cases = 6;
  opts.two_path_cases = 2;
  opts.wick_samples = 2000;
  opts.bound_cases = 20;
  const ExperimentConfig cfg = tiny();
  const auto ok = validate(cfg, opts);
  for (const auto& c : ok.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
  CHECK(ok.passed());
  CHECK(ok.to_json().at("passed") == true);

  opts.inject_asymmetry = true;
  const auto bad = validate(cfg, opts);
  CHECK_FALSE(bad.passed());
  for (const auto& c : bad.checks) CHECK(c.passed == (c.name != "kernel_symmetry"));
}
