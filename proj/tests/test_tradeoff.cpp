// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "calrec/tradeoff.hpp"
#include "test_support.hpp"

using namespace calrec;
using test::make_dist;
using test::make_universe;

namespace {

ItemCatalog two_genre_catalog() {
  ItemCatalog catalog;
  catalog["both"] = ItemGenres{"both", {"X", "Y"}};
  catalog["x1"] = ItemGenres{"x1", {"X"}};
  catalog["x2"] = ItemGenres{"x2", {"X"}};
  catalog["x3"] = ItemGenres{"x3", {"X"}};
  catalog["y1"] = ItemGenres{"y1", {"Y"}};
  return catalog;
}

}  // namespace

TEST_CASE("balance names round trip") {
  CHECK(balance_from_string("lin") == Balance::lin);
  CHECK(balance_from_string("log") == Balance::log);
  CHECK(to_string(Balance::log) == "log");
  CHECK_THROWS_AS(balance_from_string("exp"), std::invalid_argument);
}

TEST_CASE("lambda tokens parse to policies") {
  auto fixed = LambdaPolicy::parse("0.3");
  CHECK(fixed.kind == LambdaPolicy::Kind::constant);
  CHECK(fixed.value == doctest::Approx(0.3));
  CHECK(fixed.label == "0.3");
  CHECK(LambdaPolicy::parse("var").kind == LambdaPolicy::Kind::var);
  CHECK(LambdaPolicy::parse("cgr").kind == LambdaPolicy::Kind::cgr);
  CHECK_THROWS_AS(LambdaPolicy::parse("1.5"), std::invalid_argument);
  CHECK_THROWS_AS(LambdaPolicy::parse("-0.1"), std::invalid_argument);
  CHECK_THROWS_AS(LambdaPolicy::parse("huge"), std::invalid_argument);
}

TEST_CASE("relevance sum adds predicted weights") {
  std::vector<CandidateItem> empty;
  CHECK(relevance_sum(empty) == 0.0);
  std::vector<CandidateItem> list = {{"a", 4.5}, {"b", 3.0}};
  CHECK(relevance_sum(list) == doctest::Approx(7.5));
  std::vector<CandidateItem> pair = {{"a", 2.0}, {"b", 10.0}};
  CHECK(relevance_sum(pair) == doctest::Approx(12.0));
}

TEST_CASE("item bias damps the mean offset") {
  BiasParams bp;
  bp.mu = 4.0;
  std::vector<double> flat = {4.0, 4.0, 4.0};
  CHECK(item_bias(flat, bp) == doctest::Approx(0.0));
  std::vector<double> balanced = {5.0, 3.0};
  CHECK(item_bias(balanced, bp) == doctest::Approx(0.0));
  std::vector<double> high = {5.0, 5.0};
  CHECK(item_bias(high, bp) == doctest::Approx(2.0 / 2.01).epsilon(1e-12));
  std::vector<double> none;
  CHECK(item_bias(none, bp) == 0.0);

  BiasParams bad = bp;
  bad.alpha_b = 0.0;
  CHECK_THROWS_AS(item_bias(high, bad), std::invalid_argument);
}

TEST_CASE("user bias damps the residual list offset") {
  BiasParams bp;
  bp.mu = 4.0;
  bp.item_bias["a"] = 0.2;
  std::vector<CandidateItem> one = {{"a", 4.5}};
  CHECK(user_bias(one, bp) == doctest::Approx(0.3 / 1.01).epsilon(1e-12));

  std::vector<CandidateItem> neutral = {{"b", 4.0}, {"c", 4.0}};
  CHECK(user_bias(neutral, bp) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<CandidateItem> empty;
  CHECK(user_bias(empty, bp) == 0.0);

  BiasParams bad = bp;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(user_bias(one, bad), std::invalid_argument);
}

TEST_CASE("linear trade-off interpolates relevance and miscalibration") {
  auto universe = make_universe({"X", "Y"});
  auto p = make_dist(universe, {0.5, 0.5});
  auto catalog = two_genre_catalog();
  std::vector<CandidateItem> list = {{"x1", 5.0}, {"y1", 3.0}};
  TradeOffSpec spec;
  spec.divergence = DivergenceKind::kl;
  spec.smoothing.alpha = 0.01;

  double sim = relevance_sum(list);
  std::vector<WeightedItem> as_weighted = {{&catalog["x1"], 5.0},
                                           {&catalog["y1"], 3.0}};
  auto q_raw = realized_distribution(as_weighted, universe);
  double f = miscalibration(spec.divergence, p, q_raw, spec.smoothing);

  CHECK(tradeoff_lin(0.0, list, p, spec, catalog) == doctest::Approx(sim));
  CHECK(tradeoff_lin(1.0, list, p, spec, catalog) == doctest::Approx(-f));
  CHECK(tradeoff_lin(0.8, list, p, spec, catalog) ==
        doctest::Approx(0.2 * sim - 0.8 * f).epsilon(1e-12));

  CHECK_THROWS_AS(tradeoff_lin(-0.2, list, p, spec, catalog),
                  std::invalid_argument);
  CHECK_THROWS_AS(tradeoff_lin(1.2, list, p, spec, catalog),
                  std::invalid_argument);
  std::vector<CandidateItem> stranger = {{"ghost", 1.0}};
  CHECK_THROWS_AS(tradeoff_lin(0.5, stranger, p, spec, catalog),
                  std::invalid_argument);
}

TEST_CASE("raising a weight never hurts when the realized mix is fixed") {
  // All listed items carry the same single genre, so the realized
  // distribution is pinned and only the relevance term can move.
  auto universe = make_universe({"X", "Y"});
  auto p = make_dist(universe, {0.7, 0.3});
  auto catalog = two_genre_catalog();
  TradeOffSpec spec;
  spec.divergence = DivergenceKind::chi;
  spec.smoothing.alpha = 0.01;

  SplitMix rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<CandidateItem> list = {{"x1", 1.0 + rng.uniform01()},
                                       {"x2", 1.0 + rng.uniform01()},
                                       {"x3", 1.0 + rng.uniform01()}};
    double lambda = 0.99 * rng.uniform01();
    double before = tradeoff_lin(lambda, list, p, spec, catalog);
    list[1].predicted_weight += 0.5 + rng.uniform01();
    double after = tradeoff_lin(lambda, list, p, spec, catalog);
    CHECK(after >= before - 1e-12);

    double pinned_before = tradeoff_lin(1.0, list, p, spec, catalog);
    list[2].predicted_weight += 1.0;
    CHECK(tradeoff_lin(1.0, list, p, spec, catalog) ==
          doctest::Approx(pinned_before).epsilon(1e-12));
  }
}

TEST_CASE("signed log damping is odd and fixed at zero") {
  CHECK(signed_log_damp(0.0, std::numbers::e) == 0.0);
  CHECK(signed_log_damp(std::numbers::e - 1.0, std::numbers::e) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(signed_log_damp(9.0, 10.0) == doctest::Approx(1.0).epsilon(1e-12));

  SplitMix rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    double t = rng.uniform(-50.0, 50.0);
    CHECK(signed_log_damp(-t, std::numbers::e) ==
          -signed_log_damp(t, std::numbers::e));
  }
  for (int trial = 0; trial < 100; ++trial) {
    double a = rng.uniform(-20.0, 20.0);
    double b = rng.uniform(-20.0, 20.0);
    if (a > b) std::swap(a, b);
    CHECK(signed_log_damp(a, std::numbers::e) <=
          signed_log_damp(b, std::numbers::e) + 1e-12);
  }
}

TEST_CASE("log trade-off reduces to the user bias when calibrated") {
  auto universe = make_universe({"X", "Y"});
  auto p = make_dist(universe, {0.5, 0.5});
  auto catalog = two_genre_catalog();
  std::vector<CandidateItem> list = {{"both", 4.5}};
  TradeOffSpec spec;
  spec.divergence = DivergenceKind::kl;
  spec.smoothing.alpha = 0.01;
  BiasParams bp;
  bp.mu = 4.0;
  bp.item_bias["both"] = 0.2;

  // The single two-genre item realizes p exactly, so at lambda 1 the linear
  // term vanishes and only the bias survives.
  CHECK(tradeoff_lin(1.0, list, p, spec, catalog) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(tradeoff_log(1.0, list, p, spec, bp, catalog) ==
        doctest::Approx(user_bias(list, bp)).epsilon(1e-12));
  CHECK(tradeoff_log(1.0, list, p, spec, bp, catalog) ==
        doctest::Approx(0.3 / 1.01).epsilon(1e-12));
}

TEST_CASE("log trade-off damps the linear value") {
  auto universe = make_universe({"X", "Y"});
  auto p = make_dist(universe, {0.5, 0.5});
  auto catalog = two_genre_catalog();
  double w = std::numbers::e - 1.0;
  std::vector<CandidateItem> list = {{"both", w}};
  TradeOffSpec spec;
  BiasParams bp;
  bp.mu = w;  // zero residual, so the bias term drops out

  CHECK(tradeoff_log(0.0, list, p, spec, bp, catalog) ==
        doctest::Approx(1.0).epsilon(1e-12));

  TradeOffSpec base10 = spec;
  base10.log_base = 10.0;
  std::vector<CandidateItem> nine = {{"both", 9.0}};
  BiasParams bp9;
  bp9.mu = 9.0;
  CHECK(tradeoff_log(0.0, nine, p, base10, bp9, catalog) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bias parameters come from the train fold") {
  auto table = test::make_table(
      {{"u1", "A", 5.0}, {"u1", "B", 3.0}, {"u2", "A", 5.0}, {"u2", "B", 3.0}},
      {{"A", ItemGenres{"A", {"X"}}}, {"B", ItemGenres{"B", {"Y"}}}});
  auto bp = compute_bias_params(table, 0.01, 0.01);
  CHECK(bp.mu == doctest::Approx(4.0));
  CHECK(bp.item_bias_of("A") == doctest::Approx(2.0 / 2.01).epsilon(1e-12));
  CHECK(bp.item_bias_of("B") == doctest::Approx(-2.0 / 2.01).epsilon(1e-12));
  CHECK(bp.item_bias_of("missing") == 0.0);
  CHECK(bp.alpha_b == doctest::Approx(0.01));
  CHECK(bp.sigma == doctest::Approx(0.01));

  InteractionTable empty;
  CHECK_THROWS_AS(compute_bias_params(empty, 0.01, 0.01),
                  std::invalid_argument);
}
