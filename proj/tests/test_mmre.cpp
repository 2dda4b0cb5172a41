#include <gtest/gtest.h>

#include "oracles.hpp"
#include "relent/mmre.hpp"

using namespace relent;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

OneBlockCode four_to_two() { return validate_code_indices(full_shift(4), full_shift(2), {0, 0, 1, 1}); }

/// X = {0,1,2} without the edge 1→1; 0 and 1 read as 0, 2 reads as 1.
OneBlockCode crafted() {
  const Sft x = build_sft({"0", "1", "2"}, {{"0", "0"}, {"0", "1"}, {"0", "2"}, {"1", "0"}, {"1", "2"}, {"2", "0"}, {"2", "1"}, {"2", "2"}});
  return validate_code_indices(x, full_shift(2), {0, 0, 1});
}

/// Independent lift check: image of the solution's edge frequencies on Y.
double lift_error(const MmreSolution& s, const OneBlockCode& code, const MarkovMeasure& nu) {
  const auto img = pushforward(s.measure, compose(s.to_x, code)).marginal;
  double r = 0.0;
  for (std::size_t f = 0; f < nu.edge_freq.size(); ++f) r = std::max(r, std::abs(img.edge_freq[f] - nu.edge_freq[f]));
  return r;
}

/// Random first-order lift: from x, draw the next label from ν, then a preimage
/// successor of x over it with random weights.
MarkovMeasure random_lift(const OneBlockCode& code, const MarkovMeasure& nu, std::mt19937_64& rng) {
  const Sft& x = code.source;
  const auto nt = nu.transition();
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> w(x.edge_count(), 0.0);
  for (int a = 0; a < static_cast<int>(x.size()); ++a) {
    std::map<int, std::vector<int>> by_label;
    for (int e : x.out_edges(a)) by_label[code(x.edge(static_cast<std::size_t>(e)).to)].push_back(e);
    for (auto& [lab, es] : by_label) {
      const int ye = nu.host.edge_index(code(a), lab);
      const double pg = ye < 0 ? 0.0 : nt[static_cast<std::size_t>(ye)];
      std::vector<double> r(es.size());
      double s = 0;
      for (auto& t : r) s += t = u(rng);
      for (std::size_t i = 0; i < es.size(); ++i) w[static_cast<std::size_t>(es[i])] = pg * r[i] / s;
    }
  }
  return stationary_from_transition(x, w);
}

/// Best first-order lift of ν = Ber(p) through the crafted code, by grid search on
/// its two free parameters: P(0→0 | next label 0) and P(2→0 | next label 0).
double crafted_grid_optimum(double p) {
  const auto code = crafted();
  const Sft& x = code.source;
  auto h_rel = [&](double a, double b) {
    // Edge order follows the construction above.
    std::vector<double> w(x.edge_count());
    auto set = [&](int from, int to, double v) { w[static_cast<std::size_t>(x.edge_index(from, to))] = v; };
    set(0, 0, p * a);
    set(0, 1, p * (1 - a));
    set(0, 2, 1 - p);
    set(1, 0, p);
    set(1, 2, 1 - p);
    set(2, 0, p * b);
    set(2, 1, p * (1 - b));
    set(2, 2, 1 - p);
    return entropy_rate(stationary_from_transition(x, w)) - oracle::h(p);
  };
  double best = -1, ba = 0.5, bb = 0.5;
  for (int i = 1; i < 200; ++i)
    for (int j = 1; j < 200; ++j) {
      const double v = h_rel(i / 200.0, j / 200.0);
      if (v > best) best = v, ba = i / 200.0, bb = j / 200.0;
    }
  // Local refinement by shrinking pattern search.
  for (double step = 1.0 / 200; step > 1e-10; step *= 0.5)
    for (bool moved = true; moved;) {
      moved = false;
      for (auto [da, db] : {std::pair{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}}) {
        const double na = std::clamp(ba + da, 1e-12, 1 - 1e-12), nb = std::clamp(bb + db, 1e-12, 1 - 1e-12);
        const double v = h_rel(na, nb);
        if (v > best + 1e-15) best = v, ba = na, bb = nb, moved = true;
      }
    }
  return best;
}

}  // namespace

TEST(LiftConstraints, IdentityHasUniqueFeasiblePoint) {
  const auto nu = bernoulli({0.3, 0.7});
  const auto s = solve_mmre(build_lift_constraints(identity_code(nu.host), nu, 1));
  EXPECT_NEAR(s.h_rel, 0.0, 1e-12);
  for (std::size_t e = 0; e < nu.edge_freq.size(); ++e) EXPECT_NEAR(s.measure.edge_freq[e], nu.edge_freq[e], 1e-12);
}

TEST(LiftConstraints, FourToTwoCounts) {
  const auto p = build_lift_constraints(four_to_two(), bernoulli({0.3, 0.7}), 1);
  EXPECT_EQ(p.variables(), 16u);
  EXPECT_EQ(p.stationarity_rows, 4u);
  EXPECT_EQ(p.mass_rows, 1u);
  EXPECT_EQ(p.pushforward_rows, 4u);
  EXPECT_EQ(p.lift_rows, 8u);
}

TEST(LiftConstraints, UncoveredEdge) {
  const Sft x = build_sft({"0", "1"}, {{"0", "1"}, {"1", "0"}});
  const auto code = validate_code_indices(x, full_shift(2), {0, 1});
  EXPECT_EQ(code_of([&] { build_lift_constraints(code, bernoulli({0.5, 0.5}), 1); }), ErrorCode::InfeasibleSupport);
}

TEST(LiftConstraints, BadOrder) {
  EXPECT_EQ(code_of([] { build_lift_constraints(four_to_two(), bernoulli({0.3, 0.7}), 0); }), ErrorCode::InvalidArgument);
}

TEST(Solve, FourToTwoIsLogTwo) {
  const auto nu = bernoulli({0.3, 0.7});
  const auto s = solve_mmre(build_lift_constraints(four_to_two(), nu, 1));
  ASSERT_TRUE(s.converged);
  EXPECT_NEAR(s.h_rel, std::log(2.0), 1e-6);
  const std::vector<double> q{0.15, 0.15, 0.35, 0.35};
  for (const auto& e : s.measure.host.edges())
    EXPECT_NEAR(s.measure.edge_freq[static_cast<std::size_t>(s.measure.host.edge_index(e.from, e.to))],
                q[static_cast<std::size_t>(e.from)] * q[static_cast<std::size_t>(e.to)], 1e-8);
  EXPECT_LE(lift_error(s, four_to_two(), nu), 1e-8);
  EXPECT_LE(s.feasibility_residual, 1e-8);
  EXPECT_LE(s.h_rel, s.upper_bound + 1e-8);
  EXPECT_NEAR(s.upper_bound, std::log(4.0) - oracle::h(0.3), 1e-9);
}

TEST(Solve, CraftedFirstOrderMatchesGridSearch) {
  const auto nu = bernoulli({0.5, 0.5});
  const auto s = solve_mmre(build_lift_constraints(crafted(), nu, 1));
  ASSERT_TRUE(s.converged);
  EXPECT_NEAR(s.h_rel, crafted_grid_optimum(0.5), 1e-7);
  EXPECT_LE(s.rho_lower, s.h_rel + 1e-8);
  EXPECT_GE(s.rho_upper, s.h_rel - 1e-8);
}

TEST(Solve, BeatsRandomChallengers) {
  std::mt19937_64 rng(21);
  for (double p : {0.3, 0.5, 0.8}) {
    const auto nu = bernoulli({p, 1 - p});
    for (int m = 1; m <= 2; ++m) {
      const auto s = solve_mmre(build_lift_constraints(crafted(), nu, m));
      EXPECT_LE(lift_error(s, crafted(), nu), 1e-8);
      EXPECT_GE(s.h_rel, -1e-8);
      EXPECT_LE(s.objective, topological_entropy(crafted().source) + 1e-8);
      for (int t = 0; t < 30; ++t) {
        const auto c = random_lift(crafted(), nu, rng);
        EXPECT_GE(s.h_rel, relative_entropy(c, nu, crafted()) - 2e-8);
      }
    }
  }
}

TEST(Solve, Deterministic) {
  const auto nu = bernoulli({0.8, 0.2});
  const auto a = solve_mmre(build_lift_constraints(crafted(), nu, 2));
  const auto b = solve_mmre(build_lift_constraints(crafted(), nu, 2));
  EXPECT_EQ(a.measure.edge_freq, b.measure.edge_freq);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solve, MaxIterationsLeavesUnconverged) {
  const auto s = solve_mmre(build_lift_constraints(crafted(), bernoulli({0.5, 0.5}), 2), 1e-14, 3);
  EXPECT_FALSE(s.converged);
  EXPECT_EQ(s.iterations, 3);
}

TEST(Objective, ConcaveAlongSegments) {
  std::mt19937_64 rng(22);
  const auto nu = bernoulli({0.6, 0.4});
  for (int t = 0; t < 50; ++t) {
    const auto a = random_lift(crafted(), nu, rng), b = random_lift(crafted(), nu, rng);
    for (double l : {0.25, 0.5, 0.75}) {
      std::vector<double> q(a.edge_freq.size());
      for (std::size_t e = 0; e < q.size(); ++e) q[e] = l * a.edge_freq[e] + (1 - l) * b.edge_freq[e];
      EXPECT_GE(entropy_rate(make_measure(a.host, q)), l * entropy_rate(a) + (1 - l) * entropy_rate(b) - 1e-10);
    }
  }
}

TEST(Sweep, IdentityAllZero) {
  const auto nu = bernoulli({0.3, 0.7});
  for (const auto& pt : order_sweep(identity_code(nu.host), nu, 3)) EXPECT_NEAR(pt.h_rel, 0.0, 1e-9);
}

TEST(Sweep, UniformFibresConstant) {
  for (const auto& pt : order_sweep(four_to_two(), bernoulli({0.3, 0.7}), 3)) {
    EXPECT_NEAR(pt.h_rel, std::log(2.0), 1e-6);
    EXPECT_TRUE(pt.converged);
  }
}

TEST(Sweep, CraftedStrictlyIncreases) {
  const auto pts = order_sweep(crafted(), bernoulli({0.5, 0.5}), 3);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_GT(pts[1].h_rel, pts[0].h_rel + 1e-4);
  EXPECT_GE(pts[2].h_rel, pts[1].h_rel - 2e-8);
}

TEST(Sweep, RandomInstancesAreMonotone) {
  std::mt19937_64 rng(23);
  int done = 0;
  for (int trial = 0; trial < 200 && done < 20; ++trial) {
    Sft x;
    try {
      x = Sft::from_indices(oracle::labels(4), oracle::random_edges(4, 0.6, rng));
    } catch (const Error&) {
      continue;
    }
    if (x.size() != 4 || !is_irreducible(x)) continue;
    std::vector<int> map(4);
    for (auto& s : map) s = static_cast<int>(rng() % 2);
    const auto code = validate_code_indices(x, full_shift(2), map);
    if (!code.symbol_surjective) continue;
    const auto nu = bernoulli({0.45, 0.55});
    std::vector<SweepPoint> pts;
    try {
      pts = order_sweep(code, nu, 3);
    } catch (const Error& e) {
      // ν may have no lift through this code at all.
      EXPECT_TRUE(e.code() == ErrorCode::Infeasible || e.code() == ErrorCode::InfeasibleSupport) << to_string(e.code());
      continue;
    }
    for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GE(pts[i].h_rel, pts[i - 1].h_rel - 2e-8);
    ++done;
  }
  EXPECT_GE(done, 10);
}

TEST(Sweep, BadMax) { EXPECT_EQ(code_of([] { order_sweep(four_to_two(), bernoulli({0.5, 0.5}), 0); }), ErrorCode::InvalidArgument); }
