#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "relent/skew_standard.hpp"

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

constexpr double kTau = 2.0 * std::numbers::pi;

const SkewStandardSystem& sys4() {
  static const SkewStandardSystem s(4.0);
  return s;
}
const Strips& strips4() {
  static const Strips s = find_strips(4.0);
  return s;
}

/// Forward iteration from (t, 0) stays on the itinerary.
bool follows(double t, const BasePoint& w0, const std::vector<int>& r) {
  Torus x{t, 0.0};
  BasePoint w = w0;
  for (std::size_t l = 0; l < r.size(); ++l) {
    if (!strips4()[r[l]].contains(x[0])) return false;
    x = evaluate(sys4(), w.value(), x);
    w = w.next();
  }
  return true;
}

}  // namespace

TEST(Evaluate, Examples) {
  const SkewStandardSystem zero(0.0, FChoice::EpsSin, 0.0);
  EXPECT_EQ(evaluate(zero, {0.3, 0.7}, {0.0, 0.0}), (Torus{0.0, 0.0}));
  const auto j0 = fiber_jacobian(zero, {0.0, 0.0}, {0.0, 0.0});
  EXPECT_EQ(j0[0][0], 2.0);
  EXPECT_EQ(j0[0][1], -1.0);
  EXPECT_EQ(j0[1][0], 1.0);
  EXPECT_EQ(j0[1][1], 0.0);
  EXPECT_EQ(evaluate(sys4(), {0.0, 0.0}, {0.0, 0.0}), (Torus{0.0, 0.0}));
}

TEST(Evaluate, JacobianMatchesFiniteDifferencesAndHasUnitDeterminant) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (FChoice fc : {FChoice::Omega1, FChoice::EpsSin, FChoice::Mixed}) {
    const SkewStandardSystem s(4.0, fc, 0.1);
    for (int i = 0; i < 100; ++i) {
      const Torus w{u(rng), u(rng)}, x{u(rng), u(rng)};
      const auto j = fiber_jacobian(s, w, x);
      EXPECT_NEAR(j[0][0] * j[1][1] - j[0][1] * j[1][0], 1.0, 1e-12);
      const double h = 1e-6, fw = s.f(w);
      const double d1 = (s.lift(x[0] + h, x[1], fw) - s.lift(x[0] - h, x[1], fw)) / (2 * h);
      const double d2 = (s.lift(x[0], x[1] + h, fw) - s.lift(x[0], x[1] - h, fw)) / (2 * h);
      EXPECT_NEAR(j[0][0], d1, 1e-6);
      EXPECT_NEAR(j[0][1], d2, 1e-6);
      const auto img = evaluate(s, w, x);
      EXPECT_GE(img[0], 0.0);
      EXPECT_LT(img[0], 1.0);
      EXPECT_EQ(img[1], x[0]);
      EXPECT_GE(s.f(w), 0.0);
      EXPECT_LT(s.f(w), 1.0);
    }
  }
}

TEST(Evaluate, FChoices) {
  EXPECT_EQ(parse_f_choice("mixed"), FChoice::Mixed);
  EXPECT_EQ(to_string(parse_f_choice("eps_sin")), "eps_sin");
  EXPECT_EQ(code_of([] { parse_f_choice("nope"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { SkewStandardSystem(-1.0); }), ErrorCode::InvalidArgument);
  const auto& m = SkewStandardSystem::base_matrix;
  EXPECT_EQ(m[0][0] * m[1][1] - m[0][1] * m[1][0], 1);
}

TEST(BaseOrbit, ExactOnDyadicLattice) {
  // (1/16, 3/8) and its images are dyadic, so doubles carry the cat map exactly.
  BasePoint w = BasePoint::from_torus({0.0625, 0.375});
  double a = 0.0625, b = 0.375;
  for (int i = 0; i < 40; ++i) {
    EXPECT_EQ(w.value()[0], a);
    EXPECT_EQ(w.value()[1], b);
    const double na = wrap01(2 * a + b), nb = wrap01(a + b);
    a = na;
    b = nb;
    w = w.next();
  }
  // Period of the cat map on the 16-torus lattice point is finite; the orbit returns exactly.
  const BasePoint start = BasePoint::from_torus({0.0625, 0.375});
  BasePoint p = start.next();
  int period = 1;
  while (!(p.a == start.a && p.b == start.b) && period < 1000) p = p.next(), ++period;
  EXPECT_LT(period, 1000);
}

TEST(Strips, ClosedFormAtK4) {
  const auto& s = strips4();
  const double a1 = std::asin(11.0 / (kTau * 4)) / kTau, a2 = std::asin(7.0 / (kTau * 4)) / kTau;
  EXPECT_NEAR(s.j1.max_lo, a1, 1e-12);
  EXPECT_NEAR(s.j1.max_hi, 0.5 - a1, 1e-12);
  EXPECT_NEAR(s.j2.max_lo, 0.5 + a2, 1e-12);
  EXPECT_NEAR(s.j2.max_hi, 1.0 - a2, 1e-12);
  // The length-1/3 strips sit inside the rounded maximal intervals.
  EXPECT_GE(s.j1.lo, 0.0722);
  EXPECT_LE(s.j1.hi, 0.4278);
  EXPECT_GE(s.j2.lo, 0.5450);
  EXPECT_LE(s.j2.hi, 0.9550);
  EXPECT_NEAR(s.j1.max_lo, 0.072099, 1e-6);
  EXPECT_NEAR(s.j2.max_lo, 0.544922, 1e-6);
  for (const Strip* st : {&s.j1, &s.j2}) {
    EXPECT_NEAR(st->length(), 1.0 / 3.0, 1e-15);
    EXPECT_GE(st->lo, st->max_lo);
    EXPECT_LE(st->hi, st->max_hi);
    EXPECT_GT(st->min_margin, st->lipschitz_gap);
  }
  EXPECT_LT(s.j1.hi, s.j2.lo);
}

TEST(Strips, ExpansionOnDenseGrid) {
  for (double k : {4.0, 7.0, 100.0}) {
    const auto s = find_strips(k);
    for (const Strip* st : {&s.j1, &s.j2})
      for (int i = 0; i <= 100000; ++i) {
        const double x = st->lo + st->length() * i / 100000.0;
        ASSERT_GE(std::abs(2 - kTau * k * std::sin(kTau * x)), 9.0);
      }
  }
}

TEST(Strips, SmallKHasNone) {
  EXPECT_EQ(code_of([] { find_strips(1.0); }), ErrorCode::NoStrip);
  EXPECT_EQ(code_of([] { find_strips(0.3); }), ErrorCode::NoStrip);
}

TEST(Strips, LargeK) {
  const auto s = find_strips(100.0);
  EXPECT_GT(s.j1.max_hi - s.j1.max_lo, 0.4);
  EXPECT_GT(s.j2.max_hi - s.j2.max_lo, 0.4);
  EXPECT_EQ(code_of([&] { (void)s[3]; }), ErrorCode::BadTarget);
}

TEST(GraphTransform, FlatBandSlopeMatchesFormula) {
  const auto& s = strips4();
  for (int tgt : {1, 2}) {
    const auto out = graph_transform(sys4(), s, {0.0, 0.0}, flat_band(s, 1), tgt);
    EXPECT_LE(out.slope, 1.0 / 8);
    // h(s) solves 2h + k cos 2πh = s + n, so h′ = 1/(2 − 2πk sin 2πh).
    for (std::size_t i = 0; i + 1 < out.t.size(); i += 17) {
      const double dd = (out.g[i + 1] - out.g[i]) / (out.t[i + 1] - out.t[i]);
      const double hm = 0.5 * (out.g[i] + out.g[i + 1]);
      EXPECT_NEAR(dd, 1.0 / sys4().d(hm), 1e-6);
      EXPECT_TRUE(s.j1.contains(out.g[i]));
    }
  }
}

TEST(GraphTransform, FiveCompositionsStayFlat) {
  const auto& s = strips4();
  BasePoint w = BasePoint::random(3, 0);
  GraphBand band = flat_band(s, 2, 0.4);
  for (int i = 0; i < 5; ++i) {
    band = graph_transform(sys4(), s, w.value(), band, 1 + i % 2);
    EXPECT_LE(band.slope, 1.0 / 8);
    EXPECT_LE(band_slope(band.t, band.g), 1.0 / 8);
    w = w.next();
  }
}

TEST(GraphTransform, Errors) {
  const auto& s = strips4();
  const auto band = flat_band(s, 1);
  EXPECT_EQ(code_of([&] { graph_transform(sys4(), s, {0, 0}, band, 3); }), ErrorCode::BadTarget);
  EXPECT_EQ(code_of([&] { graph_transform(sys4(), s, {0, 0}, band, 1, 99); }), ErrorCode::BranchSelectionAmbiguous);
  GraphBand steep = band;
  for (std::size_t i = 0; i < steep.g.size(); ++i) steep.g[i] = 3.0 * steep.t[i];
  EXPECT_EQ(code_of([&] { graph_transform(sys4(), s, {0, 0}, steep, 1); }), ErrorCode::MonotonicityViolated);
  GraphBand sparse = band;
  sparse.t.resize(100);
  sparse.g.resize(100);
  EXPECT_EQ(code_of([&] { graph_transform(sys4(), s, {0, 0}, sparse, 1); }), ErrorCode::InvalidArgument);
}

TEST(GraphTransform, EveryBranchIsUsable) {
  const auto& s = strips4();
  int count = 0;
  for (int b = 0; b < 10; ++b) {
    try {
      const auto out = graph_transform(sys4(), s, {0.2, 0.1}, flat_band(s, 1), 2, b);
      EXPECT_LE(out.slope, 1.0 / 8);
      ++count;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::BranchSelectionAmbiguous);
    }
  }
  // The image of a strip wraps at least twice across the other one.
  EXPECT_GE(count, 2);
}

TEST(Shadow, ZeroHorizonIsTheWholeStrip) {
  for (int r : {1, 2}) {
    const auto res = shadow(sys4(), strips4(), BasePoint{}, {r});
    EXPECT_NEAR(res.width, 1.0 / 3.0, 1e-12);
    EXPECT_TRUE(strips4()[r].contains(res.t0));
  }
}

TEST(Shadow, ConstantItineraryContracts) {
  ShadowOptions opt;
  opt.prefix_widths = true;
  const std::vector<int> r(12, 1);
  const auto res = shadow(sys4(), strips4(), BasePoint::random(5, 0), r, opt);
  ASSERT_EQ(res.prefix_widths.size(), 12u);
  EXPECT_NEAR(res.prefix_widths[0], 1.0 / 3.0, 1e-12);
  for (std::size_t l = 1; l < res.prefix_widths.size(); ++l)
    EXPECT_LE(res.prefix_widths[l], res.prefix_widths[l - 1] / 8 * (1 + 1e-9));
  EXPECT_LE(res.width, std::pow(8.0, -11) / 3);
  EXPECT_TRUE(res.forward_ok);
}

TEST(Shadow, RandomItinerariesPassForwardCheck) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> r(30);
    for (int& x : r) x = 1 + static_cast<int>(rng() % 2);
    const auto res = shadow(sys4(), strips4(), BasePoint::random(6, static_cast<std::uint64_t>(trial)), r);
    EXPECT_TRUE(res.forward_ok);
    EXPECT_EQ(res.verified, 29);
    EXPECT_LE(res.max_residual, 1e-9);
    for (std::size_t l = 0; l < r.size(); ++l) EXPECT_TRUE(strips4()[r[l]].contains(res.orbit[l]));
  }
}

TEST(Shadow, WidthMatchesDirectScan) {
  // The component of {t : forward orbit follows r} around t₀, found by bracketing and bisection.
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> r(4);
    for (int& x : r) x = 1 + static_cast<int>(rng() % 2);
    const BasePoint w = BasePoint::random(7, static_cast<std::uint64_t>(trial));
    const auto res = shadow(sys4(), strips4(), w, r);
    ASSERT_TRUE(follows(res.t0, w, r));
    auto edge = [&](double dir) {
      double in = res.t0, step = res.width / 64;
      double out = in + dir * step;
      while (follows(out, w, r)) in = out, out += dir * step;
      for (int i = 0; i < 60; ++i) {
        const double m = 0.5 * (in + out);
        (follows(m, w, r) ? in : out) = m;
      }
      return in;
    };
    const double width = edge(1.0) - edge(-1.0);
    EXPECT_NEAR(width, res.width, 1e-9 * std::max(1.0, res.width * 1e6)) << "trial " << trial;
    EXPECT_NEAR(width / res.width, 1.0, 1e-6);
  }
}

TEST(Shadow, BadItinerary) {
  EXPECT_EQ(code_of([] { shadow(sys4(), strips4(), BasePoint{}, {}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { shadow(sys4(), strips4(), BasePoint{}, {1, 3}); }), ErrorCode::BadTarget);
}

TEST(Certificate, DepthOneIsTrivial) {
  const auto c = certify_relative_entropy(sys4(), 1);
  EXPECT_TRUE(c.issued);
  EXPECT_EQ(c.sequences, 2u);
  EXPECT_NEAR(c.bound, std::log(2.0), 1e-15);
}

TEST(Certificate, DepthEightAtK4) {
  CertifyOptions opt;
  opt.seed = 11;
  const auto c = certify_relative_entropy(sys4(), 8, opt);
  EXPECT_TRUE(c.issued) << c.failure;
  EXPECT_EQ(c.sequences, 256u);
  EXPECT_EQ(c.verified, 256u * 9);
  EXPECT_LE(c.max_width, c.width_bound);
  EXPECT_LE(c.max_graph_slope, 1.0 / 8);
  EXPECT_EQ(c.omegas.size(), 9u);
  EXPECT_FALSE(c.transcript.empty());
}

TEST(Certificate, ThreadsDoNotChangeTheCertificate) {
  CertifyOptions a, b;
  a.seed = b.seed = 4;
  b.threads = 3;
  const auto ca = certify_relative_entropy(sys4(), 6, a), cb = certify_relative_entropy(sys4(), 6, b);
  EXPECT_EQ(ca.transcript, cb.transcript);
  EXPECT_EQ(ca.max_width, cb.max_width);
}

TEST(Certificate, Errors) {
  EXPECT_EQ(code_of([] { certify_relative_entropy(SkewStandardSystem(1.0), 4); }), ErrorCode::NoStrip);
  EXPECT_EQ(code_of([] { certify_relative_entropy(sys4(), 0); }), ErrorCode::InvalidArgument);
}

TEST(Lyapunov, BaseExponents) {
  const auto b = base_lyapunov(sys4());
  EXPECT_NEAR(b.plus, std::log((3 + std::sqrt(5.0)) / 2), 1e-14);
  EXPECT_NEAR(b.minus, -std::log((3 + std::sqrt(5.0)) / 2), 1e-14);
  EXPECT_NEAR(b.plus, 0.9624, 1e-4);
}

TEST(Lyapunov, UnperturbedFibreIsParabolic) {
  const SkewStandardSystem zero(0.0, FChoice::EpsSin, 0.0);
  const auto l = fiber_lyapunov(zero, BasePoint::random(1, 0), {0.1, 0.2}, 100000);
  EXPECT_NEAR(l.plus, 0.0, 1e-3);
  EXPECT_NEAR(l.minus, 0.0, 1e-3);
}

TEST(Lyapunov, ShadowedHorseshoeOrbit) {
  std::mt19937_64 rng(34);
  std::vector<int> r(10000);
  for (int& x : r) x = 1 + static_cast<int>(rng() % 2);
  const auto orbit = shadow_orbit(sys4(), strips4(), BasePoint::random(9, 0), r);
  ASSERT_EQ(orbit.size(), r.size());
  const auto l = fiber_lyapunov_along(sys4(), orbit);
  EXPECT_GE(l.plus, std::log(8.0) - 0.1);
  EXPECT_NEAR(l.plus + l.minus, 0.0, 0.02);
  const auto v = hyperbolicity(l, base_lyapunov(sys4()), 0.5);
  EXPECT_TRUE(v.hyperbolic);
  EXPECT_TRUE(v.both_signs);
}

TEST(Lyapunov, ForwardOrbitSumsToZero) {
  const auto l = fiber_lyapunov(sys4(), BasePoint::random(2, 0), {0.3, 0.6}, 20000);
  EXPECT_NEAR(l.plus + l.minus, 0.0, 0.02);
  EXPECT_GT(l.plus, 0.0);
}

TEST(Lyapunov, VerdictNeedsBothSignsAndMagnitude) {
  const LyapunovPair base{0.96, -0.96, 0};
  EXPECT_FALSE(hyperbolicity({0.0, 0.0, 0}, base, 0.1).hyperbolic);
  EXPECT_TRUE(hyperbolicity({2.0, -2.0, 0}, base, 0.5).hyperbolic);
  EXPECT_FALSE(hyperbolicity({2.0, -2.0, 0}, base, 1.0).hyperbolic);
}

TEST(Lyapunov, TooFewSteps) {
  EXPECT_EQ(code_of([] { fiber_lyapunov(sys4(), BasePoint{}, {0, 0}, 10); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { fiber_lyapunov_along(sys4(), std::vector<double>(10, 0.2)); }), ErrorCode::InvalidArgument);
}
