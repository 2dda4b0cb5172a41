#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "relent/errors.hpp"
#include "relent/parallel.hpp"
#include "relent/rng.hpp"

namespace relent {

using Torus = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

inline double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

/// Distance on the circle.
inline double circle_dist(double a, double b) {
  const double d = std::abs(wrap01(a) - wrap01(b));
  return std::min(d, 1.0 - d);
}

/// Point of 𝕋² with coordinates a/2⁶⁴, b/2⁶⁴. The cat map (2,1;1,1) acts exactly
/// on this lattice through unsigned wraparound.
struct BasePoint {
  std::uint64_t a = 0;
  std::uint64_t b = 0;

  Torus value() const { return {static_cast<double>(a) * 0x1p-64, static_cast<double>(b) * 0x1p-64}; }
  BasePoint next() const { return {2 * a + b, a + b}; }

  static BasePoint from_torus(const Torus& w) {
    auto q = [](double x) {
      const long double s = static_cast<long double>(wrap01(x)) * 0x1p64L;
      return s >= 0x1p64L ? std::uint64_t{0} : static_cast<std::uint64_t>(s);
    };
    return {q(w[0]), q(w[1])};
  }
  static BasePoint random(std::uint64_t seed, std::uint64_t stream) {
    CounterRng r(seed, stream);
    return {r.next_u64(), r.next_u64()};
  }
};

enum class FChoice { Omega1, EpsSin, Mixed };

inline FChoice parse_f_choice(const std::string& s) {
  if (s == "omega1") return FChoice::Omega1;
  if (s == "eps_sin") return FChoice::EpsSin;
  if (s == "mixed") return FChoice::Mixed;
  throw Error(ErrorCode::InvalidArgument, "unknown f choice '" + s + "' (omega1, eps_sin, mixed)");
}

inline std::string to_string(FChoice f) {
  switch (f) {
    case FChoice::Omega1: return "omega1";
    case FChoice::EpsSin: return "eps_sin";
    case FChoice::Mixed: return "mixed";
  }
  return "?";
}

/// Θ_k(ω, x) = (Aω, T_ω x), T_ω(x₁, x₂) = (2x₁ − x₂ + k cos 2πx₁ + f(ω), x₁) mod 1.
struct SkewStandardSystem {
  double k = 4.0;
  FChoice f_choice = FChoice::Omega1;
  double eps = 0.0;
  static constexpr std::array<std::array<int, 2>, 2> base_matrix{{{2, 1}, {1, 1}}};

  SkewStandardSystem() = default;
  SkewStandardSystem(double k_, FChoice f = FChoice::Omega1, double e = 0.0) : k(k_), f_choice(f), eps(e) {
    if (!(k_ >= 0.0)) throw Error(ErrorCode::InvalidArgument, "k must be >= 0");
    if (!(e >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ε must be >= 0");
  }

  double f(const Torus& w) const {
    constexpr double tau = 2.0 * std::numbers::pi;
    switch (f_choice) {
      case FChoice::Omega1: return wrap01(w[0]);
      case FChoice::EpsSin: return wrap01(eps * std::sin(tau * w[0]));
      case FChoice::Mixed: return wrap01(2.0 * w[0] + eps * std::sin(tau * w[1]));
    }
    return 0.0;
  }

  /// ∂x₁′/∂x₁ = 2 − 2πk sin 2πx₁
  double d(double x1) const {
    constexpr double tau = 2.0 * std::numbers::pi;
    return 2.0 - tau * k * std::sin(tau * x1);
  }

  /// Unreduced first coordinate 2x₁ − x₂ + k cos 2πx₁ + f.
  double lift(double x1, double x2, double fw) const {
    return 2.0 * x1 - x2 + k * std::cos(2.0 * std::numbers::pi * x1) + fw;
  }
};

inline Torus evaluate(const SkewStandardSystem& s, const Torus& w, const Torus& x) {
  return {wrap01(s.lift(x[0], x[1], s.f(w))), wrap01(x[0])};
}

inline Mat2 fiber_jacobian(const SkewStandardSystem& s, const Torus& /*w*/, const Torus& x) {
  return {{{s.d(x[0]), -1.0}, {1.0, 0.0}}};
}

// ---------------------------------------------------------------------------
// Strips

inline constexpr double kStripLength = 1.0 / 3.0;
inline constexpr double kExpansion = 9.0;
inline constexpr int kStripGrid = 10000;

struct Strip {
  int index = 1;
  double lo = 0.0;
  double hi = 0.0;
  double max_lo = 0.0;  // maximal interval on which the bound holds
  double max_hi = 0.0;
  double min_margin = 0.0;    // min over the grid of |2 − 2πk sin 2πx| − 9
  double lipschitz_gap = 0.0; // 4π²k · spacing / 2
  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct Strips {
  Strip j1;
  Strip j2;
  const Strip& operator[](int i) const {
    if (i == 1) return j1;
    if (i == 2) return j2;
    throw Error(ErrorCode::BadTarget, "strip index must be 1 or 2, got " + std::to_string(i));
  }
};

/// J₁ from sin 2πx ≥ 11/(2πk), J₂ from sin 2πx ≤ −7/(2πk), each shrunk about its
/// centre to length 1/3 and certified on a grid with the Lipschitz bound 4π²k.
inline Strips find_strips(double k) {
  constexpr double tau = 2.0 * std::numbers::pi;
  if (!(k > 0.0)) throw Error(ErrorCode::NoStrip, "k must be positive");
  const double c1 = 11.0 / (tau * k), c2 = 7.0 / (tau * k);
  if (c1 > 1.0)
    throw Error(ErrorCode::NoStrip, "sin 2πx ≥ " + std::to_string(c1) + " has no solution; max available length 0");
  Strips s;
  const double a1 = std::asin(c1) / tau, a2 = std::asin(std::min(c2, 1.0)) / tau;
  s.j1 = {1, 0, 0, a1, 0.5 - a1, 0, 0};
  s.j2 = {2, 0, 0, 0.5 + a2, 1.0 - a2, 0, 0};
  for (Strip* st : {&s.j1, &s.j2}) {
    const double len = st->max_hi - st->max_lo;
    if (len < kStripLength)
      throw Error(ErrorCode::NoStrip, "strip " + std::to_string(st->index) + " has max available length " + std::to_string(len));
    const double c = 0.5 * (st->max_lo + st->max_hi);
    st->lo = c - kStripLength / 2;
    st->hi = c + kStripLength / 2;
    const double h = (st->hi - st->lo) / kStripGrid;
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kStripGrid; ++i) {
      const double x = i == kStripGrid ? st->hi : st->lo + h * i;
      margin = std::min(margin, std::abs(2.0 - tau * k * std::sin(tau * x)) - kExpansion);
    }
    st->min_margin = margin;
    st->lipschitz_gap = 4.0 * std::numbers::pi * std::numbers::pi * k * h / 2.0;
    if (margin < st->lipschitz_gap)
      throw Error(ErrorCode::NoStrip, "expansion bound not certified on strip " + std::to_string(st->index));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Graph transform

inline constexpr std::size_t kMinBandNodes = 256;

/// Graph x₂ = g(x₁) over a strip, sampled at N+1 equally spaced nodes and read
/// piecewise linearly in between. Values are real lifts of circle points.
struct GraphBand {
  int strip = 1;
  std::vector<double> t;
  std::vector<double> g;
  double slope = 0.0;

  double at(double x) const {
    const double h = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    auto i = static_cast<std::size_t>(std::clamp((x - t.front()) / h, 0.0, static_cast<double>(t.size() - 2)));
    const double u = (x - t[i]) / (t[i + 1] - t[i]);
    return g[i] + u * (g[i + 1] - g[i]);
  }
};

inline double band_slope(const std::vector<double>& t, const std::vector<double>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) s = std::max(s, std::abs((g[i + 1] - g[i]) / (t[i + 1] - t[i])));
  return s;
}

inline GraphBand flat_band(const Strips& strips, int strip, double value = 0.0, std::size_t n = kMinBandNodes) {
  const Strip& j = strips[strip];
  GraphBand b;
  b.strip = strip;
  for (std::size_t i = 0; i <= n; ++i) {
    b.t.push_back(i == n ? j.hi : j.lo + (j.hi - j.lo) * static_cast<double>(i) / static_cast<double>(n));
    b.g.push_back(value);
  }
  return b;
}

/// Image of the band under T_ω, read back as a graph over strip `target`. The
/// branch index counts valid lifts from the left (smallest x₂); default 0.
inline GraphBand graph_transform(const SkewStandardSystem& sys, const Strips& strips, const Torus& w,
                                 const GraphBand& band, int target, std::optional<int> branch = std::nullopt) {
  if (target != 1 && target != 2) throw Error(ErrorCode::BadTarget, "target strip must be 1 or 2");
  if (band.t.size() < kMinBandNodes + 1) throw Error(ErrorCode::InvalidArgument, "band needs at least 257 nodes");
  const Strip& src = strips[band.strip];
  const Strip& dst = strips[target];
  const double in_slope = band_slope(band.t, band.g);
  if (in_slope > 1.0) throw Error(ErrorCode::MonotonicityViolated, "input band slope exceeds 1");
  const double fw = sys.f(w);
  auto phi = [&](double t) { return sys.lift(t, band.at(t), fw); };
  // Monotonicity across the band: |Δφ| ≥ 8 Δt between nodes, one sign throughout.
  const double sign = phi(band.t.back()) > phi(band.t.front()) ? 1.0 : -1.0;
  for (std::size_t i = 0; i + 1 < band.t.size(); ++i) {
    const double dphi = sign * (phi(band.t[i + 1]) - phi(band.t[i]));
    if (dphi < (kExpansion - 1.0) * (band.t[i + 1] - band.t[i]) * (1.0 - 1e-12))
      throw Error(ErrorCode::MonotonicityViolated, "φ not uniformly monotone at node " + std::to_string(i));
  }
  const double pmin = std::min(phi(src.lo), phi(src.hi)), pmax = std::max(phi(src.lo), phi(src.hi));
  const auto n_lo = static_cast<long>(std::ceil(pmin - dst.lo)), n_hi = static_cast<long>(std::floor(pmax - dst.hi));
  if (n_hi < n_lo) throw Error(ErrorCode::MonotonicityViolated, "image does not cross the target strip");
  const long count = n_hi - n_lo + 1;
  const int b = branch.value_or(0);
  if (b < 0 || b >= count)
    throw Error(ErrorCode::BranchSelectionAmbiguous,
                "branch " + std::to_string(b) + " requested, " + std::to_string(count) + " available");
  // Leftmost in x₂: smallest n when φ increases, largest when it decreases.
  const long n = sign > 0 ? n_lo + b : n_hi - b;
  GraphBand out;
  out.strip = target;
  const std::size_t nodes = band.t.size();
  for (std::size_t q = 0; q < nodes; ++q) {
    const double s = q + 1 == nodes ? dst.hi : dst.lo + (dst.hi - dst.lo) * static_cast<double>(q) / static_cast<double>(nodes - 1);
    const double goal = s + static_cast<double>(n);
    double a = src.lo, c = src.hi;
    while (c - a > 1e-12) {
      const double m = 0.5 * (a + c);
      if (sign * (phi(m) - goal) < 0) a = m;
      else c = m;
    }
    out.t.push_back(s);
    out.g.push_back(0.5 * (a + c));
  }
  out.slope = band_slope(out.t, out.g);
  if (out.slope > 1.0 / (kExpansion - 1.0))
    throw Error(ErrorCode::MonotonicityViolated, "output slope " + std::to_string(out.slope) + " exceeds 1/8");
  return out;
}

// ---------------------------------------------------------------------------
// Shadowing

/// Base orbit ω, Aω, A²ω, … as exact lattice points.
inline std::vector<BasePoint> base_orbit(BasePoint w, std::size_t n) {
  std::vector<BasePoint> o;
  o.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    o.push_back(w);
    w = w.next();
  }
  return o;
}

struct ShadowResult {
  double t0 = 0.0;        // x₁ of the start point (t₀, 0)
  double width = 0.0;     // length of the parameter set 𝒯_H
  double log_width = 0.0;
  int horizon = 0;        // H = |r| − 1
  int verified = -1;      // steps whose forward image was re-checked
  bool forward_ok = false;
  double max_residual = 0.0;
  int pure_forward_horizon = 0;  // steps a plain forward iteration stays on itinerary
  std::vector<double> orbit;     // x₀..x_H of the midpoint orbit
  std::vector<long> branches;    // integer lifts n_ℓ
  std::vector<double> prefix_widths;
};

struct ShadowOptions {
  bool prefix_widths = false;
  bool forward_check = true;
  int max_sweeps = 500;
};

namespace detail {

struct Bvp {
  const SkewStandardSystem& sys;
  const Strips& strips;
  const std::vector<int>& r;
  std::vector<double> f;   // f(ω_ℓ)
  std::vector<long> n;     // branch per ℓ < H
  int max_sweeps;

  int horizon() const { return static_cast<int>(r.size()) - 1; }
  const Strip& strip(int l) const { return strips[r[static_cast<std::size_t>(l)]]; }

  // Range of ψ(x) = 2x + k cos 2πx over a strip (ψ is monotone there).
  std::pair<double, double> psi_range(const Strip& s) const {
    const double a = sys.lift(s.lo, 0.0, 0.0), b = sys.lift(s.hi, 0.0, 0.0);
    return {std::min(a, b), std::max(a, b)};
  }

  void choose_branches() {
    const int h = horizon();
    n.assign(static_cast<std::size_t>(std::max(h, 0)), 0);
    for (int l = 0; l < h; ++l) {
      const Strip& next = strip(l + 1);
      double a = next.lo, b = next.hi;
      if (l > 0) {
        a += strip(l - 1).lo;
        b += strip(l - 1).hi;
      }
      const auto [cmin, cmax] = psi_range(strip(l));
      const double fl = f[static_cast<std::size_t>(l)];
      const long nl = static_cast<long>(std::ceil(cmin - a + fl));
      if (b + static_cast<double>(nl) - fl > cmax)
        throw Error(ErrorCode::EmptyIntersection, "no integer lift fits at step " + std::to_string(l));
      n[static_cast<std::size_t>(l)] = nl;
    }
  }

  // Solves 2x + k cos 2πx = rhs on the strip (safeguarded Newton).
  double invert(const Strip& s, double rhs, double guess) const {
    double a = s.lo, b = s.hi;
    const double fa = sys.lift(a, 0.0, 0.0) - rhs;
    const double sa = fa > 0 ? 1.0 : -1.0;
    double x = std::clamp(guess, a, b);
    for (int it = 0; it < 100; ++it) {
      const double fx = sys.lift(x, 0.0, 0.0) - rhs;
      if (fx == 0.0) return x;
      if ((fx > 0 ? 1.0 : -1.0) == sa) a = x;
      else b = x;
      double xn = x - fx / sys.d(x);
      if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
      if (std::abs(xn - x) <= 1e-17 || b - a <= 4 * std::numeric_limits<double>::epsilon()) return xn;
      x = xn;
    }
    return x;
  }

  // Newton on the whole tridiagonal system; false if an iterate leaves the strips.
  bool newton(std::vector<double>& x) const {
    const int h = horizon();
    const auto uh = static_cast<std::size_t>(h);
    std::vector<double> res(uh), diag(uh), cp(uh), dp(uh);
    for (int it = 0; it < 12; ++it) {
      double worst = 0.0;
      for (std::size_t l = 0; l < uh; ++l) {
        const double prev = l > 0 ? x[l - 1] : 0.0;
        res[l] = sys.lift(x[l], prev, f[l]) - static_cast<double>(n[l]) - x[l + 1];
        diag[l] = sys.d(x[l]);
        worst = std::max(worst, std::abs(res[l]));
      }
      if (worst <= 1e-15) return true;
      // J δ = −res with J = tridiag(−1, D, −1); Thomas elimination.
      for (std::size_t l = 0; l < uh; ++l) {
        const double den = diag[l] - (l > 0 ? cp[l - 1] : 0.0);
        cp[l] = 1.0 / den;
        dp[l] = (-res[l] + (l > 0 ? dp[l - 1] : 0.0)) / den;
      }
      double step = 0.0;
      for (std::size_t l = uh; l-- > 0;) {
        const double dl = dp[l] + (l + 1 < uh ? cp[l] * dp[l + 1] : 0.0);
        dp[l] = dl;
        x[l] += dl;
        step = std::max(step, std::abs(dl));
        if (!strip(static_cast<int>(l)).contains(x[l])) return false;
      }
      if (step <= 1e-16) return true;
    }
    return false;
  }

  // Orbit x₀..x_H with x_H = s.
  std::vector<double> solve(double s, std::vector<double> x = {}) const {
    const int h = horizon();
    auto mid = [&] {
      x.resize(static_cast<std::size_t>(h + 1));
      for (int l = 0; l <= h; ++l) x[static_cast<std::size_t>(l)] = 0.5 * (strip(l).lo + strip(l).hi);
    };
    if (x.size() != static_cast<std::size_t>(h + 1)) mid();
    x[static_cast<std::size_t>(h)] = s;
    std::vector<double> trial = x;
    if (newton(trial)) return trial;
    mid();
    x[static_cast<std::size_t>(h)] = s;
    double last = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double change = 0.0;
      for (int l = h - 1; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        const double prev = l > 0 ? x[ul - 1] : 0.0;
        const double rhs = prev + x[ul + 1] + static_cast<double>(n[ul]) - f[ul];
        const double nx = invert(strip(l), rhs, x[ul]);
        change = std::max(change, std::abs(nx - x[ul]));
        x[ul] = nx;
      }
      // Stop at rounding level: tiny, or no longer shrinking.
      if (change <= 4e-16 || (change < 1e-13 && change >= last)) break;
      last = change;
    }
    return x;
  }

  // log|∂x_H/∂x₀| along an orbit: ρ₀ = D₀, ρ_ℓ = D_ℓ − 1/ρ_{ℓ−1}.
  double log_gain(const std::vector<double>& x) const {
    double lg = 0.0, rho = 0.0;
    for (int l = 0; l < horizon(); ++l) {
      const double dl = sys.d(x[static_cast<std::size_t>(l)]);
      rho = l == 0 ? dl : dl - 1.0 / rho;
      lg += std::log(std::abs(rho));
    }
    return lg;
  }
  double sign_gain(const std::vector<double>& x) const {
    double sg = 1.0, rho = 0.0;
    for (int l = 0; l < horizon(); ++l) {
      const double dl = sys.d(x[static_cast<std::size_t>(l)]);
      rho = l == 0 ? dl : dl - 1.0 / rho;
      if (rho < 0) sg = -sg;
    }
    return sg;
  }
};

inline constexpr std::array<double, 6> kGlNodes{-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                                                0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
inline constexpr std::array<double, 6> kGlWeights{0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                                                  0.4679139345726910, 0.3607615730481386, 0.1713244923791704};

// log ∫_a^b exp(−log_gain(x(s))) ds on `pieces` equal subintervals.
inline double log_integral(const Bvp& p, double a, double b, int pieces = 4) {
  if (b <= a) return -std::numeric_limits<double>::infinity();
  std::vector<double> logs;
  std::vector<double> seed;
  const double h = (b - a) / pieces;
  for (int q = 0; q < pieces; ++q)
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
      const double s = a + h * (q + 0.5 * (kGlNodes[i] + 1.0));
      seed = p.solve(s, std::move(seed));
      logs.push_back(std::log(0.5 * h * kGlWeights[i]) - p.log_gain(seed));
    }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - mx);
  return mx + std::log(acc);
}

inline std::vector<double> base_f(const SkewStandardSystem& sys, BasePoint w, std::size_t n) {
  std::vector<double> f;
  f.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.push_back(sys.f(w.value()));
    w = w.next();
  }
  return f;
}

inline double shadow_log_width(const SkewStandardSystem& sys, const Strips& strips, BasePoint w, const std::vector<int>& r,
                               int max_sweeps) {
  Bvp p{sys, strips, r, base_f(sys, w, r.size()), {}, max_sweeps};
  p.choose_branches();
  const Strip& last = strips[r.back()];
  return log_integral(p, last.lo, last.hi);
}

}  // namespace detail

/// Realizes the strip itinerary r₀…r_H from a start point (t, 0): the orbit is the
/// solution of the boundary problem x₋₁ = 0, x_H = s, and 𝒯_H is swept by s ∈ J_{r_H}.
inline ShadowResult shadow(const SkewStandardSystem& sys, const Strips& strips, BasePoint w, const std::vector<int>& r,
                           const ShadowOptions& opt = {}) {
  if (r.empty()) throw Error(ErrorCode::InvalidArgument, "itinerary must have at least one symbol");
  for (int ri : r)
    if (ri != 1 && ri != 2) throw Error(ErrorCode::BadTarget, "itinerary symbols must be 1 or 2");
  detail::Bvp p{sys, strips, r, detail::base_f(sys, w, r.size()), {}, opt.max_sweeps};
  p.choose_branches();
  ShadowResult res;
  res.horizon = p.horizon();
  res.branches = p.n;
  const Strip& last = strips[r.back()];

  constexpr int pieces = 4;
  const double hp = (last.hi - last.lo) / pieces;
  std::array<double, pieces> piece_log{};
  for (int q = 0; q < pieces; ++q) piece_log[q] = detail::log_integral(p, last.lo + hp * q, last.lo + hp * (q + 1), 1);
  const double mx = *std::max_element(piece_log.begin(), piece_log.end());
  std::array<double, pieces> mass{};
  double total = 0.0;
  for (int q = 0; q < pieces; ++q) total += mass[q] = std::exp(piece_log[q] - mx);
  res.log_width = mx + std::log(total);
  res.width = std::exp(res.log_width);
  // Midpoint in the parameter t: the s splitting the integral in half, by Newton
  // inside the piece that holds the half-way mass (masses scaled by e^−mx).
  int q = 0;
  double before = 0.0;
  while (q + 1 < pieces && before + mass[q] < 0.5 * total) before += mass[q++];
  const double a = last.lo + hp * q;
  const double goal = 0.5 * total - before;
  double s = a + hp * std::clamp(goal / mass[q], 0.0, 1.0);
  std::vector<double> x;
  for (int it = 0; it < 40 && res.horizon > 0; ++it) {
    const double got = std::exp(detail::log_integral(p, a, s, 1) - mx);
    const double rel = (got - goal) / total;
    if (std::abs(rel) < 1e-10) break;
    x = p.solve(s, std::move(x));
    const double step = (got - goal) * std::exp(mx + p.log_gain(x));
    const double ns = std::clamp(s - step, a, a + hp);
    if (std::abs(ns - s) <= 1e-15) break;
    s = ns;
  }
  x = p.solve(s, std::move(x));
  res.orbit = x;
  res.t0 = x.front();

  if (opt.prefix_widths) {
    for (std::size_t l = 1; l <= r.size(); ++l) {
      std::vector<int> pre(r.begin(), r.begin() + static_cast<long>(l));
      res.prefix_widths.push_back(std::exp(detail::shadow_log_width(sys, strips, w, pre, opt.max_sweeps)));
    }
  }

  if (opt.forward_check) {
    // Stepwise: each recorded point maps onto the next, and every point sits in its strip.
    BasePoint wl = w;
    res.forward_ok = true;
    res.verified = -1;
    for (int l = 0; l <= res.horizon; ++l) {
      const double xl = x[static_cast<std::size_t>(l)];
      if (!strips[r[static_cast<std::size_t>(l)]].contains(xl)) {
        res.forward_ok = false;
        break;
      }
      if (l < res.horizon) {
        const Torus img = evaluate(sys, wl.value(), {xl, l > 0 ? x[static_cast<std::size_t>(l - 1)] : 0.0});
        const double err = std::max(circle_dist(img[0], x[static_cast<std::size_t>(l + 1)]), circle_dist(img[1], xl));
        res.max_residual = std::max(res.max_residual, err);
        if (err > 1e-9) {
          res.forward_ok = false;
          break;
        }
      }
      res.verified = l;
      wl = wl.next();
    }
    // Plain forward iteration from (t₀, 0), for information only.
    Torus pt{res.t0, 0.0};
    BasePoint wf = w;
    res.pure_forward_horizon = 0;
    for (int l = 0; l <= res.horizon; ++l) {
      if (!strips[r[static_cast<std::size_t>(l)]].contains(pt[0])) break;
      res.pure_forward_horizon = l + 1;
      pt = evaluate(sys, wf.value(), pt);
      wf = wf.next();
    }
  }
  return res;
}

/// Orbit x₀..x_H only, without width bookkeeping (long itineraries).
inline std::vector<double> shadow_orbit(const SkewStandardSystem& sys, const Strips& strips, BasePoint w,
                                        const std::vector<int>& r, int max_sweeps = 500) {
  detail::Bvp p{sys, strips, r, detail::base_f(sys, w, r.size()), {}, max_sweeps};
  p.choose_branches();
  const Strip& last = strips[r.back()];
  return p.solve(0.5 * (last.lo + last.hi));
}

// ---------------------------------------------------------------------------
// Certificate

struct Certificate {
  bool issued = false;
  double bound = 0.0;  // nats
  int depth = 0;
  std::size_t sequences = 0;          // per ω
  std::size_t verified = 0;           // total successful shadows
  std::vector<BasePoint> omegas;      // sampled ω first, then the random ones
  double max_width = 0.0;
  double width_bound = 0.0;           // (1/3)·8^−(L−1)
  double max_residual = 0.0;
  std::size_t graph_transform_calls = 0;
  double max_graph_slope = 0.0;
  std::vector<std::string> transcript;
  std::string failure;
};

struct CertifyOptions {
  int extra_omegas = 8;
  int threads = 1;
  std::uint64_t seed = 0;
  std::optional<BasePoint> omega;  // sampled ω; derived from the seed if absent
};

inline Certificate certify_relative_entropy(const SkewStandardSystem& sys, int depth, const CertifyOptions& opt = {}) {
  if (depth < 1 || depth > 24) throw Error(ErrorCode::InvalidArgument, "depth must lie in [1, 24]");
  const Strips strips = find_strips(sys.k);
  Certificate c;
  c.depth = depth;
  c.sequences = std::size_t{1} << depth;
  c.width_bound = kStripLength * std::pow(1.0 / (kExpansion - 1.0), depth - 1);
  c.omegas.push_back(opt.omega.value_or(BasePoint::random(opt.seed, 0)));
  for (int i = 0; i < opt.extra_omegas; ++i) c.omegas.push_back(BasePoint::random(opt.seed, static_cast<std::uint64_t>(i + 1)));
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return std::string(buf);
  };
  c.transcript.push_back("strips J1=[" + fmt(strips.j1.lo) + "," + fmt(strips.j1.hi) + "] J2=[" + fmt(strips.j2.lo) +
                         "," + fmt(strips.j2.hi) + "] margins " + fmt(strips.j1.min_margin) + " " +
                         fmt(strips.j2.min_margin));

  for (std::size_t oi = 0; oi < c.omegas.size(); ++oi) {
    const BasePoint w = c.omegas[oi];
    // Graph-transform chains along three itineraries, each call re-certified.
    for (int pattern = 0; pattern < 3; ++pattern) {
      GraphBand band = flat_band(strips, pattern == 1 ? 2 : 1);
      BasePoint wl = w;
      for (int l = 1; l < depth; ++l) {
        const int tgt = pattern == 0 ? 1 : pattern == 1 ? 2 : 1 + (l % 2);
        band = graph_transform(sys, strips, wl.value(), band, tgt);
        ++c.graph_transform_calls;
        c.max_graph_slope = std::max(c.max_graph_slope, band.slope);
        wl = wl.next();
      }
    }
    std::vector<ShadowResult> res(c.sequences);
    std::vector<std::string> err(c.sequences);
    parallel_for(c.sequences, opt.threads, [&](std::size_t code) {
      std::vector<int> r(static_cast<std::size_t>(depth));
      for (int l = 0; l < depth; ++l) r[static_cast<std::size_t>(l)] = 1 + static_cast<int>((code >> (depth - 1 - l)) & 1u);
      try {
        res[code] = shadow(sys, strips, w, r);
      } catch (const Error& e) {
        err[code] = e.what();
      }
    });
    std::size_t ok = 0;
    double wmax = 0.0;
    for (std::size_t q = 0; q < c.sequences; ++q) {
      if (!err[q].empty()) {
        if (c.failure.empty()) c.failure = "sequence " + std::to_string(q) + ": " + err[q];
        continue;
      }
      const auto& s = res[q];
      c.max_residual = std::max(c.max_residual, s.max_residual);
      wmax = std::max(wmax, s.width);
      if (s.forward_ok && s.verified == s.horizon && s.width > 0.0 && s.width <= c.width_bound) ++ok;
      else if (c.failure.empty())
        c.failure = "sequence " + std::to_string(q) + " width " + fmt(s.width) + (s.forward_ok ? "" : " forward check failed");
    }
    c.verified += ok;
    c.max_width = std::max(c.max_width, wmax);
    const auto v = w.value();
    c.transcript.push_back("omega " + std::to_string(oi) + " (" + fmt(v[0]) + "," + fmt(v[1]) + ") verified " +
                           std::to_string(ok) + "/" + std::to_string(c.sequences) + " max width " + fmt(wmax));
  }
  c.issued = c.failure.empty() && c.verified == c.sequences * c.omegas.size();
  c.bound = c.issued ? std::log(2.0) : 0.0;
  c.transcript.push_back(c.issued ? "bound h_top(Theta|P) >= log 2 = " + fmt(c.bound) + " (checked at sampled omegas only)"
                                  : "certificate void: " + c.failure);
  return c;
}

// ---------------------------------------------------------------------------
// Lyapunov exponents

struct LyapunovPair {
  double plus = 0.0;
  double minus = 0.0;
  std::size_t steps = 0;
};

inline constexpr int kReorthoEvery = 16;

namespace detail {

// Accumulates log growth of a 2×2 cocycle by QR every 16 steps. The second
// diagonal entry of R is |det|/‖first column‖, with det tracked factor by factor.
class QrAccumulator {
 public:
  void push(const Mat2& j) {
    Mat2 r{};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) r[a][b] = j[a][0] * m_[0][b] + j[a][1] * m_[1][b];
    m_ = r;
    det_ *= j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if (++since_ == kReorthoEvery) flush();
  }
  void flush() {
    if (since_ == 0) return;
    const double n1 = std::hypot(m_[0][0], m_[1][0]);
    if (!(n1 > 1e-300) || !std::isfinite(n1)) throw Error(ErrorCode::DegenerateOrbit, "first column collapsed");
    const double n2 = std::abs(det_) / n1;
    if (!(n2 > 1e-300) || !std::isfinite(n2)) throw Error(ErrorCode::DegenerateOrbit, "second direction collapsed");
    sum1_ += std::log(n1);
    sum2_ += std::log(n2);
    const double q1[2] = {m_[0][0] / n1, m_[1][0] / n1};
    const double sg = det_ < 0 ? -1.0 : 1.0;
    m_ = {{{q1[0], -sg * q1[1]}, {q1[1], sg * q1[0]}}};
    det_ = sg;
    since_ = 0;
  }
  LyapunovPair result(std::size_t steps) {
    flush();
    const double a = sum1_ / static_cast<double>(steps), b = sum2_ / static_cast<double>(steps);
    return {std::max(a, b), std::min(a, b), steps};
  }

 private:
  Mat2 m_{{{1.0, 0.0}, {0.0, 1.0}}};
  double det_ = 1.0;
  int since_ = 0;
  double sum1_ = 0.0, sum2_ = 0.0;
};

}  // namespace detail

inline constexpr std::size_t kMinLyapunovSteps = 1000;

/// Fibre exponents along the forward orbit of x over ω.
inline LyapunovPair fiber_lyapunov(const SkewStandardSystem& sys, BasePoint w, Torus x, std::size_t steps) {
  if (steps < kMinLyapunovSteps) throw Error(ErrorCode::InvalidArgument, "need at least 1000 steps");
  detail::QrAccumulator acc;
  for (std::size_t i = 0; i < steps; ++i) {
    const Torus wv = w.value();
    acc.push(fiber_jacobian(sys, wv, x));
    x = evaluate(sys, wv, x);
    w = w.next();
  }
  return acc.result(steps);
}

/// Fibre exponents along a given orbit x₀, x₁, … (first coordinates).
inline LyapunovPair fiber_lyapunov_along(const SkewStandardSystem& sys, const std::vector<double>& xs) {
  if (xs.size() < kMinLyapunovSteps) throw Error(ErrorCode::InvalidArgument, "need at least 1000 orbit points");
  detail::QrAccumulator acc;
  for (double x : xs) acc.push(fiber_jacobian(sys, {0.0, 0.0}, {x, 0.0}));
  return acc.result(xs.size());
}

/// ±log of the expanding eigenvalue of the cat matrix.
inline LyapunovPair base_lyapunov(const SkewStandardSystem&) {
  const auto& m = SkewStandardSystem::base_matrix;
  const double tr = m[0][0] + m[1][1], det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  const double l1 = 0.5 * (tr + disc), l2 = 0.5 * (tr - disc);
  return {std::log(std::abs(l1)), std::log(std::abs(l2)), 0};
}

struct HyperbolicityVerdict {
  bool hyperbolic = false;
  double min_abs = 0.0;
  bool both_signs = false;
};

inline HyperbolicityVerdict hyperbolicity(const LyapunovPair& fiber, const LyapunovPair& base, double chi) {
  HyperbolicityVerdict v;
  const double all[4] = {fiber.plus, fiber.minus, base.plus, base.minus};
  v.min_abs = std::numeric_limits<double>::infinity();
  bool pos = false, neg = false;
  for (double l : all) {
    v.min_abs = std::min(v.min_abs, std::abs(l));
    pos = pos || l > 0;
    neg = neg || l < 0;
  }
  v.both_signs = pos && neg;
  v.hyperbolic = v.both_signs && v.min_abs >= chi;
  return v;
}

}  // namespace relent
