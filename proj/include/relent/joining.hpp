#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "relent/code.hpp"
#include "relent/errors.hpp"
#include "relent/markov.hpp"
#include "relent/parallel.hpp"
#include "relent/rng.hpp"

namespace relent {

/// Monte-Carlo output: never a bare number.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

namespace detail {

inline Estimate mean_estimate(const std::vector<double>& xs) {
  Estimate e;
  e.n = xs.size();
  if (xs.empty()) return e;
  double s = 0.0;
  for (double x : xs) s += x;
  e.value = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - e.value) * (x - e.value);
    e.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return e;
}

}  // namespace detail

inline constexpr int kDefaultWindow = 64;

/// Conditional law of a Markov measure on X given an observed y-word, by forward
/// filtering and backward sampling. Boundary weights are stationary.
class ConditionalFilter {
 public:
  ConditionalFilter(const MarkovMeasure& mu, const OneBlockCode& code, int w = kDefaultWindow)
      : code_(code), w_(w), n_(mu.host.size()) {
    if (!(mu.host == code.source)) throw Error(ErrorCode::CodeMismatch, "filter measure lives on a different shift");
    if (w < 0) throw Error(ErrorCode::BadWindow, "window half-width must be >= 0");
    mass_ = mu.symbol_mass();
    trans_.assign(n_ * n_, 0.0);
    const auto p = mu.transition();
    for (std::size_t e = 0; e < p.size(); ++e) {
      const auto& ed = mu.host.edge(e);
      trans_[static_cast<std::size_t>(ed.from) * n_ + static_cast<std::size_t>(ed.to)] = p[e];
    }
    pre_ = code.preimages();
  }

  int window() const noexcept { return w_; }
  std::size_t size() const noexcept { return n_; }
  const OneBlockCode& code() const noexcept { return code_; }
  double transition(int a, int b) const {
    return trans_[static_cast<std::size_t>(a) * n_ + static_cast<std::size_t>(b)];
  }
  const std::vector<double>& mass() const noexcept { return mass_; }
  const std::vector<int>& preimage(int y) const { return pre_.at(static_cast<std::size_t>(y)); }

  void check(const std::vector<int>& y) const {
    for (int s : y)
      if (s < 0 || static_cast<std::size_t>(s) >= code_.target.size())
        throw Error(ErrorCode::InadmissibleWindow, "y symbol out of range");
    for (int s : y)
      if (pre_[static_cast<std::size_t>(s)].empty())
        throw Error(ErrorCode::NoPreimage, "y symbol '" + code_.target.symbol(s) + "' has no preimage");
    if (!code_.target.admissible(y)) throw Error(ErrorCode::InadmissibleWindow, "y word is not admissible in Y");
  }

  /// Normalized filtering weights α_t(x) = P(x_t = x | y_0..y_t), row-major (t, x).
  std::vector<double> forward(const std::vector<int>& y) const {
    check(y);
    const std::size_t len = y.size();
    std::vector<double> a(len * n_, 0.0);
    if (len == 0) return a;
    double s = 0.0;
    for (int x : preimage(y[0])) s += a[static_cast<std::size_t>(x)] = mass_[static_cast<std::size_t>(x)];
    normalize_row(a, 0, s);
    for (std::size_t t = 1; t < len; ++t) {
      s = 0.0;
      double* row = &a[t * n_];
      const double* prev = &a[(t - 1) * n_];
      for (int x2 : preimage(y[t])) {
        double acc = 0.0;
        for (int x1 : preimage(y[t - 1])) acc += prev[x1] * transition(x1, x2);
        row[x2] = acc;
        s += acc;
      }
      normalize_row(a, t, s);
    }
    return a;
  }

  /// Normalized backward weights β_t(x) ∝ P(y_{t+1}..y_{L-1} | x_t = x) for x over y_t.
  std::vector<double> backward(const std::vector<int>& y) const {
    check(y);
    const std::size_t len = y.size();
    std::vector<double> b(len * n_, 0.0);
    if (len == 0) return b;
    for (int x : preimage(y[len - 1])) b[(len - 1) * n_ + static_cast<std::size_t>(x)] = 1.0;
    for (std::size_t t = len - 1; t-- > 0;) {
      double s = 0.0;
      for (int x1 : preimage(y[t])) {
        double acc = 0.0;
        for (int x2 : preimage(y[t + 1])) acc += transition(x1, x2) * b[(t + 1) * n_ + static_cast<std::size_t>(x2)];
        b[t * n_ + static_cast<std::size_t>(x1)] = acc;
        s += acc;
      }
      normalize_row(b, t, s);
    }
    return b;
  }

  /// One draw of x_0..x_{L-1} from the conditional law given y (any length).
  std::vector<int> sample_given(const std::vector<int>& y, CounterRng& rng) const {
    const auto a = forward(y);
    const std::size_t len = y.size();
    std::vector<int> x(len);
    if (len == 0) return x;
    std::vector<double> w(n_);
    x[len - 1] = draw(&a[(len - 1) * n_], preimage(y[len - 1]), rng.uniform());
    for (std::size_t t = len - 1; t-- > 0;) {
      const int next = x[t + 1];
      for (int c : preimage(y[t])) w[static_cast<std::size_t>(c)] = a[t * n_ + static_cast<std::size_t>(c)] * transition(c, next);
      x[t] = draw(w.data(), preimage(y[t]), rng.uniform());
    }
    return x;
  }

 private:
  void normalize_row(std::vector<double>& a, std::size_t t, double s) const {
    if (!(s > 0.0)) throw Error(ErrorCode::InadmissibleWindow, "y word has probability zero under the measure");
    for (std::size_t x = 0; x < n_; ++x) a[t * n_ + x] /= s;
  }

  static int draw(const double* w, const std::vector<int>& support, double u) {
    double total = 0.0;
    for (int c : support) total += w[c];
    double target = u * total, acc = 0.0;
    int last = support.back();
    for (int c : support) {
      if (w[c] <= 0.0) continue;
      acc += w[c];
      last = c;
      if (target < acc) return c;
    }
    return last;
  }

  OneBlockCode code_;
  int w_;
  std::size_t n_;
  std::vector<double> mass_;
  std::vector<double> trans_;
  std::vector<std::vector<int>> pre_;
};

/// x-window of length 2w+1 drawn from the conditional law given `y_window`.
inline std::vector<int> conditional_sample(const ConditionalFilter& filter, const std::vector<int>& y_window,
                                           std::uint64_t seed) {
  if (y_window.size() != 2 * static_cast<std::size_t>(filter.window()) + 1)
    throw Error(ErrorCode::BadWindow, "y window must have length 2w+1 = " + std::to_string(2 * filter.window() + 1));
  CounterRng rng(seed, 0);
  return filter.sample_given(y_window, rng);
}

struct JoinedWindow {
  std::vector<int> y;
  std::vector<int> u;
  std::vector<int> v;
};

/// Relatively independent joining μ₁ ⊗_ν μ₂ restricted to windows of length 2w+1.
/// The y-window is drawn as the image of a μ₁-window, which is exactly ν's law on
/// windows; u and v are then conditionally independent given y.
class JoiningSampler {
 public:
  JoiningSampler(const MarkovMeasure& mu1, const MarkovMeasure& mu2, const OneBlockCode& code,
                 int w = kDefaultWindow, std::uint64_t seed = 0)
      : mu1_(mu1), mu2_(mu2), code_(code), nu_(pushforward(mu1, code).marginal), w_(w), seed_(seed),
        f1_(mu1, code, w), f2_(mu2, code, w), source_(mu1) {
    require_lift(mu2, nu_, code);
    if (!mu1.ergodic()) throw Error(ErrorCode::NotErgodic, "μ₁ must have irreducible support");
  }

  int window() const noexcept { return w_; }
  std::size_t length() const noexcept { return 2 * static_cast<std::size_t>(w_) + 1; }
  std::uint64_t seed() const noexcept { return seed_; }
  const MarkovMeasure& mu1() const noexcept { return mu1_; }
  const MarkovMeasure& mu2() const noexcept { return mu2_; }
  const MarkovMeasure& nu() const noexcept { return nu_; }
  const OneBlockCode& code() const noexcept { return code_; }
  const ConditionalFilter& filter1() const noexcept { return f1_; }
  const ConditionalFilter& filter2() const noexcept { return f2_; }

  /// y path of arbitrary length from stream `stream`.
  std::vector<int> draw_y(std::size_t len, CounterRng& rng) const {
    std::vector<int> y(len);
    if (len == 0) return y;
    int x = source_.initial(rng.uniform());
    y[0] = code_(x);
    for (std::size_t t = 1; t < len; ++t) {
      x = source_.step(x, rng.uniform());
      y[t] = code_(x);
    }
    return y;
  }

  /// Sample number `index`; a pure function of (seed, index).
  JoinedWindow sample(std::uint64_t index) const {
    CounterRng rng(seed_, index);
    JoinedWindow j;
    j.y = draw_y(length(), rng);
    j.u = f1_.sample_given(j.y, rng);
    j.v = f2_.sample_given(j.y, rng);
    return j;
  }

 private:
  MarkovMeasure mu1_, mu2_;
  OneBlockCode code_;
  MarkovMeasure nu_;
  int w_;
  std::uint64_t seed_;
  ConditionalFilter f1_, f2_;
  TransitionSampler source_;
};

inline JoinedWindow joining_sample(const JoiningSampler& s, std::uint64_t index = 0) { return s.sample(index); }

/// Frequency of u₀ = v₀ (window centre) with binomial standard error.
inline Estimate coincidence_probability(const JoiningSampler& s, std::size_t n_samples, int threads = 1) {
  std::vector<char> hit(n_samples, 0);
  const std::size_t c = static_cast<std::size_t>(s.window());
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const auto j = s.sample(i);
    hit[i] = j.u[c] == j.v[c];
  });
  Estimate e;
  e.n = n_samples;
  std::size_t k = 0;
  for (char h : hit) k += static_cast<std::size_t>(h);
  if (n_samples == 0) return e;
  e.value = static_cast<double>(k) / static_cast<double>(n_samples);
  e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n_samples));
  return e;
}

// ---------------------------------------------------------------------------
// Switching

inline constexpr long kNoCoincidence = std::numeric_limits<long>::min();

/// N_k = sup{m < k : u_m = v_m}, or kNoCoincidence inside the window.
inline std::vector<long> last_coincidence(const std::vector<int>& u, const std::vector<int>& v) {
  std::vector<long> n(u.size(), kNoCoincidence);
  long last = kNoCoincidence;
  for (std::size_t k = 0; k < u.size(); ++k) {
    n[k] = last;
    if (u[k] == v[k]) last = static_cast<long>(k);
  }
  return n;
}

/// w_k = u_k when the bit at N_k is 0, v_k when it is 1; r_neg_inf stands in for
/// the bit when no coincidence precedes k.
inline std::vector<int> pqs_switch(const OneBlockCode& code, const std::vector<int>& u, const std::vector<int>& v,
                                   const std::vector<int>& r_bits, int r_neg_inf) {
  if (u.size() != v.size() || r_bits.size() != u.size())
    throw Error(ErrorCode::WindowMismatch, "u, v and bits must have equal length");
  for (std::size_t k = 0; k < u.size(); ++k)
    if (code(u[k]) != code(v[k]))
      throw Error(ErrorCode::WindowMismatch, "u and v have different images at position " + std::to_string(k));
  const auto nk = last_coincidence(u, v);
  std::vector<int> w(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const int bit = nk[k] == kNoCoincidence ? r_neg_inf : r_bits[static_cast<std::size_t>(nk[k])];
    w[k] = bit ? v[k] : u[k];
  }
  return w;
}

struct SwitchedWindow {
  JoinedWindow joined;
  std::vector<int> bits;
  int r_neg_inf = 0;
  std::vector<int> w;
};

/// One window of the switching construction; r₋∞ is drawn once per window.
inline SwitchedWindow switch_sample(const JoiningSampler& s, std::uint64_t index) {
  SwitchedWindow out;
  out.joined = s.sample(index);
  CounterRng bits(derive_seed(s.seed(), 0xb175), index);
  out.bits.resize(out.joined.u.size());
  for (int& b : out.bits) b = bits.bit();
  out.r_neg_inf = bits.bit();
  out.w = pqs_switch(s.code(), out.joined.u, out.joined.v, out.bits, out.r_neg_inf);
  return out;
}

struct PqsPath {
  std::vector<int> path;  // central `length` symbols of w
  std::vector<int> u;     // matching central portions, kept for diagnostics
  std::vector<int> v;
  std::size_t margin = 0;
  std::size_t coincidences = 0;  // positions k in the central portion with u_k = v_k
};

/// One long y-path of length L + 2w; u and v are drawn from the conditional laws
/// along the whole path, switched, and w symbols are discarded at each end.
inline PqsPath pqs_measure_path(const JoiningSampler& s, std::size_t length, std::uint64_t seed) {
  const std::size_t margin = static_cast<std::size_t>(s.window());
  const std::size_t total = length + 2 * margin;
  CounterRng rng(seed, 0);
  const auto y = s.draw_y(total, rng);
  CounterRng ru(seed, 1), rv(seed, 2), rb(seed, 3);
  const auto u = s.filter1().sample_given(y, ru);
  const auto v = s.filter2().sample_given(y, rv);
  std::vector<int> bits(total);
  for (int& b : bits) b = rb.bit();
  const int r_neg_inf = rb.bit();
  const auto w = pqs_switch(s.code(), u, v, bits, r_neg_inf);
  PqsPath p;
  p.margin = margin;
  p.path.assign(w.begin() + static_cast<long>(margin), w.begin() + static_cast<long>(margin + length));
  p.u.assign(u.begin() + static_cast<long>(margin), u.begin() + static_cast<long>(margin + length));
  p.v.assign(v.begin() + static_cast<long>(margin), v.begin() + static_cast<long>(margin + length));
  for (std::size_t k = 0; k < length; ++k) p.coincidences += p.u[k] == p.v[k];
  return p;
}

// ---------------------------------------------------------------------------
// Conditionals at the window centre

struct CentreConditionals {
  bool in_s = false;          // u₋₁ = v₋₁
  std::vector<double> a;      // P₁(x₀ = j | u₋₁, y₀..y_w)
  std::vector<double> b;      // P₂(x₀ = j | v₋₁, y₀..y_w)
  std::vector<double> a_now;  // P₁(x₀ = j | u₋₁, y₀)
  std::vector<double> b_now;  // P₂(x₀ = j | v₋₁, y₀)
  int y0 = 0;
};

namespace detail {

inline std::vector<double> centre_law(const ConditionalFilter& f, int prev, const std::vector<int>& y, std::size_t c,
                                      bool use_future) {
  std::vector<double> p(f.size(), 0.0);
  std::vector<double> beta;
  if (use_future) {
    std::vector<int> tail(y.begin() + static_cast<long>(c), y.end());
    beta = f.backward(tail);
  }
  double s = 0.0;
  for (int j : f.preimage(y[c])) {
    double wj = f.transition(prev, j);
    if (use_future) wj *= beta[static_cast<std::size_t>(j)];
    p[static_cast<std::size_t>(j)] = wj;
    s += wj;
  }
  if (s > 0.0)
    for (double& t : p) t /= s;
  return p;
}

}  // namespace detail

inline CentreConditionals centre_conditionals(const JoiningSampler& s, const JoinedWindow& j) {
  const std::size_t c = static_cast<std::size_t>(s.window());
  if (c < 1) throw Error(ErrorCode::BadWindow, "window half-width must be >= 1");
  CentreConditionals cc;
  cc.y0 = j.y[c];
  cc.in_s = j.u[c - 1] == j.v[c - 1];
  cc.a = detail::centre_law(s.filter1(), j.u[c - 1], j.y, c, true);
  cc.b = detail::centre_law(s.filter2(), j.v[c - 1], j.y, c, true);
  cc.a_now = detail::centre_law(s.filter1(), j.u[c - 1], j.y, c, false);
  cc.b_now = detail::centre_law(s.filter2(), j.v[c - 1], j.y, c, false);
  return cc;
}

/// Σψ((A+B)/2) − ½Σψ(A) − ½Σψ(B)
inline double xi_value(const std::vector<double>& a, const std::vector<double>& b) {
  double x = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) x += psi(0.5 * (a[j] + b[j])) - 0.5 * psi(a[j]) - 0.5 * psi(b[j]);
  return x;
}

inline constexpr int kMinXiWindow = 8;

struct XiEstimate {
  Estimate integral;       // mean of Ξ·1_S over all samples
  Estimate on_s;           // mean of Ξ over samples in S
  std::size_t hits = 0;    // samples in S
  double min_xi = 0.0;     // smallest Ξ seen on S
};

inline XiEstimate xi_estimate(const JoiningSampler& s, std::size_t n_samples, int threads = 1) {
  if (s.window() < kMinXiWindow)
    throw Error(ErrorCode::BadWindow, "Ξ needs w >= " + std::to_string(kMinXiWindow));
  std::vector<double> contrib(n_samples, 0.0);
  std::vector<char> in_s(n_samples, 0);
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const auto cc = centre_conditionals(s, s.sample(i));
    if (!cc.in_s) return;
    in_s[i] = 1;
    contrib[i] = xi_value(cc.a, cc.b);
  });
  XiEstimate out;
  std::vector<double> on;
  out.min_xi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_samples; ++i)
    if (in_s[i]) {
      on.push_back(contrib[i]);
      out.min_xi = std::min(out.min_xi, contrib[i]);
    }
  out.hits = on.size();
  if (on.empty()) throw Error(ErrorCode::EmptyS, "no sample with u₋₁ = v₋₁ among " + std::to_string(n_samples));
  out.integral = detail::mean_estimate(contrib);
  out.on_s = detail::mean_estimate(on);
  return out;
}

struct GapReport {
  bool s_empty = true;
  std::size_t hits = 0;
  std::vector<Estimate> per_symbol;  // mean |A^j − B^j| over S̃ samples where j is over y₀
  double max_gap = 0.0;              // largest sup_j gap seen
  Estimate mean_sup_gap;             // mean of sup_j |A^j − B^j| over S̃
};

/// Gap between the two conditionals given the own past and y₀, on S̃ = {u₋₁ = v₋₁}.
inline GapReport conditional_equality_gap(const JoiningSampler& s, std::size_t n_samples, int threads = 1) {
  const std::size_t n = s.code().source.size();
  std::vector<std::vector<double>> gaps(n_samples);
  std::vector<int> y0(n_samples, -1);
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const auto cc = centre_conditionals(s, s.sample(i));
    if (!cc.in_s) return;
    y0[i] = cc.y0;
    gaps[i].resize(n);
    for (std::size_t j = 0; j < n; ++j) gaps[i][j] = std::abs(cc.a_now[j] - cc.b_now[j]);
  });
  GapReport r;
  std::vector<std::vector<double>> by_symbol(n);
  std::vector<double> sup;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (y0[i] < 0) continue;
    double m = 0.0;
    for (int j : s.filter1().preimage(y0[i])) {
      by_symbol[static_cast<std::size_t>(j)].push_back(gaps[i][static_cast<std::size_t>(j)]);
      m = std::max(m, gaps[i][static_cast<std::size_t>(j)]);
    }
    sup.push_back(m);
    r.max_gap = std::max(r.max_gap, m);
  }
  r.hits = sup.size();
  r.s_empty = sup.empty();
  for (const auto& g : by_symbol) r.per_symbol.push_back(detail::mean_estimate(g));
  r.mean_sup_gap = detail::mean_estimate(sup);
  return r;
}

}  // namespace relent
