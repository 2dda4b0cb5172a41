#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relent/code.hpp"
#include "relent/errors.hpp"
#include "relent/rng.hpp"
#include "relent/sft.hpp"

namespace relent {

/// ψ(t) = −t log t with ψ(0) = 0.
inline double psi(double t) noexcept { return t > 0.0 ? -t * std::log(t) : 0.0; }

/// Binary entropy in nats.
inline double binary_entropy(double p) noexcept { return psi(p) + psi(1.0 - p); }

/// Stationary Markov measure given by its edge frequencies (edge order of `host`).
struct MarkovMeasure {
  Sft host;
  std::vector<double> edge_freq;

  /// Outbound symbol mass m(v) = Σ_{e: v→·} q(e).
  std::vector<double> symbol_mass() const {
    std::vector<double> m(host.size(), 0.0);
    for (std::size_t e = 0; e < edge_freq.size(); ++e) m[static_cast<std::size_t>(host.edge(e).from)] += edge_freq[e];
    return m;
  }

  std::vector<double> inbound_mass() const {
    std::vector<double> m(host.size(), 0.0);
    for (std::size_t e = 0; e < edge_freq.size(); ++e) m[static_cast<std::size_t>(host.edge(e).to)] += edge_freq[e];
    return m;
  }

  /// max_v |inbound(v) − outbound(v)|
  double stationarity_residual() const {
    const auto out = symbol_mass(), in = inbound_mass();
    double r = 0.0;
    for (std::size_t v = 0; v < out.size(); ++v) r = std::max(r, std::abs(out[v] - in[v]));
    return r;
  }

  /// Transition probability along each edge; 0 on edges leaving massless symbols.
  std::vector<double> transition() const {
    const auto m = symbol_mass();
    std::vector<double> p(edge_freq.size(), 0.0);
    for (std::size_t e = 0; e < edge_freq.size(); ++e) {
      const double mv = m[static_cast<std::size_t>(host.edge(e).from)];
      p[e] = mv > 0.0 ? edge_freq[e] / mv : 0.0;
    }
    return p;
  }

  /// Support restricted to edges with positive frequency.
  std::vector<Edge> support_edges(double eps = 0.0) const {
    std::vector<Edge> s;
    for (std::size_t e = 0; e < edge_freq.size(); ++e)
      if (edge_freq[e] > eps) s.push_back(host.edge(e));
    return s;
  }

  /// Ergodic iff the support graph is a single irreducible component.
  bool ergodic() const {
    auto s = support_edges();
    if (s.empty()) return false;
    try {
      Sft g = Sft::from_indices(host.symbols(), s);
      return is_irreducible(g);
    } catch (const Error&) {
      return false;
    }
  }
};

inline MarkovMeasure make_measure(const Sft& host, std::vector<double> edge_freq) {
  if (edge_freq.size() != host.edge_count())
    throw Error(ErrorCode::InvalidArgument, "edge_freq has " + std::to_string(edge_freq.size()) + " entries, host has " +
                                                std::to_string(host.edge_count()) + " edges");
  double s = 0.0;
  for (double q : edge_freq) {
    if (!(q >= 0.0)) throw Error(ErrorCode::UnsupportedEdgeWeight, "negative or NaN edge frequency");
    s += q;
  }
  if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "edge frequencies sum to " + std::to_string(s));
  return {host, std::move(edge_freq)};
}

/// h = Σ_e ψ(q(e)) − Σ_v ψ(m(v)), i.e. H(X₀X₁) − H(X₀).
inline double entropy_rate(const MarkovMeasure& mu) {
  double h = 0.0;
  for (double q : mu.edge_freq) h += psi(q);
  for (double m : mu.symbol_mass()) h -= psi(m);
  return h;
}

/// Parry measure: q(a→b) = l(a) r(b) / λ with ⟨l, r⟩ = 1.
inline MarkovMeasure parry_measure(const Sft& g) {
  const PerronData p = perron(g);
  std::vector<double> q(g.edge_count());
  for (std::size_t e = 0; e < q.size(); ++e) {
    const auto& ed = g.edge(e);
    q[e] = p.left[static_cast<std::size_t>(ed.from)] * p.right[static_cast<std::size_t>(ed.to)] / p.value;
  }
  double s = 0.0;
  for (double t : q) s += t;
  for (double& t : q) t /= s;
  return {g, std::move(q)};
}

/// Stationary measure from row-stochastic weights on the edges. When the
/// positive-weight support has several closed classes, `component` must name one
/// (as an index into the support's component list, see strongly_connected_components).
inline MarkovMeasure stationary_from_transition(const Sft& g, const std::vector<double>& weights,
                                                std::optional<int> component = std::nullopt) {
  if (weights.size() != g.edge_count()) throw Error(ErrorCode::InvalidArgument, "one weight per edge required");
  std::vector<double> row(g.size(), 0.0);
  for (std::size_t e = 0; e < weights.size(); ++e) {
    if (!(weights[e] >= 0.0)) throw Error(ErrorCode::UnsupportedEdgeWeight, "negative transition weight");
    row[static_cast<std::size_t>(g.edge(e).from)] += weights[e];
  }
  for (std::size_t v = 0; v < row.size(); ++v)
    if (std::abs(row[v] - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidArgument, "row " + g.symbol(static_cast<int>(v)) + " sums to " + std::to_string(row[v]));

  // Closed classes of the positive-weight support graph.
  std::vector<Edge> support;
  for (std::size_t e = 0; e < weights.size(); ++e)
    if (weights[e] > 0.0) support.push_back(g.edge(e));
  const auto info = strongly_connected_components(g.size(), support);
  std::vector<int> closed;
  for (std::size_t c = 0; c < info.components.size(); ++c) {
    bool is_closed = info.components[c].nontrivial;
    for (const auto& [a, b] : info.dag)
      if (a == static_cast<int>(c)) is_closed = false;
    if (is_closed) closed.push_back(static_cast<int>(c));
  }
  int target;
  if (component) {
    if (std::find(closed.begin(), closed.end(), *component) == closed.end())
      throw Error(ErrorCode::InvalidArgument, "component " + std::to_string(*component) + " is not a closed class");
    target = *component;
  } else {
    if (closed.size() != 1)
      throw Error(ErrorCode::ReducibleAmbiguity, std::to_string(closed.size()) + " closed classes; choose a component");
    target = closed.front();
  }
  const auto& syms = info.components[static_cast<std::size_t>(target)].symbols;
  const auto k = static_cast<Eigen::Index>(syms.size());
  std::vector<int> local(g.size(), -1);
  for (std::size_t i = 0; i < syms.size(); ++i) local[static_cast<std::size_t>(syms[i])] = static_cast<int>(i);
  // Solve π (P − I) = 0 with Σπ = 1 by replacing one equation.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t e = 0; e < weights.size(); ++e) {
    const int i = local[static_cast<std::size_t>(g.edge(e).from)], j = local[static_cast<std::size_t>(g.edge(e).to)];
    if (i >= 0 && j >= 0) a(j, i) += weights[e];
  }
  a -= Eigen::MatrixXd::Identity(k, k);
  a.row(k - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  rhs(k - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
  std::vector<double> q(g.edge_count(), 0.0);
  for (std::size_t e = 0; e < weights.size(); ++e) {
    const int i = local[static_cast<std::size_t>(g.edge(e).from)], j = local[static_cast<std::size_t>(g.edge(e).to)];
    if (i >= 0 && j >= 0) q[e] = std::max(0.0, pi(i)) * weights[e];
  }
  double s = 0.0;
  for (double t : q) s += t;
  for (double& t : q) t /= s;
  return {g, std::move(q)};
}

/// Bernoulli measure on the full shift built by full_shift(p.size()).
inline MarkovMeasure bernoulli(const std::vector<double>& p) {
  Sft g = full_shift(static_cast<int>(p.size()));
  std::vector<double> q(g.edge_count());
  for (std::size_t e = 0; e < q.size(); ++e)
    q[e] = p[static_cast<std::size_t>(g.edge(e).from)] * p[static_cast<std::size_t>(g.edge(e).to)];
  return {g, std::move(q)};
}

// ---------------------------------------------------------------------------
// Pushforward

struct HiddenMarkovMeasure {
  MarkovMeasure upstream;
  OneBlockCode code;
  MarkovMeasure marginal;  // 2-block marginal on the target, exposed as a Markov measure
};

inline HiddenMarkovMeasure pushforward(const MarkovMeasure& mu, const OneBlockCode& code) {
  if (!(mu.host == code.source)) throw Error(ErrorCode::CodeMismatch, "code source differs from the measure's host");
  std::vector<double> q(code.target.edge_count(), 0.0);
  for (std::size_t e = 0; e < mu.edge_freq.size(); ++e) q[static_cast<std::size_t>(code.edge_map[e])] += mu.edge_freq[e];
  return {mu, code, MarkovMeasure{code.target, std::move(q)}};
}

/// Largest per-edge difference between two measures on the same host.
inline double max_edge_residual(const MarkovMeasure& a, const MarkovMeasure& b, std::size_t* worst = nullptr) {
  if (!(a.host == b.host)) throw Error(ErrorCode::CodeMismatch, "measures live on different hosts");
  double r = 0.0;
  for (std::size_t e = 0; e < a.edge_freq.size(); ++e) {
    const double d = std::abs(a.edge_freq[e] - b.edge_freq[e]);
    if (d > r) {
      r = d;
      if (worst) *worst = e;
    }
  }
  return r;
}

inline constexpr double kLiftTol = 1e-9;

inline void require_lift(const MarkovMeasure& mu, const MarkovMeasure& nu, const OneBlockCode& code,
                         double tol = kLiftTol) {
  const auto push = pushforward(mu, code);
  if (!(push.marginal.host == nu.host)) throw Error(ErrorCode::CodeMismatch, "ν lives on a different shift than the code target");
  std::size_t worst = 0;
  const double r = max_edge_residual(push.marginal, nu, &worst);
  if (r > tol) {
    const auto& e = nu.host.edge(worst);
    throw Error(ErrorCode::NotALift, "worst edge (" + nu.host.symbol(e.from) + "," + nu.host.symbol(e.to) +
                                         ") residual " + std::to_string(r));
  }
}

/// Abramov–Rokhlin: h(μ | ν) = h(μ) − h(ν) for a lift μ of ν.
inline double relative_entropy(const MarkovMeasure& mu, const MarkovMeasure& nu, const OneBlockCode& code,
                               double tol = kLiftTol) {
  require_lift(mu, nu, code, tol);
  return entropy_rate(mu) - entropy_rate(nu);
}

// ---------------------------------------------------------------------------
// Entropy of a 1-block image

/// True when, for every target symbol b, the mass P(x → π⁻¹b) depends only on π(x)
/// over the charged symbols x. The image is then Markov.
inline bool lumpable(const MarkovMeasure& mu, const OneBlockCode& code, double tol = 1e-12) {
  const auto p = mu.transition();
  const auto m = mu.symbol_mass();
  const std::size_t ny = code.target.size();
  std::vector<std::vector<double>> rows(mu.host.size(), std::vector<double>(ny, 0.0));
  for (std::size_t e = 0; e < p.size(); ++e) {
    const auto& ed = mu.host.edge(e);
    rows[static_cast<std::size_t>(ed.from)][static_cast<std::size_t>(code(ed.to))] += p[e];
  }
  std::vector<int> rep(ny, -1);
  for (std::size_t x = 0; x < mu.host.size(); ++x) {
    if (m[x] <= 0.0) continue;
    int& r = rep[static_cast<std::size_t>(code(static_cast<int>(x)))];
    if (r < 0) {
      r = static_cast<int>(x);
      continue;
    }
    for (std::size_t b = 0; b < ny; ++b)
      if (std::abs(rows[x][b] - rows[static_cast<std::size_t>(r)][b]) > tol) return false;
  }
  return true;
}

struct ImageEntropy {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
  int depth = 0;
};

/// h(π_*μ). Exact for lumpable codes; otherwise the bracket
/// H(Y_d | Y_1..Y_{d−1}, X_0) ≤ h ≤ H(Y_0 | Y_{−d}..Y_{−1}) at the given depth.
inline ImageEntropy image_entropy(const MarkovMeasure& mu, const OneBlockCode& code, int depth = 8) {
  if (!(mu.host == code.source)) throw Error(ErrorCode::CodeMismatch, "code source differs from the measure's host");
  ImageEntropy r;
  if (lumpable(mu, code)) {
    r.value = r.lower = r.upper = entropy_rate(pushforward(mu, code).marginal);
    r.exact = true;
    return r;
  }
  if (depth < 1) throw Error(ErrorCode::InvalidArgument, "depth must be >= 1");
  r.depth = depth;
  const auto p = mu.transition();
  const auto& g = mu.host;
  const std::size_t nx = g.size(), ny = code.target.size();
  // Entropy of all Y-words of `len` further symbols appended to the start vector.
  auto word_entropy = [&](const std::vector<double>& start, int len) {
    double h = 0.0;
    std::vector<std::vector<double>> stack(static_cast<std::size_t>(len) + 1, std::vector<double>(nx));
    auto rec = [&](auto&& self, const std::vector<double>& a, int left) -> void {
      double mass = 0.0;
      for (double v : a) mass += v;
      if (mass <= 0.0) return;
      if (left == 0) {
        h += psi(mass);
        return;
      }
      auto& nxt = stack[static_cast<std::size_t>(left) - 1];
      for (std::size_t b = 0; b < ny; ++b) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (std::size_t e = 0; e < p.size(); ++e) {
          const auto& ed = g.edge(e);
          if (static_cast<std::size_t>(code(ed.to)) == b)
            nxt[static_cast<std::size_t>(ed.to)] += a[static_cast<std::size_t>(ed.from)] * p[e];
        }
        const std::vector<double> copy = nxt;
        self(self, copy, left - 1);
      }
    };
    rec(rec, start, len);
    return h;
  };
  const auto m = mu.symbol_mass();
  auto h_y = [&](int n) {  // H(Y_0..Y_{n−1})
    double h = 0.0;
    for (std::size_t b = 0; b < ny; ++b) {
      std::vector<double> a(nx, 0.0);
      for (std::size_t x = 0; x < nx; ++x)
        if (static_cast<std::size_t>(code(static_cast<int>(x))) == b) a[x] = m[x];
      h += word_entropy(a, n - 1);
    }
    return h;
  };
  auto h_xy = [&](int n) {  // H(X_0, Y_1..Y_n)
    double h = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
      std::vector<double> a(nx, 0.0);
      a[x] = m[x];
      h += word_entropy(a, n);
    }
    return h;
  };
  r.upper = h_y(depth + 1) - h_y(depth);
  r.lower = h_xy(depth) - h_xy(depth - 1);
  r.value = 0.5 * (r.lower + r.upper);
  return r;
}

// ---------------------------------------------------------------------------
// Sampling

/// Cumulative transition tables for fast sampling.
struct TransitionSampler {
  std::vector<std::vector<int>> next;     // symbol -> successor symbols
  std::vector<std::vector<double>> cdf;   // symbol -> cumulative probabilities
  std::vector<double> stationary_cdf;
  std::vector<double> stationary;

  explicit TransitionSampler(const MarkovMeasure& mu) {
    const auto& g = mu.host;
    const auto p = mu.transition();
    stationary = mu.symbol_mass();
    next.resize(g.size());
    cdf.resize(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
      double acc = 0.0;
      for (int e : g.out_edges(static_cast<int>(v))) {
        if (p[static_cast<std::size_t>(e)] <= 0.0) continue;
        acc += p[static_cast<std::size_t>(e)];
        next[v].push_back(g.edge(static_cast<std::size_t>(e)).to);
        cdf[v].push_back(acc);
      }
    }
    double acc = 0.0;
    for (double m : stationary) stationary_cdf.push_back(acc += m);
  }

  static int pick(const std::vector<double>& cdf, double u) {
    const double target = u * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.end()) --it;
    return static_cast<int>(it - cdf.begin());
  }
  int initial(double u) const { return pick(stationary_cdf, u); }
  int step(int from, double u) const {
    const auto& c = cdf[static_cast<std::size_t>(from)];
    return next[static_cast<std::size_t>(from)][static_cast<std::size_t>(pick(c, u))];
  }
};

/// Path of `length` symbols; draw i uses counter (seed, stream, i).
inline std::vector<int> sample_path(const MarkovMeasure& mu, std::size_t length, std::uint64_t seed,
                                    std::uint64_t stream = 0) {
  if (!mu.ergodic()) throw Error(ErrorCode::NotErgodic, "sample_path needs a single-component support");
  std::vector<int> path;
  if (length == 0) return path;
  path.reserve(length);
  const TransitionSampler ts(mu);
  path.push_back(ts.initial(counter_uniform(seed, stream, 0)));
  for (std::size_t i = 1; i < length; ++i) path.push_back(ts.step(path.back(), counter_uniform(seed, stream, i)));
  return path;
}

// ---------------------------------------------------------------------------
// Empirical entropy

struct EntropyEstimate {
  double value = 0.0;      // nats
  double std_error = 0.0;  // nats
  int block_length = 0;
  std::size_t path_length = 0;
  bool short_path = false;  // PathTooShort warning
};

struct EntropyOptions {
  bool miller_madow = true;
  int bootstrap_resamples = 32;
  std::size_t bootstrap_chunk = 1000;
  std::uint64_t bootstrap_seed = 0x5eedULL;
};

namespace detail {

// Block counts of length ℓ for blocks starting in [begin, end) and lying inside [begin, end).
class BlockCounter {
 public:
  BlockCounter(int alphabet, int ell) : alphabet_(alphabet), ell_(ell) {
    double cells = std::pow(static_cast<double>(alphabet), ell);
    dense_ = cells <= static_cast<double>(1 << 22);
    if (dense_) counts_.assign(static_cast<std::size_t>(cells), 0);
  }

  void add_range(const std::vector<int>& path, std::size_t begin, std::size_t end) {
    if (ell_ == 0 || end < begin + static_cast<std::size_t>(ell_)) return;
    for (std::size_t i = begin; i + static_cast<std::size_t>(ell_) <= end; ++i) {
      std::uint64_t key = 0;
      for (int j = 0; j < ell_; ++j) key = key * static_cast<std::uint64_t>(alphabet_) + static_cast<std::uint64_t>(path[i + static_cast<std::size_t>(j)]);
      if (dense_) ++counts_[key];
      else ++sparse_[key];
      ++total_;
    }
  }

  /// Plug-in entropy, optionally Miller–Madow corrected.
  double entropy(bool miller_madow) const {
    if (total_ == 0) return 0.0;
    const double n = static_cast<double>(total_);
    double h = 0.0;
    std::size_t observed = 0;
    auto acc = [&](std::uint64_t c) {
      if (c == 0) return;
      ++observed;
      h += psi(static_cast<double>(c) / n);
    };
    if (dense_) for (auto c : counts_) acc(c);
    else for (const auto& [k, c] : sparse_) acc(c);
    if (miller_madow) h += static_cast<double>(observed - 1) / (2.0 * n);
    return h;
  }

 private:
  int alphabet_;
  int ell_;
  bool dense_ = true;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse_;
  std::uint64_t total_ = 0;
};

inline double conditional_block_entropy(const std::vector<int>& path, const std::vector<std::pair<std::size_t, std::size_t>>& ranges,
                                        int alphabet, int ell, bool mm) {
  BlockCounter hi(alphabet, ell), lo(alphabet, ell - 1);
  for (auto [b, e] : ranges) {
    hi.add_range(path, b, e);
    // ℓ−1 blocks counted over the same starting positions keep both estimates aligned.
    lo.add_range(path, b, e > b ? e - 1 : e);
  }
  return hi.entropy(mm) - (ell > 1 ? lo.entropy(mm) : 0.0);
}

}  // namespace detail

/// Ĥ(ℓ) − Ĥ(ℓ−1) from overlapping block counts with a block-bootstrap error bar.
inline EntropyEstimate empirical_entropy(const std::vector<int>& path, int ell, int alphabet = 0,
                                         const EntropyOptions& opt = {}) {
  if (ell < 1) throw Error(ErrorCode::InvalidArgument, "block length must be >= 1");
  if (alphabet <= 0) alphabet = path.empty() ? 1 : *std::max_element(path.begin(), path.end()) + 1;
  EntropyEstimate est;
  est.block_length = ell;
  est.path_length = path.size();
  if (path.size() < static_cast<std::size_t>(ell) + 1) {
    est.short_path = true;
    est.std_error = std::log(static_cast<double>(std::max(alphabet, 2)));
    return est;
  }
  est.value = detail::conditional_block_entropy(path, {{0, path.size()}}, alphabet, ell, opt.miller_madow);

  const std::size_t chunk = std::min(opt.bootstrap_chunk, std::max<std::size_t>(path.size() / 8, static_cast<std::size_t>(ell) + 1));
  const std::size_t n_chunks = path.size() / chunk;
  if (n_chunks >= 2 && opt.bootstrap_resamples > 1) {
    CounterRng rng(opt.bootstrap_seed, path.size());
    double s = 0.0, s2 = 0.0;
    for (int b = 0; b < opt.bootstrap_resamples; ++b) {
      std::vector<std::pair<std::size_t, std::size_t>> ranges;
      ranges.reserve(n_chunks);
      for (std::size_t c = 0; c < n_chunks; ++c) {
        const std::size_t pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_chunks));
        ranges.emplace_back(pick * chunk, (pick + 1) * chunk);
      }
      const double v = detail::conditional_block_entropy(path, ranges, alphabet, ell, opt.miller_madow);
      s += v;
      s2 += v * v;
    }
    const double nb = opt.bootstrap_resamples;
    est.std_error = std::sqrt(std::max(0.0, (s2 - s * s / nb) / (nb - 1.0)));
  }
  const double recommended = 100.0 * std::pow(static_cast<double>(alphabet), ell);
  if (static_cast<double>(path.size()) < recommended) {
    est.short_path = true;
    est.std_error *= std::sqrt(recommended / static_cast<double>(path.size()));
  }
  return est;
}

}  // namespace relent
