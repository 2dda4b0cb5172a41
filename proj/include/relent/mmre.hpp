#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "relent/code.hpp"
#include "relent/errors.hpp"
#include "relent/markov.hpp"
#include "relent/sft.hpp"

namespace relent {

// Order-m lifts of ν are Markov chains on the lookahead presentation G_m whose
// states are (x_t, y_{t+1}..y_{t+m-1}): the X symbol now and the next m−1 symbols
// of its image. Transitions append one new Y symbol g, and the lift rows force
// P(g | state) = ν(g | last y). Under those rows the image process is exactly ν.
// G_1 is X itself; every G_m chain is conjugate to its X-coordinate process.

struct LookaheadGraph {
  int order = 1;
  Sft host;
  std::vector<int> x_of;                 // state -> X symbol
  std::vector<std::vector<int>> future;  // state -> y_{t+1}..y_{t+m-1}
  std::vector<int> last_y;               // state -> newest Y symbol known
  OneBlockCode to_x;                     // G_m -> X
  OneBlockCode to_y;                     // G_m -> Y (current symbol)
};

struct LiftPolytope {
  LookaheadGraph pres;
  OneBlockCode code;  // X -> Y
  MarkovMeasure nu;
  std::vector<double> nu_trans;  // ν transition per Y edge
  std::size_t stationarity_rows = 0;
  std::size_t mass_rows = 0;
  std::size_t pushforward_rows = 0;
  std::size_t lift_rows = 0;

  std::size_t variables() const noexcept { return pres.host.edge_count(); }
  std::size_t equality_rows() const noexcept {
    return stationarity_rows + mass_rows + pushforward_rows + lift_rows;
  }

  /// ν(g | y), 0 if y → g is not a ν-charged edge.
  double nu_cond(int y, int g) const {
    const int e = nu.host.edge_index(y, g);
    return e < 0 ? 0.0 : nu_trans[static_cast<std::size_t>(e)];
  }

  /// Max violation over nonnegativity and all equality rows.
  double residual(const std::vector<double>& q) const {
    const Sft& g = pres.host;
    if (q.size() != g.edge_count()) throw Error(ErrorCode::InvalidArgument, "frequency vector has wrong length");
    double r = 0.0, total = 0.0;
    std::vector<double> in(g.size(), 0.0), out(g.size(), 0.0), push(nu.host.edge_count(), 0.0);
    std::map<std::pair<int, int>, double> lift;
    for (std::size_t e = 0; e < q.size(); ++e) {
      r = std::max(r, -q[e]);
      total += q[e];
      const auto& ed = g.edge(e);
      out[static_cast<std::size_t>(ed.from)] += q[e];
      in[static_cast<std::size_t>(ed.to)] += q[e];
      push[static_cast<std::size_t>(pres.to_y.edge_map[e])] += q[e];
      lift[{ed.from, pres.last_y[static_cast<std::size_t>(ed.to)]}] += q[e];
    }
    r = std::max(r, std::abs(total - 1.0));
    for (std::size_t v = 0; v < g.size(); ++v) r = std::max(r, std::abs(in[v] - out[v]));
    for (std::size_t f = 0; f < push.size(); ++f) r = std::max(r, std::abs(push[f] - nu.edge_freq[f]));
    for (std::size_t s = 0; s < g.size(); ++s)
      for (std::size_t gy = 0; gy < nu.host.size(); ++gy) {
        const double want = out[s] * nu_cond(pres.last_y[s], static_cast<int>(gy));
        auto it = lift.find({static_cast<int>(s), static_cast<int>(gy)});
        const double have = it == lift.end() ? 0.0 : it->second;
        r = std::max(r, std::abs(have - want));
      }
    return r;
  }
};

inline constexpr double kMmreTol = 1e-8;
inline constexpr std::size_t kMmreStateCap = 200000;

namespace detail {

inline LookaheadGraph lookahead_graph(const OneBlockCode& code, const MarkovMeasure& nu, int m, std::size_t cap) {
  const Sft& x = code.source;
  const Sft& y = code.target;
  auto charged = [&](int a, int b) {
    const int e = y.edge_index(a, b);
    return e >= 0 && nu.edge_freq[static_cast<std::size_t>(e)] > 0.0;
  };
  std::vector<int> xs;
  std::vector<std::vector<int>> words;
  for (int s = 0; s < static_cast<int>(x.size()); ++s) {
    std::vector<std::vector<int>> ws{{}};
    for (int len = 0; len < m - 1; ++len) {
      std::vector<std::vector<int>> next;
      for (const auto& w : ws) {
        const int last = w.empty() ? code(s) : w.back();
        for (int e : y.out_edges(last)) {
          const int g = y.edge(static_cast<std::size_t>(e)).to;
          if (!charged(last, g)) continue;
          auto w2 = w;
          w2.push_back(g);
          next.push_back(std::move(w2));
        }
      }
      ws = std::move(next);
    }
    for (auto& w : ws) {
      xs.push_back(s);
      words.push_back(std::move(w));
      if (xs.size() > cap) throw Error(ErrorCode::BlockExplosion, "lookahead presentation exceeds " + std::to_string(cap) + " states");
    }
  }
  std::map<std::pair<int, std::vector<int>>, int> index;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    index.emplace(std::pair{xs[i], words[i]}, static_cast<int>(i));
    std::string l = x.symbol(xs[i]);
    if (m > 1) {
      l += '|';
      for (std::size_t j = 0; j < words[i].size(); ++j) l += (j ? "," : "") + y.symbol(words[i][j]);
    }
    labels.push_back(std::move(l));
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto& w = words[i];
    for (int e : x.out_edges(xs[i])) {
      const int x2 = x.edge(static_cast<std::size_t>(e)).to;
      if (m == 1) {
        if (!charged(code(xs[i]), code(x2))) continue;
        edges.push_back({static_cast<int>(i), index.at({x2, {}})});
        continue;
      }
      if (code(x2) != w.front()) continue;
      for (int ey : y.out_edges(w.back())) {
        const int g = y.edge(static_cast<std::size_t>(ey)).to;
        if (!charged(w.back(), g)) continue;
        std::vector<int> w2(w.begin() + 1, w.end());
        w2.push_back(g);
        auto it = index.find({x2, w2});
        if (it != index.end()) edges.push_back({static_cast<int>(i), it->second});
      }
    }
  }
  LookaheadGraph lg;
  lg.order = m;
  try {
    lg.host = Sft::from_indices(labels, std::move(edges));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyAfterPruning) throw Error(ErrorCode::Infeasible, "no bi-infinite path over ν's support");
    throw;
  }
  std::map<std::string, int> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label.emplace(labels[i], static_cast<int>(i));
  std::vector<int> mx, my;
  for (const auto& l : lg.host.symbols()) {
    const auto i = static_cast<std::size_t>(by_label.at(l));
    lg.x_of.push_back(xs[i]);
    lg.future.push_back(words[i]);
    lg.last_y.push_back(words[i].empty() ? code(xs[i]) : words[i].back());
    mx.push_back(xs[i]);
    my.push_back(code(xs[i]));
  }
  lg.to_x = validate_code_indices(lg.host, x, std::move(mx));
  lg.to_y = validate_code_indices(lg.host, y, std::move(my));
  return lg;
}

}  // namespace detail

/// Variables: edge frequencies on G_m. Rows: flow balance per state, unit mass,
/// one row per Y edge matching ν, and one lift row per (state, next Y symbol).
inline LiftPolytope build_lift_constraints(const OneBlockCode& code, const MarkovMeasure& nu, int m,
                                           std::size_t cap = kMmreStateCap) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "order must be >= 1");
  if (!(nu.host == code.target)) throw Error(ErrorCode::CodeMismatch, "ν must live on the code's target");
  if (nu.stationarity_residual() > 1e-9) throw Error(ErrorCode::InvalidArgument, "ν is not stationary");
  std::vector<char> covered(code.target.edge_count(), 0);
  for (int te : code.edge_map) covered[static_cast<std::size_t>(te)] = 1;
  for (std::size_t f = 0; f < covered.size(); ++f)
    if (nu.edge_freq[f] > 0.0 && !covered[f]) {
      const auto& e = code.target.edge(f);
      throw Error(ErrorCode::InfeasibleSupport, "ν charges (" + code.target.symbol(e.from) + "," +
                                                    code.target.symbol(e.to) + ") which has no preimage edge");
    }
  LiftPolytope p;
  p.code = code;
  p.nu = nu;
  p.nu_trans = nu.transition();
  p.pres = detail::lookahead_graph(code, nu, m, cap);
  p.stationarity_rows = p.pres.host.size();
  p.mass_rows = 1;
  p.pushforward_rows = code.target.edge_count();
  p.lift_rows = p.pres.host.size() * code.target.size();
  return p;
}

struct MmreSolution {
  MarkovMeasure measure;  // on the lookahead presentation (X itself when m = 1)
  OneBlockCode to_x;
  double objective = 0.0;  // entropy rate, nats
  double h_rel = 0.0;
  double rho_lower = 0.0;  // certified bracket on the optimal h_rel
  double rho_upper = 0.0;
  double feasibility_residual = 0.0;
  double upper_bound = 0.0;  // h_top(X) − h(ν)
  int iterations = 0;
  bool converged = false;
  std::vector<int> component;  // states carrying the measure
};

namespace detail {

// Successor lists of state s grouped by the appended Y symbol, restricted to `alive`.
struct Groups {
  std::vector<std::vector<std::pair<int, std::vector<int>>>> by_state;  // s -> [(g, successors)]
};

inline Groups group_successors(const LiftPolytope& p, const std::vector<char>& alive) {
  const Sft& g = p.pres.host;
  Groups gr;
  gr.by_state.resize(g.size());
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (!alive[s]) continue;
    std::map<int, std::vector<int>> m;
    for (int e : g.out_edges(static_cast<int>(s))) {
      const int t = g.edge(static_cast<std::size_t>(e)).to;
      if (alive[static_cast<std::size_t>(t)]) m[p.pres.last_y[static_cast<std::size_t>(t)]].push_back(t);
    }
    for (auto& [sym, succ] : m) gr.by_state[s].emplace_back(sym, std::move(succ));
  }
  return gr;
}

// Removes states that cannot honour every ν-required next symbol.
inline void prune_infeasible(const LiftPolytope& p, std::vector<char>& alive) {
  const Sft& g = p.pres.host;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < g.size(); ++s) {
      if (!alive[s]) continue;
      const int ly = p.pres.last_y[s];
      for (int e : p.nu.host.out_edges(ly)) {
        const int gy = p.nu.host.edge(static_cast<std::size_t>(e)).to;
        if (p.nu_cond(ly, gy) <= 0.0) continue;
        bool ok = false;
        for (int ge : g.out_edges(static_cast<int>(s))) {
          const int t = g.edge(static_cast<std::size_t>(ge)).to;
          if (alive[static_cast<std::size_t>(t)] && p.pres.last_y[static_cast<std::size_t>(t)] == gy) {
            ok = true;
            break;
          }
        }
        if (!ok) {
          alive[s] = 0;
          changed = true;
          break;
        }
      }
    }
  }
}

}  // namespace detail

/// State sets on which a lift can live: closed, irreducible, and feasible for the
/// lift rows. Ordered by smallest state.
inline std::vector<std::vector<int>> feasible_components(const LiftPolytope& p) {
  const Sft& g = p.pres.host;
  std::vector<std::vector<int>> out;
  std::vector<std::vector<char>> work{std::vector<char>(g.size(), 1)};
  while (!work.empty()) {
    auto alive = std::move(work.back());
    work.pop_back();
    detail::prune_infeasible(p, alive);
    std::vector<Edge> es;
    for (const auto& e : g.edges())
      if (alive[static_cast<std::size_t>(e.from)] && alive[static_cast<std::size_t>(e.to)]) es.push_back(e);
    const auto info = strongly_connected_components(g.size(), es);
    std::size_t n_alive = 0;
    for (char a : alive) n_alive += static_cast<std::size_t>(a);
    for (const auto& c : info.components) {
      if (!c.nontrivial || !alive[static_cast<std::size_t>(c.symbols.front())]) continue;
      if (c.symbols.size() == n_alive) {
        out.push_back(c.symbols);
      } else {
        std::vector<char> sub(g.size(), 0);
        for (int v : c.symbols) sub[static_cast<std::size_t>(v)] = 1;
        work.push_back(std::move(sub));
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// The lift on `component` whose within-group choices are ∝ exp(values).
inline MarkovMeasure policy_lift(const LiftPolytope& p, const std::vector<int>& component,
                                 const std::vector<double>& values) {
  const Sft& g = p.pres.host;
  std::vector<char> alive(g.size(), 0);
  for (int v : component) alive[static_cast<std::size_t>(v)] = 1;
  const auto gr = detail::group_successors(p, alive);
  std::vector<int> local(g.size(), -1);
  std::vector<std::string> labels;
  for (int v : component) {
    local[static_cast<std::size_t>(v)] = static_cast<int>(labels.size());
    labels.push_back(g.symbol(v));
  }
  std::vector<Edge> edges;
  std::vector<double> w;
  std::map<std::pair<int, int>, double> prob;
  for (int s : component) {
    const int ly = p.pres.last_y[static_cast<std::size_t>(s)];
    for (const auto& [sym, succ] : gr.by_state[static_cast<std::size_t>(s)]) {
      const double pg = p.nu_cond(ly, sym);
      if (pg <= 0.0) continue;
      double mx = -std::numeric_limits<double>::infinity();
      for (int t : succ) mx = std::max(mx, values[static_cast<std::size_t>(t)]);
      double z = 0.0;
      for (int t : succ) z += std::exp(values[static_cast<std::size_t>(t)] - mx);
      for (int t : succ) prob[{s, t}] += pg * std::exp(values[static_cast<std::size_t>(t)] - mx) / z;
    }
  }
  for (const auto& [st, pr] : prob) edges.push_back({local[static_cast<std::size_t>(st.first)], local[static_cast<std::size_t>(st.second)]});
  const Sft sub = Sft::from_indices(labels, edges);
  std::vector<double> sw(sub.edge_count());
  for (std::size_t e = 0; e < sub.edge_count(); ++e) {
    const auto& ed = sub.edge(e);
    sw[e] = prob.at({component[static_cast<std::size_t>(ed.from)], component[static_cast<std::size_t>(ed.to)]});
  }
  // Row sums are 1 up to rounding; renormalize before the exact stationary solve.
  std::vector<double> row(sub.size(), 0.0);
  for (std::size_t e = 0; e < sw.size(); ++e) row[static_cast<std::size_t>(sub.edge(e).from)] += sw[e];
  for (std::size_t e = 0; e < sw.size(); ++e) sw[e] /= row[static_cast<std::size_t>(sub.edge(e).from)];
  const auto local_mu = stationary_from_transition(sub, sw);
  std::vector<double> q(g.edge_count(), 0.0);
  for (std::size_t e = 0; e < sub.edge_count(); ++e) {
    const auto& ed = sub.edge(e);
    const int ge = g.edge_index(component[static_cast<std::size_t>(ed.from)], component[static_cast<std::size_t>(ed.to)]);
    q[static_cast<std::size_t>(ge)] = local_mu.edge_freq[e];
  }
  return {g, std::move(q)};
}

inline double topological_entropy(const Sft& g) {
  const auto info = strongly_connected_components(g);
  double h = 0.0;
  for (std::size_t c = 0; c < info.components.size(); ++c)
    if (info.components[c].nontrivial) h = std::max(h, perron(restrict_to_component(g, static_cast<int>(c))).entropy);
  return h;
}

/// Relative value iteration for ρ + V(s) = Σ_g ν(g|s) log Σ_{s'} exp V(s') on each
/// feasible component. The span of TV − V brackets ρ; the best component wins.
inline MmreSolution solve_mmre(const LiftPolytope& p, double tol = kMmreTol, int max_iter = 2000000) {
  const Sft& g = p.pres.host;
  const auto comps = feasible_components(p);
  if (comps.empty()) throw Error(ErrorCode::Infeasible, "no state set supports a lift of ν");
  const double h_nu = entropy_rate(p.nu);
  MmreSolution best;
  bool have = false;
  for (const auto& comp : comps) {
    std::vector<char> alive(g.size(), 0);
    for (int v : comp) alive[static_cast<std::size_t>(v)] = 1;
    const auto gr = detail::group_successors(p, alive);
    std::vector<double> v(g.size(), 0.0), tv(g.size(), 0.0);
    double lo = 0.0, hi = 0.0;
    int it = 0;
    bool conv = false;
    for (; it < max_iter; ++it) {
      for (int s : comp) {
        const int ly = p.pres.last_y[static_cast<std::size_t>(s)];
        double acc = 0.0;
        for (const auto& [sym, succ] : gr.by_state[static_cast<std::size_t>(s)]) {
          const double pg = p.nu_cond(ly, sym);
          if (pg <= 0.0) continue;
          double mx = -std::numeric_limits<double>::infinity();
          for (int t : succ) mx = std::max(mx, v[static_cast<std::size_t>(t)]);
          double z = 0.0;
          for (int t : succ) z += std::exp(v[static_cast<std::size_t>(t)] - mx);
          acc += pg * (mx + std::log(z));
        }
        tv[static_cast<std::size_t>(s)] = acc;
      }
      lo = std::numeric_limits<double>::infinity();
      hi = -lo;
      for (int s : comp) {
        const double d = tv[static_cast<std::size_t>(s)] - v[static_cast<std::size_t>(s)];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      if (hi - lo < tol) {
        conv = true;
        break;
      }
      // Damped step keeps periodic components from oscillating.
      const double ref = 0.5 * (tv[static_cast<std::size_t>(comp.front())] + v[static_cast<std::size_t>(comp.front())]);
      for (int s : comp) {
        const auto us = static_cast<std::size_t>(s);
        v[us] = 0.5 * (v[us] + tv[us]) - ref;
      }
    }
    MmreSolution sol;
    sol.measure = policy_lift(p, comp, v);
    sol.to_x = p.pres.to_x;
    sol.objective = entropy_rate(sol.measure);
    sol.h_rel = sol.objective - h_nu;
    sol.rho_lower = lo;
    sol.rho_upper = hi;
    sol.feasibility_residual = p.residual(sol.measure.edge_freq);
    sol.iterations = it;
    sol.converged = conv && sol.feasibility_residual <= 1e-8;
    sol.component = comp;
    if (!have || sol.h_rel > best.h_rel) {
      best = std::move(sol);
      have = true;
    }
  }
  best.upper_bound = topological_entropy(p.code.source) - h_nu;
  return best;
}

struct SweepPoint {
  int order = 1;
  double h_rel = 0.0;
  double objective = 0.0;
  bool converged = false;
};

inline std::vector<SweepPoint> order_sweep(const OneBlockCode& code, const MarkovMeasure& nu, int m_max,
                                           double tol = kMmreTol) {
  if (m_max < 1) throw Error(ErrorCode::InvalidArgument, "m_max must be >= 1");
  std::vector<SweepPoint> out;
  for (int m = 1; m <= m_max; ++m) {
    const auto sol = solve_mmre(build_lift_constraints(code, nu, m), tol);
    out.push_back({m, sol.h_rel, sol.objective, sol.converged});
    if (m > 1 && out[out.size() - 1].h_rel < out[out.size() - 2].h_rel - 2 * tol)
      throw Error(ErrorCode::SweepNotMonotone, "h_rel dropped from order " + std::to_string(m - 1) + " to " + std::to_string(m));
  }
  return out;
}

}  // namespace relent
