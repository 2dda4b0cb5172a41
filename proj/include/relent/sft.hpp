#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "relent/errors.hpp"

namespace relent {

struct Edge {
  int from = 0;
  int to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Subshift of finite type presented by an essential directed graph on a finite
/// ordered alphabet. Symbols are referred to by their index in `symbols()`; the
/// index order is the tie-breaking order used everywhere. Edges are kept sorted
/// by (from, to), and that order is the canonical edge order for measures.
class Sft {
 public:
  Sft() = default;

  /// Builds from index-based edges, pruning to the essential subgraph.
  /// Symbols removed by pruning are listed in `removed_symbols()`.
  static Sft from_indices(std::vector<std::string> labels, std::vector<Edge> edges);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return labels_; }
  const std::string& symbol(int i) const { return labels_.at(static_cast<std::size_t>(i)); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }
  const std::vector<int>& out_edges(int v) const { return out_.at(static_cast<std::size_t>(v)); }
  const std::vector<int>& in_edges(int v) const { return in_.at(static_cast<std::size_t>(v)); }
  const std::vector<std::string>& removed_symbols() const noexcept { return removed_; }
  bool essential() const noexcept { return !labels_.empty(); }

  /// Index of edge (a, b) or -1.
  int edge_index(int a, int b) const {
    for (int e : out_.at(static_cast<std::size_t>(a)))
      if (edges_[static_cast<std::size_t>(e)].to == b) return e;
    return -1;
  }
  bool has_edge(int a, int b) const { return edge_index(a, b) >= 0; }

  std::optional<int> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  int index_of(const std::string& label) const {
    auto i = find(label);
    if (!i) throw Error(ErrorCode::UnknownSymbol, "symbol '" + label + "' not in alphabet");
    return *i;
  }

  bool admissible(const std::vector<int>& word) const {
    for (std::size_t i = 0; i + 1 < word.size(); ++i)
      if (!has_edge(word[i], word[i + 1])) return false;
    return true;
  }

  friend bool operator==(const Sft& a, const Sft& b) {
    return a.labels_ == b.labels_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
  std::vector<std::string> removed_;
  std::map<std::string, int> index_;
};

inline Sft Sft::from_indices(std::vector<std::string> labels, std::vector<Edge> edges) {
  const std::size_t n = labels.size();
  if (n == 0) throw Error(ErrorCode::EmptyAfterPruning, "empty alphabet");
  {
    std::set<std::string> seen;
    for (const auto& l : labels)
      if (!seen.insert(l).second) throw Error(ErrorCode::InvalidArgument, "duplicate symbol '" + l + "'");
  }
  for (const auto& e : edges)
    if (e.from < 0 || e.to < 0 || static_cast<std::size_t>(e.from) >= n ||
        static_cast<std::size_t>(e.to) >= n)
      throw Error(ErrorCode::UnknownSymbol, "edge references undeclared symbol index");
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] == edges[i - 1])
      throw Error(ErrorCode::DuplicateEdge,
                  "(" + labels[static_cast<std::size_t>(edges[i].from)] + "," +
                      labels[static_cast<std::size_t>(edges[i].to)] + ")");

  // Iteratively delete symbols with zero in- or out-degree.
  std::vector<char> alive(n, 1);
  std::vector<int> indeg(n, 0), outdeg(n, 0);
  for (const auto& e : edges) {
    ++outdeg[static_cast<std::size_t>(e.from)];
    ++indeg[static_cast<std::size_t>(e.to)];
  }
  std::vector<std::vector<int>> succ(n), pred(n);
  for (const auto& e : edges) {
    succ[static_cast<std::size_t>(e.from)].push_back(e.to);
    pred[static_cast<std::size_t>(e.to)].push_back(e.from);
  }
  std::vector<int> stack;
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0 || outdeg[v] == 0) stack.push_back(static_cast<int>(v));
  while (!stack.empty()) {
    const auto v = static_cast<std::size_t>(stack.back());
    stack.pop_back();
    if (!alive[v]) continue;
    alive[v] = 0;
    for (int w : succ[v]) {
      const auto uw = static_cast<std::size_t>(w);
      if (alive[uw] && --indeg[uw] == 0) stack.push_back(w);
    }
    for (int u : pred[v]) {
      const auto uu = static_cast<std::size_t>(u);
      if (alive[uu] && --outdeg[uu] == 0) stack.push_back(u);
    }
  }

  Sft s;
  std::vector<int> remap(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (alive[v]) {
      remap[v] = static_cast<int>(s.labels_.size());
      s.labels_.push_back(labels[v]);
    } else {
      s.removed_.push_back(labels[v]);
    }
  }
  if (s.labels_.empty()) throw Error(ErrorCode::EmptyAfterPruning, "no symbol lies on a bi-infinite path");
  for (const auto& e : edges) {
    const int a = remap[static_cast<std::size_t>(e.from)];
    const int b = remap[static_cast<std::size_t>(e.to)];
    if (a >= 0 && b >= 0) s.edges_.push_back({a, b});
  }
  // remap is monotone, so the edge list stays sorted.
  s.out_.assign(s.labels_.size(), {});
  s.in_.assign(s.labels_.size(), {});
  for (std::size_t e = 0; e < s.edges_.size(); ++e) {
    s.out_[static_cast<std::size_t>(s.edges_[e].from)].push_back(static_cast<int>(e));
    s.in_[static_cast<std::size_t>(s.edges_[e].to)].push_back(static_cast<int>(e));
  }
  for (std::size_t v = 0; v < s.labels_.size(); ++v) s.index_.emplace(s.labels_[v], static_cast<int>(v));
  return s;
}

/// Label-based constructor; unknown labels in edges are rejected.
inline Sft build_sft(const std::vector<std::string>& symbols,
                     const std::vector<std::pair<std::string, std::string>>& edges) {
  if (symbols.empty()) throw Error(ErrorCode::InvalidArgument, "symbols must be nonempty");
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < symbols.size(); ++i) idx.emplace(symbols[i], static_cast<int>(i));
  std::vector<Edge> es;
  es.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    auto ia = idx.find(a), ib = idx.find(b);
    if (ia == idx.end()) throw Error(ErrorCode::UnknownSymbol, "edge source '" + a + "'");
    if (ib == idx.end()) throw Error(ErrorCode::UnknownSymbol, "edge target '" + b + "'");
    es.push_back({ia->second, ib->second});
  }
  return Sft::from_indices(symbols, std::move(es));
}

/// Full shift on n symbols labelled "0".."n-1".
inline Sft full_shift(int n) {
  std::vector<std::string> labels;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) edges.push_back({i, j});
  return Sft::from_indices(labels, edges);
}

// ---------------------------------------------------------------------------
// Irreducible structure

struct Component {
  std::vector<int> symbols;  // ascending
  bool nontrivial = false;   // more than one symbol, or a self-loop
};

struct ComponentInfo {
  std::vector<Component> components;  // ordered by minimal contained symbol
  std::vector<int> component_of;      // symbol -> component id
  std::set<std::pair<int, int>> dag;  // condensation edges between distinct components
};

/// SCCs of an arbitrary graph on symbols 0..n-1 (no pruning applied).
inline ComponentInfo strongly_connected_components(std::size_t size, const std::vector<Edge>& edge_list) {
  // Iterative Tarjan.
  const int n = static_cast<int>(size);
  std::vector<std::vector<int>> succ(size);
  for (const auto& e : edge_list) succ[static_cast<std::size_t>(e.from)].push_back(e.to);
  for (auto& s : succ) std::sort(s.begin(), s.end());
  auto self_loop = [&](int v) {
    const auto& s = succ[static_cast<std::size_t>(v)];
    return std::binary_search(s.begin(), s.end(), v);
  };
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0),
      comp(static_cast<std::size_t>(n), -1);
  std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> raw;
  int counter = 0;
  struct Frame {
    int v;
    std::size_t next;
  };
  for (int root = 0; root < n; ++root) {
    if (index[static_cast<std::size_t>(root)] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = counter++;
    stack.push_back(root);
    on_stack[static_cast<std::size_t>(root)] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto uv = static_cast<std::size_t>(f.v);
      const auto& outs = succ[uv];
      if (f.next < outs.size()) {
        const int w = outs[f.next++];
        const auto uw = static_cast<std::size_t>(w);
        if (index[uw] < 0) {
          index[uw] = low[uw] = counter++;
          stack.push_back(w);
          on_stack[uw] = 1;
          call.push_back({w, 0});
        } else if (on_stack[uw]) {
          low[uv] = std::min(low[uv], index[uw]);
        }
        continue;
      }
      if (low[uv] == index[uv]) {
        std::vector<int> c;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = 0;
          c.push_back(w);
        } while (w != f.v);
        std::sort(c.begin(), c.end());
        raw.push_back(std::move(c));
      }
      const int v = f.v;
      call.pop_back();
      if (!call.empty()) {
        const auto up = static_cast<std::size_t>(call.back().v);
        low[up] = std::min(low[up], low[static_cast<std::size_t>(v)]);
      }
    }
  }
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  ComponentInfo info;
  info.component_of.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < raw.size(); ++c) {
    Component comp_c;
    comp_c.symbols = raw[c];
    for (int v : raw[c]) info.component_of[static_cast<std::size_t>(v)] = static_cast<int>(c);
    comp_c.nontrivial = raw[c].size() > 1 || self_loop(raw[c].front());
    info.components.push_back(std::move(comp_c));
  }
  for (const auto& e : edge_list) {
    const int a = info.component_of[static_cast<std::size_t>(e.from)];
    const int b = info.component_of[static_cast<std::size_t>(e.to)];
    if (a != b) info.dag.emplace(a, b);
  }
  return info;
}

inline ComponentInfo strongly_connected_components(const Sft& g) {
  return strongly_connected_components(g.size(), g.edges());
}

inline bool is_irreducible(const Sft& g) {
  if (g.size() == 0) return false;
  auto info = strongly_connected_components(g);
  return info.components.size() == 1 && info.components.front().nontrivial;
}

/// Induced subgraph on `keep` (ascending symbol indices), re-pruned.
inline Sft induced_subgraph(const Sft& g, const std::vector<int>& keep) {
  std::vector<int> remap(g.size(), -1);
  std::vector<std::string> labels;
  for (int v : keep) {
    remap[static_cast<std::size_t>(v)] = static_cast<int>(labels.size());
    labels.push_back(g.symbol(v));
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    const int a = remap[static_cast<std::size_t>(e.from)], b = remap[static_cast<std::size_t>(e.to)];
    if (a >= 0 && b >= 0) edges.push_back({a, b});
  }
  return Sft::from_indices(std::move(labels), std::move(edges));
}

inline Sft restrict_to_component(const Sft& g, int component_id) {
  auto info = strongly_connected_components(g);
  if (component_id < 0 || static_cast<std::size_t>(component_id) >= info.components.size())
    throw Error(ErrorCode::InvalidArgument, "no component " + std::to_string(component_id));
  const auto& c = info.components[static_cast<std::size_t>(component_id)];
  if (!c.nontrivial)
    throw Error(ErrorCode::TrivialComponent,
                "component " + std::to_string(component_id) + " is a single symbol without self-loop");
  return induced_subgraph(g, c.symbols);
}

// ---------------------------------------------------------------------------
// Perron data

struct PerronData {
  double value = 0.0;
  std::vector<double> left;
  std::vector<double> right;
  double entropy = 0.0;  // nats
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

// Power iteration on (W + I)/2 for a nonnegative irreducible weight matrix given
// sparsely by (edges, weights). The shift keeps the Perron vector, maps λ to
// (λ+1)/2 and kills the peripheral spectrum of periodic graphs.
inline std::vector<double> shifted_power(std::size_t n, const std::vector<Edge>& edges,
                                         const std::vector<double>& w, bool transpose, double& lambda,
                                         double& residual, int& iterations, double tol, int max_iter,
                                         std::vector<double> start = {}) {
  std::vector<double> x = start.size() == n ? std::move(start) : std::vector<double>(n, 1.0);
  std::vector<double> y(n);
  auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto a = static_cast<std::size_t>(transpose ? edges[e].to : edges[e].from);
      const auto b = static_cast<std::size_t>(transpose ? edges[e].from : edges[e].to);
      out[a] += w[e] * in[b];
    }
  };
  auto normalize_max = [](std::vector<double>& v) {
    double m = 0.0;
    for (double t : v) m = std::max(m, std::abs(t));
    for (double& t : v) t /= m;
  };
  normalize_max(x);
  lambda = 0.0;
  residual = 1.0;
  for (iterations = 0; iterations < max_iter; ++iterations) {
    apply(x, y);
    double sy = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sy += y[i];
      sx += x[i];
    }
    lambda = sy / sx;
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(y[i] - lambda * x[i]));
    if (residual <= tol) break;
    for (std::size_t i = 0; i < n; ++i) x[i] = 0.5 * (x[i] + y[i] / std::max(lambda, 1e-300));
    normalize_max(x);
  }
  return x;
}

}  // namespace detail

inline constexpr double kPerronTol = 1e-12;
inline constexpr int kPerronMaxIter = 100000;

/// Perron eigenvalue and positive eigenvectors of a weighted irreducible graph.
/// Normalization: right vector sums to 1, ⟨left, right⟩ = 1.
inline PerronData perron_weighted(std::size_t n, const std::vector<Edge>& edges, const std::vector<double>& w,
                                  double tol = kPerronTol, int max_iter = kPerronMaxIter) {
  PerronData p;
  double lr = 0.0, ll = 0.0, rr = 0.0, rl = 0.0;
  int ir = 0, il = 0;
  p.right = detail::shifted_power(n, edges, w, false, lr, rr, ir, tol, max_iter);
  p.left = detail::shifted_power(n, edges, w, true, ll, rl, il, tol, max_iter);
  p.iterations = std::max(ir, il);
  p.residual = std::max(rr, rl);
  if (p.residual > tol)
    throw Error(ErrorCode::NoConvergence, "power iteration residual " + std::to_string(p.residual));
  p.value = lr;
  double s = std::accumulate(p.right.begin(), p.right.end(), 0.0);
  for (double& t : p.right) t /= s;
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += p.left[i] * p.right[i];
  for (double& t : p.left) t /= dot;
  p.entropy = std::log(p.value);
  return p;
}

inline PerronData perron(const Sft& g) {
  if (!is_irreducible(g)) throw Error(ErrorCode::NotIrreducible, "perron requires an irreducible graph");
  return perron_weighted(g.size(), g.edges(), std::vector<double>(g.edge_count(), 1.0));
}

// ---------------------------------------------------------------------------
// Higher-block presentations

struct BlockPresentation {
  int order = 1;
  Sft block_sft;
  std::vector<std::vector<int>> words;  // block symbol -> m-word over the base alphabet
  std::vector<int> symbol_map;          // block symbol -> initial symbol
};

inline constexpr std::size_t kDefaultBlockCap = 1000000;

inline BlockPresentation higher_block(const Sft& g, int m, std::size_t cap = kDefaultBlockCap) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "block order must be >= 1");
  BlockPresentation bp;
  bp.order = m;
  // Admissible m-words in lexicographic order. On an essential graph every
  // admissible word extends both ways, so no pruning happens here.
  std::vector<std::vector<int>> words;
  for (std::size_t v = 0; v < g.size(); ++v) words.push_back({static_cast<int>(v)});
  for (int len = 1; len < m; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& w : words)
      for (int e : g.out_edges(w.back())) {
        auto x = w;
        x.push_back(g.edge(static_cast<std::size_t>(e)).to);
        next.push_back(std::move(x));
        if (next.size() > cap)
          throw Error(ErrorCode::BlockExplosion, "more than " + std::to_string(cap) + " admissible words");
      }
    words = std::move(next);
  }
  std::map<std::vector<int>, int> index;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < words.size(); ++i) {
    index.emplace(words[i], static_cast<int>(i));
    std::string l;
    for (std::size_t j = 0; j < words[i].size(); ++j) {
      if (j) l += ',';
      l += g.symbol(words[i][j]);
    }
    labels.push_back(std::move(l));
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    for (int e : g.out_edges(w.back())) {
      std::vector<int> nxt(w.begin() + 1, w.end());
      nxt.push_back(g.edge(static_cast<std::size_t>(e)).to);
      edges.push_back({static_cast<int>(i), index.at(nxt)});
    }
  }
  bp.block_sft = Sft::from_indices(std::move(labels), std::move(edges));
  bp.words = std::move(words);
  for (const auto& w : bp.words) bp.symbol_map.push_back(w.front());
  return bp;
}

}  // namespace relent
