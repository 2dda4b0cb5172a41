#pragma once

#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "relent/code.hpp"
#include "relent/errors.hpp"
#include "relent/sft.hpp"

namespace relent {

/// Which fibre cells R meet which base cells P. Either an explicit list of
/// (P, R) index pairs or a predicate; a predicate is evaluated once per pair.
class OverlapOracle {
 public:
  using Predicate = std::function<bool(int base_symbol, int fiber_symbol)>;

  static OverlapOracle from_pairs(std::vector<std::pair<int, int>> pairs) {
    OverlapOracle o;
    o.pairs_ = std::set<std::pair<int, int>>(pairs.begin(), pairs.end());
    o.explicit_ = true;
    return o;
  }
  static OverlapOracle from_predicate(Predicate p) {
    OverlapOracle o;
    o.pred_ = std::move(p);
    return o;
  }
  static OverlapOracle always(bool value) {
    return from_predicate([value](int, int) { return value; });
  }

  /// Memoized table, row-major by base symbol.
  std::vector<char> table(std::size_t n_base, std::size_t n_fiber) const {
    std::vector<char> t(n_base * n_fiber, 0);
    for (std::size_t p = 0; p < n_base; ++p)
      for (std::size_t r = 0; r < n_fiber; ++r) {
        const int pi = static_cast<int>(p), ri = static_cast<int>(r);
        t[p * n_fiber + r] = explicit_ ? static_cast<char>(pairs_.count({pi, ri}) > 0) : static_cast<char>(pred_(pi, ri));
      }
    return t;
  }

 private:
  bool explicit_ = false;
  std::set<std::pair<int, int>> pairs_;
  Predicate pred_;
};

/// Optional extra condition on product edges ((P,R) → (P',R')).
using ProductEdgeFilter = std::function<bool(std::pair<int, int>, std::pair<int, int>)>;

struct SurjectivityReport {
  bool symbols = false;  // every fibre symbol is hit
  bool edges = false;    // every fibre edge is hit
  std::vector<int> missing_symbols;
};

struct ProductCodingGraph {
  Sft base;
  Sft fiber;
  Sft product;
  std::vector<std::pair<int, int>> pair_of;  // product symbol -> (base P, fibre R)
  OneBlockCode proj_base;
  OneBlockCode proj_fiber;
  std::size_t candidate_vertices = 0;  // overlapping pairs before pruning
  std::size_t candidate_edges = 0;
  SurjectivityReport fiber_surjectivity;
};

inline SurjectivityReport surjectivity(const OneBlockCode& code) {
  SurjectivityReport r;
  r.symbols = code.symbol_surjective;
  r.edges = code.edge_surjective;
  std::vector<char> hit(code.target.size(), 0);
  for (int t : code.map) hit[static_cast<std::size_t>(t)] = 1;
  for (std::size_t s = 0; s < hit.size(); ++s)
    if (!hit[s]) r.missing_symbols.push_back(static_cast<int>(s));
  return r;
}

namespace detail {

inline ProductCodingGraph assemble_product(const Sft& base, const Sft& fiber, std::vector<std::pair<int, int>> pairs,
                                           std::vector<Edge> edges) {
  ProductCodingGraph g;
  g.base = base;
  g.fiber = fiber;
  g.candidate_vertices = pairs.size();
  g.candidate_edges = edges.size();
  std::vector<std::string> labels;
  for (auto [p, r] : pairs) labels.push_back("(" + base.symbol(p) + "," + fiber.symbol(r) + ")");
  try {
    g.product = Sft::from_indices(labels, std::move(edges));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyAfterPruning)
      throw Error(ErrorCode::EmptyProduct, "no overlapping pair survives pruning");
    throw;
  }
  std::vector<int> mb, mf;
  std::size_t j = 0;
  for (const auto& l : g.product.symbols()) {
    while (labels[j] != l) ++j;  // pruning preserves order
    g.pair_of.push_back(pairs[j]);
    mb.push_back(pairs[j].first);
    mf.push_back(pairs[j].second);
  }
  g.proj_base = validate_code_indices(g.product, base, std::move(mb));
  g.proj_fiber = validate_code_indices(g.product, fiber, std::move(mf));
  g.fiber_surjectivity = surjectivity(g.proj_fiber);
  return g;
}

}  // namespace detail

/// Vertices: pairs (P, R) with overlap(P, R). Edges: (P,R) → (P',R') whenever
/// P → P' in the base, R → R' in the fibre graph, and `edge_ok` accepts the pair.
inline ProductCodingGraph build_product_coding_graph(const Sft& base, const Sft& fiber, const OverlapOracle& overlap,
                                                     const ProductEdgeFilter& edge_ok = {}) {
  const auto table = overlap.table(base.size(), fiber.size());
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> index(base.size() * fiber.size(), -1);
  for (std::size_t p = 0; p < base.size(); ++p)
    for (std::size_t r = 0; r < fiber.size(); ++r)
      if (table[p * fiber.size() + r]) {
        index[p * fiber.size() + r] = static_cast<int>(pairs.size());
        pairs.emplace_back(static_cast<int>(p), static_cast<int>(r));
      }
  if (pairs.empty()) throw Error(ErrorCode::EmptyProduct, "overlap relation is empty");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto [p, r] = pairs[i];
    for (int eb : base.out_edges(p))
      for (int ef : fiber.out_edges(r)) {
        const int p2 = base.edge(static_cast<std::size_t>(eb)).to, r2 = fiber.edge(static_cast<std::size_t>(ef)).to;
        const int j = index[static_cast<std::size_t>(p2) * fiber.size() + static_cast<std::size_t>(r2)];
        if (j < 0) continue;
        if (edge_ok && !edge_ok(pairs[i], pairs[static_cast<std::size_t>(j)])) continue;
        edges.push_back({static_cast<int>(i), j});
      }
  }
  return detail::assemble_product(base, fiber, std::move(pairs), std::move(edges));
}

/// Restriction to the maximal irreducible component containing `seed_symbol`
/// (a product symbol index), with projections re-derived.
inline ProductCodingGraph irreducible_core(const ProductCodingGraph& pcg, int seed_symbol) {
  if (seed_symbol < 0 || static_cast<std::size_t>(seed_symbol) >= pcg.product.size())
    throw Error(ErrorCode::UnknownSymbol, "seed symbol index out of range");
  const auto info = strongly_connected_components(pcg.product);
  const int c = info.component_of[static_cast<std::size_t>(seed_symbol)];
  const auto& comp = info.components[static_cast<std::size_t>(c)];
  if (!comp.nontrivial)
    throw Error(ErrorCode::TrivialComponent, "seed " + pcg.product.symbol(seed_symbol) + " lies on no cycle");
  std::vector<int> local(pcg.product.size(), -1);
  std::vector<std::pair<int, int>> pairs;
  for (int v : comp.symbols) {
    local[static_cast<std::size_t>(v)] = static_cast<int>(pairs.size());
    pairs.push_back(pcg.pair_of[static_cast<std::size_t>(v)]);
  }
  std::vector<Edge> edges;
  for (const auto& e : pcg.product.edges()) {
    const int a = local[static_cast<std::size_t>(e.from)], b = local[static_cast<std::size_t>(e.to)];
    if (a >= 0 && b >= 0) edges.push_back({a, b});
  }
  return detail::assemble_product(pcg.base, pcg.fiber, std::move(pairs), std::move(edges));
}

}  // namespace relent
