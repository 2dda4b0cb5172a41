#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "relent/errors.hpp"
#include "relent/sft.hpp"

namespace relent {

/// Symbol map from `source` to `target` inducing a factor map between the shifts.
struct OneBlockCode {
  Sft source;
  Sft target;
  std::vector<int> map;       // source symbol -> target symbol
  std::vector<int> edge_map;  // source edge -> target edge
  bool symbol_surjective = false;
  bool edge_surjective = false;  // every target edge is the image of a source edge

  int operator()(int s) const { return map.at(static_cast<std::size_t>(s)); }

  std::vector<int> apply(const std::vector<int>& word) const {
    std::vector<int> out;
    out.reserve(word.size());
    for (int s : word) out.push_back(map.at(static_cast<std::size_t>(s)));
    return out;
  }

  /// Source symbols sharing each target symbol.
  std::vector<std::vector<int>> preimages() const {
    std::vector<std::vector<int>> pre(target.size());
    for (std::size_t s = 0; s < map.size(); ++s) pre[static_cast<std::size_t>(map[s])].push_back(static_cast<int>(s));
    return pre;
  }
};

inline OneBlockCode validate_code_indices(const Sft& source, const Sft& target, std::vector<int> map) {
  if (map.size() != source.size())
    throw Error(ErrorCode::InvalidArgument, "symbol map must be total on the source alphabet");
  for (int t : map)
    if (t < 0 || static_cast<std::size_t>(t) >= target.size())
      throw Error(ErrorCode::UnknownSymbol, "symbol map points outside the target alphabet");
  OneBlockCode c{source, target, std::move(map), {}, false, false};
  std::vector<char> hit_sym(target.size(), 0), hit_edge(target.edge_count(), 0);
  c.edge_map.reserve(source.edge_count());
  for (const auto& e : source.edges()) {
    const int a = c.map[static_cast<std::size_t>(e.from)], b = c.map[static_cast<std::size_t>(e.to)];
    const int te = target.edge_index(a, b);
    if (te < 0)
      throw Error(ErrorCode::EdgeNotPreserved, "source edge (" + source.symbol(e.from) + "," + source.symbol(e.to) +
                                                   ") maps to non-edge (" + target.symbol(a) + "," +
                                                   target.symbol(b) + ")");
    c.edge_map.push_back(te);
    hit_edge[static_cast<std::size_t>(te)] = 1;
    hit_sym[static_cast<std::size_t>(a)] = 1;
  }
  c.symbol_surjective = std::all_of(hit_sym.begin(), hit_sym.end(), [](char h) { return h != 0; });
  c.edge_surjective = std::all_of(hit_edge.begin(), hit_edge.end(), [](char h) { return h != 0; });
  return c;
}

inline OneBlockCode validate_code(const Sft& source, const Sft& target,
                                  const std::map<std::string, std::string>& symbol_map) {
  std::vector<int> m(source.size(), -1);
  for (const auto& [s, t] : symbol_map) {
    auto is = source.find(s);
    if (!is) continue;  // symbols pruned from the source are allowed in the map
    m[static_cast<std::size_t>(*is)] = target.index_of(t);
  }
  for (std::size_t s = 0; s < m.size(); ++s)
    if (m[s] < 0)
      throw Error(ErrorCode::InvalidArgument, "symbol map misses source symbol '" + source.symbol(static_cast<int>(s)) + "'");
  return validate_code_indices(source, target, std::move(m));
}

inline OneBlockCode identity_code(const Sft& x) {
  std::vector<int> m(x.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<int>(i);
  return validate_code_indices(x, x, std::move(m));
}

/// second ∘ first.
inline OneBlockCode compose(const OneBlockCode& first, const OneBlockCode& second) {
  if (!(first.target == second.source)) throw Error(ErrorCode::CodeMismatch, "compose: target/source differ");
  std::vector<int> m(first.map.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = second.map[static_cast<std::size_t>(first.map[i])];
  return validate_code_indices(first.source, second.target, std::move(m));
}

/// Code from an order-m block presentation to the base shift (initial symbol).
inline OneBlockCode block_to_base(const BlockPresentation& bp, const Sft& base) {
  return validate_code_indices(bp.block_sft, base, bp.symbol_map);
}

// ---------------------------------------------------------------------------
// Finite-to-one analysis

struct Diamond {
  std::vector<int> u;      // source path
  std::vector<int> v;      // second source path, same endpoints and image
  std::vector<int> image;  // common target word
};

struct FiniteToOneReport {
  bool finite_to_one = true;
  std::optional<Diamond> witness;
};

/// Diamond search on the pair graph {(u,v): code(u) = code(v)}. A diamond is a
/// path from the diagonal, through off-diagonal pairs, back to the diagonal.
inline FiniteToOneReport is_finite_to_one(const OneBlockCode& code) {
  const Sft& x = code.source;
  if (!is_irreducible(x)) throw Error(ErrorCode::NotIrreducible, "source of the code must be irreducible");
  const std::size_t n = x.size();
  auto id = [n](int a, int b) { return static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b); };
  for (int d = 0; d < static_cast<int>(n); ++d) {
    std::vector<long> parent(n * n, -2);
    std::deque<std::pair<int, int>> queue;
    const std::size_t root = id(d, d);
    parent[root] = -1;
    queue.emplace_back(d, d);
    while (!queue.empty()) {
      auto [a, b] = queue.front();
      queue.pop_front();
      // successor pairs in lexicographic order
      for (int ea : x.out_edges(a)) {
        const int a2 = x.edge(static_cast<std::size_t>(ea)).to;
        for (int eb : x.out_edges(b)) {
          const int b2 = x.edge(static_cast<std::size_t>(eb)).to;
          if (code(a2) != code(b2)) continue;
          const bool from_root = (a == d && b == d && parent[id(a, b)] == -1);
          if (a2 == b2) {
            if (from_root) continue;  // diagonal step from the start is not a branch
            Diamond dm;
            std::vector<std::pair<int, int>> rev{{a2, b2}};
            long cur = static_cast<long>(id(a, b));
            while (cur >= 0) {
              rev.emplace_back(static_cast<int>(static_cast<std::size_t>(cur) / n),
                               static_cast<int>(static_cast<std::size_t>(cur) % n));
              cur = parent[static_cast<std::size_t>(cur)];
            }
            std::reverse(rev.begin(), rev.end());
            for (auto [p, q] : rev) {
              dm.u.push_back(p);
              dm.v.push_back(q);
              dm.image.push_back(code(p));
            }
            return {false, dm};
          }
          const std::size_t nid = id(a2, b2);
          if (parent[nid] != -2) continue;
          parent[nid] = static_cast<long>(id(a, b));
          queue.emplace_back(a2, b2);
        }
      }
    }
  }
  return {true, std::nullopt};
}

/// Degree of a finite-to-one code: min over target words w and positions i of the
/// number of distinct source symbols at i among preimage paths of w. Computed as
/// min |F ∩ B| over forward-reachable and backward-reachable preimage subsets.
inline int degree(const OneBlockCode& code, std::optional<std::size_t> word_cap = std::nullopt) {
  const Sft& x = code.source;
  if (!is_irreducible(code.target)) throw Error(ErrorCode::NotIrreducible, "target must be irreducible");
  if (!is_finite_to_one(code).finite_to_one) throw Error(ErrorCode::NotFiniteToOne, "code has a diamond");
  const std::size_t cap = word_cap.value_or(2 * x.size() * x.size());
  const auto pre = code.preimages();

  using Subset = std::vector<int>;
  auto explore = [&](bool forward) {
    std::set<Subset> seen;
    std::vector<Subset> frontier;
    for (const auto& p : pre)
      if (!p.empty() && seen.insert(p).second) frontier.push_back(p);
    std::size_t depth = 1;
    while (!frontier.empty()) {
      std::vector<Subset> next;
      for (const auto& s : frontier) {
        std::map<int, std::set<int>> by_label;
        for (int u : s) {
          const auto& es = forward ? x.out_edges(u) : x.in_edges(u);
          for (int e : es) {
            const auto& ed = x.edge(static_cast<std::size_t>(e));
            const int w = forward ? ed.to : ed.from;
            by_label[code(w)].insert(w);
          }
        }
        for (auto& [lab, set] : by_label) {
          Subset t(set.begin(), set.end());
          if (seen.insert(t).second) next.push_back(std::move(t));
        }
      }
      if (!next.empty() && ++depth > cap)
        throw Error(ErrorCode::Inconclusive, "preimage subsets still growing at word length " + std::to_string(cap));
      frontier = std::move(next);
    }
    return seen;
  };
  const auto fwd = explore(true);
  const auto bwd = explore(false);
  int best = static_cast<int>(x.size()) + 1;
  for (const auto& f : fwd)
    for (const auto& b : bwd) {
      Subset inter;
      std::set_intersection(f.begin(), f.end(), b.begin(), b.end(), std::back_inserter(inter));
      if (!inter.empty()) best = std::min(best, static_cast<int>(inter.size()));
    }
  return best;
}

// ---------------------------------------------------------------------------
// Fiber product

struct FiberProduct {
  Sft pairs;
  std::vector<std::pair<int, int>> pair_of;  // product symbol -> (u, v)
  std::vector<bool> diagonal;
  OneBlockCode first;
  OneBlockCode second;
};

inline FiberProduct fiber_product(const OneBlockCode& code) {
  const Sft& x = code.source;
  std::vector<std::string> labels;
  std::vector<std::pair<int, int>> pairs;
  std::map<std::pair<int, int>, int> idx;
  for (int u = 0; u < static_cast<int>(x.size()); ++u)
    for (int v = 0; v < static_cast<int>(x.size()); ++v)
      if (code(u) == code(v)) {
        idx.emplace(std::pair{u, v}, static_cast<int>(pairs.size()));
        pairs.emplace_back(u, v);
        labels.push_back("(" + x.symbol(u) + "," + x.symbol(v) + ")");
      }
  std::vector<Edge> edges;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [u, v] = pairs[p];
    for (int eu : x.out_edges(u))
      for (int ev : x.out_edges(v)) {
        auto it = idx.find({x.edge(static_cast<std::size_t>(eu)).to, x.edge(static_cast<std::size_t>(ev)).to});
        if (it != idx.end()) edges.push_back({static_cast<int>(p), it->second});
      }
  }
  FiberProduct fp;
  fp.pairs = Sft::from_indices(labels, std::move(edges));
  std::vector<int> m1, m2;
  for (const auto& l : fp.pairs.symbols()) {
    auto [u, v] = pairs[static_cast<std::size_t>(std::find(labels.begin(), labels.end(), l) - labels.begin())];
    fp.pair_of.emplace_back(u, v);
    fp.diagonal.push_back(u == v);
    m1.push_back(u);
    m2.push_back(v);
  }
  fp.first = validate_code_indices(fp.pairs, x, std::move(m1));
  fp.second = validate_code_indices(fp.pairs, x, std::move(m2));
  return fp;
}

// ---------------------------------------------------------------------------
// Alphabet truncation α_n ∨ γ

struct Truncation {
  int level = 0;
  std::vector<std::vector<int>> atoms;  // X_n symbol -> source symbols in the atom
  std::vector<int> atom_of;             // source symbol -> X_n symbol
  std::vector<int> atom_label;          // X_n symbol -> target symbol
  Sft xn;
  OneBlockCode proj;  // X -> X_n
  OneBlockCode pi_n;  // X_n -> Y
};

/// Level-n truncation: the first n symbols of `enumeration` (default: alphabet
/// order) stay separate atoms; the rest are merged within each fibre of `code`.
/// Singletons come first in enumeration order, merged atoms follow by target label.
inline Truncation truncate_alphabet(const OneBlockCode& code, int n, std::vector<int> enumeration = {}) {
  const Sft& x = code.source;
  const int size = static_cast<int>(x.size());
  if (n < 0 || n > size)
    throw Error(ErrorCode::BadLevel, "level " + std::to_string(n) + " outside [0, " + std::to_string(size) + "]");
  if (enumeration.empty()) {
    enumeration.resize(x.size());
    for (int i = 0; i < size; ++i) enumeration[static_cast<std::size_t>(i)] = i;
  }
  {
    auto sorted = enumeration;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < size; ++i)
      if (sorted.size() != x.size() || sorted[static_cast<std::size_t>(i)] != i)
        throw Error(ErrorCode::InvalidArgument, "enumeration must be a permutation of the source alphabet");
  }
  Truncation t;
  t.level = n;
  t.atom_of.assign(x.size(), -1);
  for (int i = 0; i < n; ++i) {
    const int s = enumeration[static_cast<std::size_t>(i)];
    t.atom_of[static_cast<std::size_t>(s)] = static_cast<int>(t.atoms.size());
    t.atoms.push_back({s});
    t.atom_label.push_back(code(s));
  }
  std::map<int, std::vector<int>> rest;
  for (int i = n; i < size; ++i) {
    const int s = enumeration[static_cast<std::size_t>(i)];
    rest[code(s)].push_back(s);
  }
  for (auto& [label, syms] : rest) {
    std::sort(syms.begin(), syms.end());
    for (int s : syms) t.atom_of[static_cast<std::size_t>(s)] = static_cast<int>(t.atoms.size());
    t.atoms.push_back(syms);
    t.atom_label.push_back(label);
  }
  std::vector<std::string> labels;
  for (std::size_t a = 0; a < t.atoms.size(); ++a) {
    if (t.atoms[a].size() == 1 && static_cast<int>(a) < n) {
      labels.push_back(x.symbol(t.atoms[a].front()));
    } else {
      std::string l = "[";
      for (std::size_t j = 0; j < t.atoms[a].size(); ++j) l += (j ? "," : "") + x.symbol(t.atoms[a][j]);
      labels.push_back(l + "]");
    }
  }
  std::set<Edge> edges;
  for (const auto& e : x.edges())
    edges.insert({t.atom_of[static_cast<std::size_t>(e.from)], t.atom_of[static_cast<std::size_t>(e.to)]});
  t.xn = Sft::from_indices(labels, {edges.begin(), edges.end()});
  if (t.xn.size() != t.atoms.size())
    throw Error(ErrorCode::InvalidArgument, "truncation graph lost atoms; source must be essential");
  t.proj = validate_code_indices(x, t.xn, t.atom_of);
  t.pi_n = validate_code_indices(t.xn, code.target, t.atom_label);
  return t;
}

}  // namespace relent
