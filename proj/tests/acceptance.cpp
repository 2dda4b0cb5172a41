// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "relent/relent.hpp"

using namespace relent;

namespace {

/// Collects the sub-checks of one criterion.
struct Criterion {
  int id;
  std::string title;
  bool ok = true;
  std::vector<std::string> notes;

  void check(bool cond, const std::string& what) {
    if (!cond) ok = false;
    notes.push_back((cond ? "" : "!") + what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s=%.10g (want %.10g ± %.1e)", what.c_str(), got, want, tol);
    check(std::abs(got - want) <= tol, buf);
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int failures = 0;

void run(int id, const std::string& title, double budget_s, const std::function<void(Criterion&)>& body) {
  Criterion c{id, title, true, {}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const Error& e) {
    c.check(false, std::string("error ") + std::string(to_string(e.code())) + ": " + e.what());
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0) c.check(secs < budget_s, fmt("runtime %.2fs < %.0fs", secs, budget_s));
  else c.notes.push_back(fmt("runtime %.2fs", secs));
  std::printf("%s criterion %d: %s\n", c.ok ? "PASS" : "FAIL", c.id, c.title.c_str());
  for (const auto& n : c.notes) std::printf("    %s\n", n.c_str());
  std::fflush(stdout);
  failures += !c.ok;
}

/// Y = full 2-shift, X = Y × {a, b}; fibre chains given by P(a) per lift (Bernoulli fibres).
struct ProductInstance {
  Sft x;
  OneBlockCode code;
  MarkovMeasure nu;
  std::vector<MarkovMeasure> mus;
};

ProductInstance bernoulli_fibres(const MarkovMeasure& nu, const std::vector<double>& betas) {
  ProductInstance p;
  p.nu = nu;
  std::vector<std::string> xs;
  std::map<std::string, std::string> map;
  for (const auto& y : nu.host.symbols())
    for (const char* f : {"a", "b"}) {
      xs.push_back(y + f);
      map[y + f] = y;
    }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : nu.host.edges())
    for (const char* f : {"a", "b"})
      for (const char* g : {"a", "b"}) edges.emplace_back(nu.host.symbol(e.from) + f, nu.host.symbol(e.to) + g);
  p.x = build_sft(xs, edges);
  p.code = validate_code(p.x, nu.host, map);
  for (double beta : betas) {
    std::vector<double> q(p.x.edge_count());
    for (const auto& e : p.x.edges()) {
      const std::string& s = p.x.symbol(e.from);
      const std::string& t = p.x.symbol(e.to);
      const int f = nu.host.edge_index(nu.host.index_of(s.substr(0, s.size() - 1)), nu.host.index_of(t.substr(0, t.size() - 1)));
      // Stationary product frequency: ν-edge mass times the fibre marginals at both ends.
      const double pf = (s.back() == 'a' ? beta : 1 - beta) * (t.back() == 'a' ? beta : 1 - beta);
      q[static_cast<std::size_t>(p.x.edge_index(e.from, e.to))] = nu.edge_freq[static_cast<std::size_t>(f)] * pf;
    }
    p.mus.push_back(make_measure(p.x, q));
  }
  return p;
}

/// Strongly connected class of `seed` by plain reachability, without the library's SCC routine.
std::set<int> brute_class(const Sft& g, int seed) {
  const auto reach = oracle::reachability(g.size(), g.edges());
  std::set<int> c;
  for (int v = 0; v < static_cast<int>(g.size()); ++v)
    if (reach[static_cast<std::size_t>(seed)][static_cast<std::size_t>(v)] && reach[static_cast<std::size_t>(v)][static_cast<std::size_t>(seed)])
      c.insert(v);
  return c;
}

/// Overlapping pairs, componentwise edges, then repeated removal of sources and sinks.
struct BruteProduct {
  std::set<std::pair<int, int>> vertices;
  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> edges;
};

BruteProduct brute_product(const Sft& b, const Sft& f, const std::function<bool(int, int)>& ov) {
  BruteProduct g;
  for (int p = 0; p < static_cast<int>(b.size()); ++p)
    for (int r = 0; r < static_cast<int>(f.size()); ++r)
      if (ov(p, r)) g.vertices.insert({p, r});
  for (auto u : g.vertices)
    for (auto v : g.vertices)
      if (b.has_edge(u.first, v.first) && f.has_edge(u.second, v.second)) g.edges.insert({u, v});
  for (bool changed = true; changed;) {
    changed = false;
    for (auto it = g.vertices.begin(); it != g.vertices.end();) {
      bool in = false, out = false;
      for (const auto& [a, c] : g.edges) {
        out |= a == *it;
        in |= c == *it;
      }
      if (in && out) {
        ++it;
        continue;
      }
      const auto v = *it;
      it = g.vertices.erase(it);
      std::erase_if(g.edges, [&](const auto& e) { return e.first == v || e.second == v; });
      changed = true;
    }
  }
  return g;
}

}  // namespace

int main() {
  const double log2 = std::log(2.0);

  run(1, "Perron and Parry", 1.0, [](Criterion& c) {
    const Sft golden = build_sft({"0", "1"}, {{"0", "0"}, {"0", "1"}, {"1", "0"}});
    const double phi = (1 + std::sqrt(5.0)) / 2;
    c.near(perron(golden).entropy, std::log(phi), 1e-9, "h(golden)");
    c.near(std::log(oracle::spectral_radius(golden.size(), golden.edges())), std::log(phi), 1e-9, "log eig(golden)");
    c.near(perron(full_shift(2)).entropy, std::log(2.0), 1e-12, "h(full2)");
    double worst = 0;
    for (const Sft& g : {golden, full_shift(2), full_shift(3)}) {
      const auto mu = parry_measure(g);
      worst = std::max(worst, mu.stationarity_residual());
      c.near(entropy_rate(mu), perron(g).entropy, 1e-9, "h(Parry " + std::to_string(g.size()) + ")");
    }
    c.check(worst <= 1e-12, fmt("Parry stationarity residual %.2e <= 1e-12", worst));
  });

  run(2, "relative entropy of a product lift", 0, [](Criterion& c) {
    const auto nu = parry_measure(build_sft({"0", "1"}, {{"0", "0"}, {"0", "1"}, {"1", "0"}}));
    const auto p = bernoulli_fibres(nu, {0.3});
    const double r = relative_entropy(p.mus[0], nu, p.code);
    c.near(r, oracle::h(0.3), 1e-9, "h(mu|nu)");
    c.near(oracle::h(0.3), 0.6109, 1e-4, "H(0.3)");
  });

  run(3, "MMRE solver", 30.0, [&](Criterion& c) {
    const auto nu = bernoulli({0.3, 0.7});
    const auto code = validate_code_indices(full_shift(4), full_shift(2), {0, 0, 1, 1});
    const auto s = solve_mmre(build_lift_constraints(code, nu, 1));
    c.check(s.converged, "4->2 converged");
    c.near(s.h_rel, log2, 1e-6, "h_rel(4->2)");
    const std::vector<double> q{0.15, 0.15, 0.35, 0.35};
    double worst = 0;
    for (const auto& e : s.measure.host.edges()) {
      const double got = s.measure.edge_freq[static_cast<std::size_t>(s.measure.host.edge_index(e.from, e.to))];
      worst = std::max(worst, std::abs(got - q[static_cast<std::size_t>(e.from)] * q[static_cast<std::size_t>(e.to)]));
    }
    c.check(worst <= 1e-4, fmt("edge frequencies off by %.2e <= 1e-4", worst));
    // Direct entropy of the claimed optimum.
    double h_direct = 0;
    for (double a : q) h_direct -= a * std::log(a);
    c.near(s.objective, h_direct, 1e-6, "objective vs direct");

    const auto id = solve_mmre(build_lift_constraints(identity_code(nu.host), nu, 1));
    c.near(id.h_rel, 0.0, 1e-10, "h_rel(identity)");

    std::mt19937_64 rng(2024);
    int done = 0, trials = 0, drops = 0;
    double worst_drop = 0;
    while (done < 20 && trials < 5000) {
      ++trials;
      Sft x;
      try {
        x = Sft::from_indices(oracle::labels(4), oracle::random_edges(4, 0.6, rng));
      } catch (const Error&) {
        continue;
      }
      if (x.size() != 4 || !is_irreducible(x)) continue;
      std::vector<int> map(4);
      for (auto& m : map) m = static_cast<int>(rng() % 2);
      const auto cd = validate_code_indices(x, full_shift(2), map);
      if (!cd.edge_surjective) continue;
      std::uniform_real_distribution<double> u(0.2, 0.8);
      const double p0 = u(rng);
      const auto nu_b = bernoulli({p0, 1 - p0});
      std::vector<SweepPoint> pts;
      try {
        pts = order_sweep(cd, nu_b, 3);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Infeasible || e.code() == ErrorCode::InfeasibleSupport) continue;
        throw;
      }
      for (std::size_t i = 1; i < pts.size(); ++i) {
        const double d = pts[i - 1].h_rel - pts[i].h_rel;
        worst_drop = std::max(worst_drop, d);
        drops += d > 2e-8;
      }
      ++done;
    }
    c.check(done == 20, "random sweep instances " + std::to_string(done) + "/20 (" + std::to_string(trials) + " draws)");
    c.check(drops == 0, fmt("order sweeps nondecreasing within 2e-8 (largest drop %.2e)", worst_drop));
  });

  const auto nu_half = bernoulli({0.5, 0.5});
  const auto p92 = bernoulli_fibres(nu_half, {0.9, 0.2});
  const auto p99 = bernoulli_fibres(nu_half, {0.9, 0.9});

  run(4, "coincidence probability", 60.0, [&](Criterion& c) {
    const JoiningSampler s(p92.mus[0], p92.mus[1], p92.code, kDefaultWindow, 41);
    const auto e = coincidence_probability(s, 100000);
    c.near(e.value, 0.26, 0.005, "P(u0=v0) Ber(0.9)/Ber(0.2)");
    c.check(e.n == 100000, "n = 100000");
    const JoiningSampler t(p99.mus[0], p99.mus[1], p99.code, kDefaultWindow, 42);
    const auto f = coincidence_probability(t, 100000);
    c.check(std::abs(f.value - 0.82) <= 3 * f.std_error,
            fmt("P(u0=v0) Ber(0.9)/Ber(0.9) = %.5f within 3σ (σ=%.1e) of 0.82", f.value, f.std_error));
  });

  run(5, "PQS entropy gain", 300.0, [&](Criterion& c) {
    const JoiningSampler s(p92.mus[0], p92.mus[1], p92.code, kDefaultWindow, 51);
    const auto xi = xi_estimate(s, 100000);
    const double closed = 0.26 * (oracle::h(0.55) - 0.5 * oracle::h(0.9) - 0.5 * oracle::h(0.2));
    c.near(closed, 0.0716, 1e-4, "closed form");
    c.near(xi.integral.value, 0.0716, 0.01, "int_S Xi");
    c.check(xi.min_xi >= -1e-12, fmt("Xi >= 0 pointwise (min %.2e)", xi.min_xi));

    const std::size_t len = 1000000;
    const auto path = pqs_measure_path(s, len, 52);
    std::size_t bad = 0;
    for (std::size_t k = 0; k + 1 < path.path.size(); ++k) bad += !p92.x.has_edge(path.path[k], path.path[k + 1]);
    c.check(path.path.size() == len && bad == 0, "switched path admissible: " + std::to_string(bad) + " violations over " +
                                                     std::to_string(path.path.size()) + " symbols");
    const double h1 = entropy_rate(p92.mus[0]), h2 = entropy_rate(p92.mus[1]);
    const auto est = empirical_entropy(path.path, 6, static_cast<int>(p92.x.size()));
    const double gain = est.value - 0.5 * (h1 + h2);
    const double sigma = std::hypot(xi.integral.std_error, est.std_error);
    const double floor = xi.integral.value - 3 * sigma;
    c.check(floor > 0, fmt("int_S Xi - 3σ = %.5f > 0 (σ=%.1e)", floor, sigma));
    c.check(gain >= floor, fmt("h(mu3) - (h1+h2)/2 = %.5f >= %.5f (l=6)", gain, floor));
  });

  run(6, "conditional equality gap", 0, [&](Criterion& c) {
    const auto g = conditional_equality_gap(JoiningSampler(p92.mus[0], p92.mus[1], p92.code, kDefaultWindow, 61), 20000);
    c.check(!g.s_empty, "S nonempty (" + std::to_string(g.hits) + " hits)");
    c.near(g.per_symbol[static_cast<std::size_t>(p92.x.index_of("0a"))].value, 0.7, 0.02, "gap at 0a");
    const auto e = conditional_equality_gap(JoiningSampler(p99.mus[0], p99.mus[0], p99.code, kDefaultWindow, 62), 20000);
    c.check(!e.s_empty && e.mean_sup_gap.value <= 3 * e.mean_sup_gap.std_error + 1e-12,
            fmt("equal lifts: mean sup gap %.2e <= 3σ (σ=%.1e)", e.mean_sup_gap.value, e.mean_sup_gap.std_error));
  });

  run(7, "alphabet truncation", 0, [](Criterion& c) {
    const Sft x = full_shift(6);
    const auto code = validate_code_indices(x, full_shift(2), {0, 0, 0, 1, 1, 1});
    // μ(x → x') = q(πx, πx') r(x'): every merge of same-label symbols is lumpable.
    const double q[2][2] = {{0.7, 0.3}, {0.4, 0.6}};
    const double r[6] = {0.5, 0.3, 0.2, 0.6, 0.25, 0.15};
    std::vector<double> w(x.edge_count());
    for (const auto& e : x.edges())
      w[static_cast<std::size_t>(x.edge_index(e.from, e.to))] = q[code(e.from)][code(e.to)] * r[e.to];
    const auto mu = stationary_from_transition(x, w);
    double prev = -1;
    bool mono = true, exact = true, composes = true;
    std::string ladder;
    for (int n = 0; n <= 6; ++n) {
      const auto t = truncate_alphabet(code, n);
      const auto img = image_entropy(mu, t.proj);
      exact = exact && img.exact;
      mono = mono && img.value >= prev - 1e-12;
      prev = img.value;
      ladder += fmt(" %.6f", img.value);
      for (int s = 0; s < 6; ++s) composes = composes && t.pi_n(t.proj(s)) == code(s);
      for (const auto& e : x.edges()) composes = composes && t.pi_n.edge_map[t.proj.edge_map[static_cast<std::size_t>(x.edge_index(e.from, e.to))]] ==
                                                                code.edge_map[static_cast<std::size_t>(x.edge_index(e.from, e.to))];
    }
    c.check(mono, "pushforward entropies nondecreasing:" + ladder);
    c.check(exact, "each level lumpable, entropies exact");
    c.near(prev, entropy_rate(mu), 1e-9, "level 6 vs entropy_rate");
    c.check(composes, "pi = pi_n o proj on symbols and edges");
  });

  run(8, "product coding graph", 0, [](Criterion& c) {
    const Sft base = build_sft({"P0", "P1"}, {{"P0", "P0"}, {"P0", "P1"}, {"P1", "P0"}});
    const Sft fiber = build_sft({"R0", "R1", "R2"}, {{"R0", "R1"}, {"R1", "R2"}, {"R2", "R0"}, {"R1", "R1"}, {"R2", "R2"}});
    int built = 0, empty = 0, mismatches = 0, cores = 0, core_mismatches = 0;
    // Every overlap relation on the 2×3 alphabet.
    for (unsigned mask = 0; mask < 64; ++mask) {
      auto ov = [mask](int p, int r) { return ((mask >> (3 * p + r)) & 1u) != 0; };
      const auto brute = brute_product(base, fiber, ov);
      ProductCodingGraph g;
      try {
        g = build_product_coding_graph(base, fiber, OverlapOracle::from_predicate(ov));
      } catch (const Error& e) {
        mismatches += !(e.code() == ErrorCode::EmptyProduct && brute.vertices.empty());
        ++empty;
        continue;
      }
      ++built;
      std::set<std::pair<int, int>> verts(g.pair_of.begin(), g.pair_of.end());
      std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> edges;
      for (const auto& e : g.product.edges())
        edges.insert({g.pair_of[static_cast<std::size_t>(e.from)], g.pair_of[static_cast<std::size_t>(e.to)]});
      mismatches += verts != brute.vertices || edges != brute.edges;
      // Projections re-validated as 1-block codes.
      std::vector<int> mb, mf;
      for (auto [p, r] : g.pair_of) {
        mb.push_back(p);
        mf.push_back(r);
      }
      validate_code_indices(g.product, base, mb);
      validate_code_indices(g.product, fiber, mf);
      for (int seed = 0; seed < static_cast<int>(g.product.size()); ++seed) {
        const auto cls = brute_class(g.product, seed);
        if (cls.empty()) continue;
        ++cores;
        const auto core = irreducible_core(g, seed);
        std::set<std::pair<int, int>> want;
        for (int v : cls) want.insert(g.pair_of[static_cast<std::size_t>(v)]);
        std::size_t want_edges = 0;
        for (const auto& e : g.product.edges()) want_edges += cls.count(e.from) && cls.count(e.to);
        const std::set<std::pair<int, int>> got(core.pair_of.begin(), core.pair_of.end());
        core_mismatches += got != want || core.product.edge_count() != want_edges;
      }
    }
    c.check(mismatches == 0, std::to_string(built) + " products and " + std::to_string(empty) +
                                 " empty cases match enumeration (" + std::to_string(mismatches) + " mismatches)");
    c.check(core_mismatches == 0, std::to_string(cores) + " irreducible cores match reachability classes (" +
                                      std::to_string(core_mismatches) + " mismatches)");
  });

  run(9, "standard map certificate", 60.0, [](Criterion& c) {
    const SkewStandardSystem sys(4.0);
    const auto strips = find_strips(4.0);
    c.check(strips.j1.lo >= 0.0722 && strips.j1.hi <= 0.4278,
            fmt("J1 = [%.6f, %.6f] inside [0.0722, 0.4278]", strips.j1.lo, strips.j1.hi));
    c.check(strips.j2.lo >= 0.5450 && strips.j2.hi <= 0.9550,
            fmt("J2 = [%.6f, %.6f] inside [0.5450, 0.9550]", strips.j2.lo, strips.j2.hi));
    CertifyOptions opt;
    opt.seed = 9;
    const auto cert = certify_relative_entropy(sys, 12, opt);
    c.check(cert.max_graph_slope <= 1.0 / 8,
            fmt("graph-transform slope %.4f <= 1/8 over %.0f calls", cert.max_graph_slope, static_cast<double>(cert.graph_transform_calls)));
    const double bound = (1.0 / 3) * std::pow(8.0, -11);
    c.check(cert.verified == 4096 * cert.omegas.size() && cert.max_width <= bound,
            fmt("%.0f shadows verified, max width %.3e <= %.3e", static_cast<double>(cert.verified), cert.max_width, bound));
    c.check(cert.issued && std::abs(cert.bound - std::log(2.0)) < 1e-15, "certificate h_top >= log 2 issued");
    // Independent forward iteration of a sample of the shadowed start points.
    std::mt19937_64 rng(99);
    const BasePoint w = cert.omegas.front();
    int off = 0;
    for (int trial = 0; trial < 64; ++trial) {
      std::vector<int> r(12);
      for (int& x : r) x = 1 + static_cast<int>(rng() % 2);
      const auto sh = shadow(sys, strips, w, r);
      Torus x{sh.t0, 0.0};
      BasePoint wl = w;
      for (std::size_t l = 0; l < r.size(); ++l) {
        off += !strips[r[l]].contains(x[0]);
        x = evaluate(sys, wl.value(), x);
        wl = wl.next();
      }
    }
    c.check(off == 0, "forward iteration of 64 shadowed points stays on itinerary (" + std::to_string(off) + " misses)");
  });

  run(10, "Lyapunov exponents", 0, [](Criterion& c) {
    const SkewStandardSystem sys(4.0);
    const double lam = std::log((3 + std::sqrt(5.0)) / 2);
    const auto b = base_lyapunov(sys);
    c.near(b.plus, lam, 1e-9, "base +");
    c.near(b.minus, -lam, 1e-9, "base -");
    Eigen::Matrix2d cat;
    cat << 2, 1, 1, 1;
    c.near(std::log(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cat).eigenvalues().maxCoeff()), lam, 1e-9, "log eig(cat)");

    const auto z = fiber_lyapunov(SkewStandardSystem(0.0), BasePoint::random(10, 0), {0.1, 0.2}, 100000);
    c.near(z.plus, 0.0, 0.02, "k=0 lambda+");
    c.near(z.minus, 0.0, 0.02, "k=0 lambda-");

    std::mt19937_64 rng(1010);
    std::vector<int> r(10000);
    for (int& x : r) x = 1 + static_cast<int>(rng() % 2);
    const auto orbit = shadow_orbit(sys, find_strips(4.0), BasePoint::random(10, 1), r);
    const auto l = fiber_lyapunov_along(sys, orbit);
    c.check(l.plus >= std::log(8.0) - 0.1, fmt("k=4 lambda+ = %.5f >= log 8 - 0.1 = %.5f", l.plus, std::log(8.0) - 0.1));
    c.near(l.plus + l.minus, 0.0, 0.02, "lambda+ + lambda-");
    // Growth of a single tangent vector, renormalized every step.
    double vx = 1, vy = 0, acc = 0;
    for (double x1 : orbit) {
      const double nx = sys.d(x1) * vx - vy, ny = vx;
      const double n = std::hypot(nx, ny);
      acc += std::log(n);
      vx = nx / n;
      vy = ny / n;
    }
    c.near(acc / static_cast<double>(orbit.size()), l.plus, 0.01, "lambda+ by vector growth");
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
