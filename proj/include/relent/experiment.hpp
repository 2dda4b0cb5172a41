#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "relent/code.hpp"
#include "relent/errors.hpp"
#include "relent/io.hpp"
#include "relent/joining.hpp"
#include "relent/markov.hpp"
#include "relent/mmre.hpp"
#include "relent/product_coding.hpp"
#include "relent/sft.hpp"
#include "relent/skew_standard.hpp"

namespace relent {

inline constexpr const char* kArtifactVersion = "relent 1.0.0";

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"sft-info",     "mmre",        "orthogonality",       "pqs-gain",
                                          "xi",           "truncation",  "product-coding",      "standardmap-certify",
                                          "standardmap-shadow", "standardmap-lyapunov"};
  return k;
}

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3 };

/// Failures that are numerical rather than a problem with the inputs.
inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoConvergence:
    case ErrorCode::MaxIterations:
    case ErrorCode::Inconclusive:
    case ErrorCode::SweepNotMonotone:
    case ErrorCode::DegenerateOrbit:
      return kExitNumerical;
    default:
      return kExitValidation;
  }
}

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::map<std::string, std::filesystem::path> inputs;  // resolved against the config directory
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json raw;  // canonical document the hash is taken over
  std::string hash() const { return io::sha256_hex(raw.dump()); }
};

/// {"experiment": kind, "seed": int, "inputs": {name: path}, "params": {...}}
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                     std::optional<std::uint64_t> seed_override = std::nullopt) {
  io::require_object(j, "config", {"experiment", "seed"}, {"inputs", "params"});
  ExperimentConfig c;
  c.experiment = io::get_string(j, "experiment", "config");
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), c.experiment) == kinds.end())
    throw Error(ErrorCode::Schema, "config: unknown experiment '" + c.experiment + "'");
  if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0)
    throw Error(ErrorCode::Schema, "config: 'seed' must be a non-negative integer");
  c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("inputs")) {
    if (!j["inputs"].is_object()) throw Error(ErrorCode::Schema, "config: 'inputs' must be an object");
    for (const auto& [k, v] : j["inputs"].items()) {
      if (!v.is_string()) throw Error(ErrorCode::Schema, "config: input '" + k + "' must be a path string");
      std::filesystem::path p(v.get<std::string>());
      c.inputs[k] = p.is_absolute() ? p : base_dir / p;
    }
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw Error(ErrorCode::Schema, "config: 'params' must be an object");
    c.params = j["params"];
  }
  c.raw = j;
  if (seed_override) {
    c.seed = *seed_override;
    c.raw["seed"] = *seed_override;
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& p, std::optional<std::uint64_t> seed_override = std::nullopt) {
  return parse_config(io::parse_json(io::read_file(p), p.string()), p.parent_path(), seed_override);
}

namespace detail {

// Typed access to params with unknown keys rejected up front.
class Params {
 public:
  Params(const nlohmann::json& j, std::set<std::string> allowed) : j_(j) {
    for (const auto& [k, v] : j.items())
      if (!allowed.count(k)) throw Error(ErrorCode::Schema, "params: unknown field '" + k + "'");
  }
  bool has(const std::string& k) const { return j_.contains(k); }
  long long integer(const std::string& k, long long def, long long min = std::numeric_limits<long long>::min()) const {
    if (!has(k)) return def;
    if (!j_[k].is_number_integer()) throw Error(ErrorCode::Schema, "params: '" + k + "' must be an integer");
    const auto v = j_[k].get<long long>();
    if (v < min) throw Error(ErrorCode::Schema, "params: '" + k + "' must be >= " + std::to_string(min));
    return v;
  }
  double number(const std::string& k, double def) const {
    if (!has(k)) return def;
    if (!j_[k].is_number()) throw Error(ErrorCode::Schema, "params: '" + k + "' must be a number");
    return j_[k].get<double>();
  }
  bool boolean(const std::string& k, bool def) const {
    if (!has(k)) return def;
    if (!j_[k].is_boolean()) throw Error(ErrorCode::Schema, "params: '" + k + "' must be a boolean");
    return j_[k].get<bool>();
  }
  std::string string(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    if (!j_[k].is_string()) throw Error(ErrorCode::Schema, "params: '" + k + "' must be a string");
    return j_[k].get<std::string>();
  }
  std::optional<std::array<double, 2>> pair(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    const auto& v = j_[k];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw Error(ErrorCode::Schema, "params: '" + k + "' must be a 2-element number list");
    return std::array<double, 2>{v[0].get<double>(), v[1].get<double>()};
  }

 private:
  const nlohmann::json& j_;
};

struct Context {
  const ExperimentConfig& cfg;
  int threads;
  io::Loader loader;
  nlohmann::json results = nlohmann::json::object();
  std::map<std::string, std::string> files;  // name -> body
  bool numerical_failure = false;
  std::string failure_reason;

  std::filesystem::path input(const std::string& name) const {
    auto it = cfg.inputs.find(name);
    if (it == cfg.inputs.end()) throw Error(ErrorCode::Schema, "inputs: missing '" + name + "'");
    return it->second;
  }
  void require_inputs(const std::set<std::string>& names, const std::set<std::string>& optional = {}) const {
    for (const auto& [k, v] : cfg.inputs)
      if (!names.count(k) && !optional.count(k)) throw Error(ErrorCode::Schema, "inputs: unknown field '" + k + "'");
    for (const auto& n : names) input(n);
  }
  void fail(const std::string& reason) {
    numerical_failure = true;
    if (failure_reason.empty()) failure_reason = reason;
  }
};

inline io::Csv joining_csv() { return io::Csv({"experiment", "seed", "w", "n", "estimate", "std_error"}); }

inline void joining_row(io::Csv& csv, const Context& ctx, const std::string& name, int w, const Estimate& e) {
  csv.row({name, static_cast<long long>(ctx.cfg.seed), static_cast<long long>(w), static_cast<long long>(e.n), e.value,
            e.std_error});
}

inline nlohmann::json estimate_json(const Estimate& e) {
  return {{"estimate", e.value}, {"std_error", e.std_error}, {"n", e.n}};
}

inline std::vector<int> windows(const Params& p) {
  const int w = static_cast<int>(p.integer("w", kDefaultWindow, 1));
  return p.boolean("sensitivity", false) ? std::vector<int>{w, 2 * w} : std::vector<int>{w};
}

// ---------------------------------------------------------------------------

inline void run_sft_info(Context& ctx) {
  Params p(ctx.cfg.params, {});
  ctx.require_inputs({"graph"});
  const Sft g = ctx.loader.graph(ctx.input("graph"));
  const auto info = strongly_connected_components(g);
  const auto pd = perron(g);
  auto& r = ctx.results;
  r["symbols"] = g.size();
  r["edges"] = g.edge_count();
  r["irreducible"] = is_irreducible(g);
  r["components"] = info.components.size();
  r["perron_root"] = pd.value;
  r["h_top"] = std::log(pd.value);
  io::Csv csv({"quantity", "value"});
  csv.row({std::string("perron_root"), pd.value});
  csv.row({std::string("h_top"), std::log(pd.value)});
  if (is_irreducible(g)) {
    const auto parry = parry_measure(g);
    r["parry_stationarity_residual"] = parry.stationarity_residual();
    r["parry_entropy"] = entropy_rate(parry);
    csv.row({std::string("parry_entropy"), entropy_rate(parry)});
    csv.row({std::string("parry_stationarity_residual"), parry.stationarity_residual()});
  }
  ctx.files["sft_info.csv"] = csv.str();
}

inline void run_mmre(Context& ctx) {
  Params p(ctx.cfg.params, {"order", "m_max", "tol", "max_iter"});
  io::Loader::Problem pr;
  if (ctx.cfg.inputs.count("problem")) {
    ctx.require_inputs({"problem"});
    pr = ctx.loader.problem(ctx.input("problem"));
  } else {
    ctx.require_inputs({"code", "nu"});
    pr = {ctx.loader.code(ctx.input("code")), ctx.loader.measure(ctx.input("nu"), "nu"), 1};
  }
  const int order = static_cast<int>(p.integer("order", pr.order, 1));
  const int m_max = static_cast<int>(p.integer("m_max", order, 1));
  const double tol = p.number("tol", kMmreTol);
  const int max_iter = static_cast<int>(p.integer("max_iter", 2000000, 1));
  io::Csv csv({"order", "h_rel", "objective", "rho_lower", "rho_upper", "residual", "converged"});
  nlohmann::json sweep = nlohmann::json::array();
  double prev = -std::numeric_limits<double>::infinity();
  for (int m = std::min(order, m_max); m <= m_max; ++m) {
    const auto poly = build_lift_constraints(pr.code, pr.nu, m);
    const auto sol = solve_mmre(poly, tol, max_iter);
    csv.row({static_cast<long long>(m), sol.h_rel, sol.objective, sol.rho_lower, sol.rho_upper, sol.feasibility_residual,
             static_cast<long long>(sol.converged)});
    nlohmann::json rec = {{"order", m},
                          {"h_rel", sol.h_rel},
                          {"objective", sol.objective},
                          {"rho_bracket", {sol.rho_lower, sol.rho_upper}},
                          {"feasibility_residual", sol.feasibility_residual},
                          {"upper_bound", sol.upper_bound},
                          {"iterations", sol.iterations},
                          {"converged", sol.converged},
                          {"rows",
                           {{"stationarity", poly.stationarity_rows},
                            {"mass", poly.mass_rows},
                            {"pushforward", poly.pushforward_rows},
                            {"lift", poly.lift_rows}}}};
    if (!sol.converged) ctx.fail("solver did not converge at order " + std::to_string(m));
    if (sol.h_rel < prev - 2 * tol) ctx.fail("sweep decreased at order " + std::to_string(m));
    prev = sol.h_rel;
    if (m == m_max) {
      // Edge frequencies of the maximizer projected back to X.
      const auto on_x = pushforward(sol.measure, sol.to_x).marginal;
      nlohmann::json freq = nlohmann::json::array();
      for (std::size_t e = 0; e < on_x.edge_freq.size(); ++e) {
        const auto& ed = on_x.host.edge(e);
        freq.push_back({{"edge", {on_x.host.symbol(ed.from), on_x.host.symbol(ed.to)}}, {"freq", on_x.edge_freq[e]}});
      }
      rec["edge_freq"] = freq;
      ctx.results["h_rel"] = sol.h_rel;
      ctx.results["converged"] = sol.converged;
    }
    sweep.push_back(rec);
  }
  ctx.results["sweep"] = sweep;
  ctx.files["mmre.csv"] = csv.str();
}

inline JoiningSampler make_sampler(Context& ctx, int w) {
  ctx.require_inputs({"mu1", "mu2", "code"});
  const auto code = ctx.loader.code(ctx.input("code"));
  const auto mu1 = ctx.loader.measure(ctx.input("mu1"), "mu1");
  const auto mu2 = ctx.loader.measure(ctx.input("mu2"), "mu2");
  return JoiningSampler(mu1, mu2, code, w, ctx.cfg.seed);
}

inline void run_orthogonality(Context& ctx) {
  Params p(ctx.cfg.params, {"w", "n_samples", "sensitivity"});
  const auto n = static_cast<std::size_t>(p.integer("n_samples", 100000, 1));
  auto csv = joining_csv();
  nlohmann::json runs = nlohmann::json::array();
  for (int w : windows(p)) {
    const auto s = make_sampler(ctx, w);
    const auto e = coincidence_probability(s, n, ctx.threads);
    joining_row(csv, ctx, "orthogonality", w, e);
    auto rec = estimate_json(e);
    rec["w"] = w;
    runs.push_back(rec);
  }
  ctx.results["coincidence_probability"] = runs;
  ctx.files["results.csv"] = csv.str();
}

inline void run_xi(Context& ctx) {
  Params p(ctx.cfg.params, {"w", "n_samples", "sensitivity"});
  const auto n = static_cast<std::size_t>(p.integer("n_samples", 100000, 1));
  auto csv = joining_csv();
  nlohmann::json runs = nlohmann::json::array();
  for (int w : windows(p)) {
    const auto s = make_sampler(ctx, w);
    const auto xi = xi_estimate(s, n, ctx.threads);
    const auto gap = conditional_equality_gap(s, n, ctx.threads);
    joining_row(csv, ctx, "xi", w, xi.integral);
    joining_row(csv, ctx, "gap", w, gap.mean_sup_gap);
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t j = 0; j < gap.per_symbol.size(); ++j)
      per.push_back({{"symbol", s.code().source.symbol(static_cast<int>(j))}, {"gap", estimate_json(gap.per_symbol[j])}});
    runs.push_back({{"w", w},
                    {"xi_integral", estimate_json(xi.integral)},
                    {"xi_on_s", estimate_json(xi.on_s)},
                    {"hits", xi.hits},
                    {"min_xi", xi.min_xi},
                    {"gap_max", gap.max_gap},
                    {"gap_mean_sup", estimate_json(gap.mean_sup_gap)},
                    {"gap_per_symbol", per}});
  }
  ctx.results["runs"] = runs;
  ctx.files["results.csv"] = csv.str();
}

inline void run_pqs_gain(Context& ctx) {
  Params p(ctx.cfg.params, {"w", "n_samples", "path_length", "ell", "sensitivity"});
  const auto n = static_cast<std::size_t>(p.integer("n_samples", 100000, 1));
  const auto len = static_cast<std::size_t>(p.integer("path_length", 1000000, 2));
  const int ell = static_cast<int>(p.integer("ell", 6, 1));
  auto csv = joining_csv();
  nlohmann::json runs = nlohmann::json::array();
  for (int w : windows(p)) {
    const auto s = make_sampler(ctx, w);
    const auto xi = xi_estimate(s, n, ctx.threads);
    const auto path = pqs_measure_path(s, len, derive_seed(ctx.cfg.seed, 0x3));
    const Sft& x = s.code().source;
    std::size_t violations = 0;
    for (std::size_t k = 0; k + 1 < path.path.size(); ++k) violations += x.edge_index(path.path[k], path.path[k + 1]) < 0;
    const auto hp = empirical_entropy(path.path, ell, static_cast<int>(x.size()));
    const double h1 = entropy_rate(s.mu1()), h2 = entropy_rate(s.mu2());
    const double gain = hp.value - 0.5 * (h1 + h2);
    const double sigma = std::hypot(xi.integral.std_error, hp.std_error);
    joining_row(csv, ctx, "pqs-gain:xi", w, xi.integral);
    joining_row(csv, ctx, "pqs-gain:path_entropy", w, {hp.value, hp.std_error, len});
    joining_row(csv, ctx, "pqs-gain:gain", w, {gain, hp.std_error, len});
    runs.push_back({{"w", w},
                    {"xi_integral", estimate_json(xi.integral)},
                    {"path_entropy", {{"estimate", hp.value}, {"std_error", hp.std_error}, {"ell", ell}, {"short_path", hp.short_path}}},
                    {"h1", h1},
                    {"h2", h2},
                    {"gain", gain},
                    {"sigma_combined", sigma},
                    {"gain_exceeds_xi_minus_3sigma", gain >= xi.integral.value - 3 * sigma},
                    {"coincidences", path.coincidences},
                    {"admissibility_violations", violations}});
    if (violations) ctx.fail("switched path left the shift");
  }
  ctx.results["runs"] = runs;
  ctx.files["results.csv"] = csv.str();
}

inline void run_truncation(Context& ctx) {
  Params p(ctx.cfg.params, {"depth"});
  ctx.require_inputs({"mu", "code"});
  const auto code = ctx.loader.code(ctx.input("code"));
  const auto mu = ctx.loader.measure(ctx.input("mu"), "mu");
  const int depth = static_cast<int>(p.integer("depth", 8, 1));
  io::Csv csv({"n", "symbols", "entropy", "lower", "upper", "exact"});
  nlohmann::json levels = nlohmann::json::array();
  double prev = -std::numeric_limits<double>::infinity();
  bool monotone = true, factors = true;
  const int size = static_cast<int>(code.source.size());
  for (int n = 0; n <= size; ++n) {
    const auto t = truncate_alphabet(code, n);
    for (int s = 0; s < size; ++s) factors = factors && t.pi_n(t.proj(s)) == code(s);
    const auto h = image_entropy(mu, t.proj, depth);
    if (h.upper < prev - 1e-12) monotone = false;
    prev = std::max(prev, h.lower);
    csv.row({static_cast<long long>(n), static_cast<long long>(t.xn.size()), h.value, h.lower, h.upper,
             static_cast<long long>(h.exact)});
    levels.push_back({{"n", n}, {"symbols", t.xn.size()}, {"entropy", h.value}, {"lower", h.lower}, {"upper", h.upper}, {"exact", h.exact}});
  }
  ctx.results["levels"] = levels;
  ctx.results["entropy_rate"] = entropy_rate(mu);
  ctx.results["monotone"] = monotone;
  ctx.results["factorization_exact"] = factors;
  ctx.files["truncation.csv"] = csv.str();
}

inline void run_product_coding(Context& ctx) {
  Params p(ctx.cfg.params, {"seed_symbol"});
  ctx.require_inputs({"base", "fiber", "overlap"});
  const Sft base = ctx.loader.graph(ctx.input("base"), "base");
  const Sft fiber = ctx.loader.graph(ctx.input("fiber"), "fiber");
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [a, b] : ctx.loader.overlap(ctx.input("overlap"))) pairs.emplace_back(base.index_of(a), fiber.index_of(b));
  const auto pcg = build_product_coding_graph(base, fiber, OverlapOracle::from_pairs(pairs));
  auto& r = ctx.results;
  r["candidate_vertices"] = pcg.candidate_vertices;
  r["candidate_edges"] = pcg.candidate_edges;
  r["vertices"] = pcg.product.size();
  r["edges"] = pcg.product.edge_count();
  r["fiber_symbols_surjective"] = pcg.fiber_surjectivity.symbols;
  r["fiber_edges_surjective"] = pcg.fiber_surjectivity.edges;
  r["components"] = strongly_connected_components(pcg.product).components.size();
  io::Csv csv({"quantity", "value"});
  csv.row({std::string("vertices"), static_cast<long long>(pcg.product.size())});
  csv.row({std::string("edges"), static_cast<long long>(pcg.product.edge_count())});
  if (p.has("seed_symbol")) {
    const auto core = irreducible_core(pcg, pcg.product.index_of(p.string("seed_symbol", "")));
    r["core_vertices"] = core.product.size();
    r["core_edges"] = core.product.edge_count();
    r["core_fiber_symbols_surjective"] = core.fiber_surjectivity.symbols;
    csv.row({std::string("core_vertices"), static_cast<long long>(core.product.size())});
    csv.row({std::string("core_edges"), static_cast<long long>(core.product.edge_count())});
  }
  ctx.files["product_coding.csv"] = csv.str();
}

inline SkewStandardSystem system_from(const Params& p) {
  return SkewStandardSystem(p.number("k", 4.0), parse_f_choice(p.string("f", "omega1")), p.number("eps", 0.0));
}

inline BasePoint omega_from(const Params& p, std::uint64_t seed) {
  if (auto w = p.pair("omega")) return BasePoint::from_torus(*w);
  return BasePoint::random(seed, 0);
}

inline void run_standardmap_certify(Context& ctx) {
  Params p(ctx.cfg.params, {"k", "f", "eps", "depth", "omega", "extra_omegas"});
  ctx.require_inputs({});
  const auto sys = system_from(p);
  CertifyOptions opt;
  opt.seed = ctx.cfg.seed;
  opt.threads = ctx.threads;
  opt.extra_omegas = static_cast<int>(p.integer("extra_omegas", 8, 0));
  if (p.has("omega")) opt.omega = omega_from(p, ctx.cfg.seed);
  const auto c = certify_relative_entropy(sys, static_cast<int>(p.integer("depth", 12, 1)), opt);
  auto& r = ctx.results;
  r["issued"] = c.issued;
  r["bound"] = c.bound;
  r["depth"] = c.depth;
  r["sequences_per_omega"] = c.sequences;
  r["verified"] = c.verified;
  r["max_width"] = c.max_width;
  r["width_bound"] = c.width_bound;
  r["max_forward_residual"] = c.max_residual;
  r["graph_transform_calls"] = c.graph_transform_calls;
  r["max_graph_slope"] = c.max_graph_slope;
  if (!c.issued) ctx.fail(c.failure);
  std::string t;
  for (const auto& line : c.transcript) t += line + "\n";
  ctx.files["certificate.txt"] = t;
}

inline std::vector<int> itinerary_from(const Params& p, std::uint64_t seed) {
  std::vector<int> r;
  if (p.has("itinerary")) {
    for (char ch : p.string("itinerary", "")) {
      if (ch != '1' && ch != '2') throw Error(ErrorCode::Schema, "params: itinerary uses only '1' and '2'");
      r.push_back(ch - '0');
    }
  } else {
    CounterRng g(seed, 0x17);
    r.resize(static_cast<std::size_t>(p.integer("depth", 12, 1)));
    for (int& x : r) x = 1 + g.bit();
  }
  if (r.empty()) throw Error(ErrorCode::Schema, "params: itinerary must be nonempty");
  return r;
}

inline void write_orbit(Context& ctx, const std::vector<double>& x, const std::vector<int>& r) {
  io::Csv csv({"step", "x1", "x2", "strip"});
  for (std::size_t l = 0; l < x.size(); ++l)
    csv.row({static_cast<long long>(l), x[l], l ? x[l - 1] : 0.0, static_cast<long long>(r[l])});
  ctx.files["orbit.csv"] = csv.str();
}

inline void run_standardmap_shadow(Context& ctx) {
  Params p(ctx.cfg.params, {"k", "f", "eps", "depth", "itinerary", "omega", "prefix_widths"});
  ctx.require_inputs({});
  const auto sys = system_from(p);
  const auto strips = find_strips(sys.k);
  const auto r = itinerary_from(p, ctx.cfg.seed);
  ShadowOptions opt;
  opt.prefix_widths = p.boolean("prefix_widths", true);
  const auto s = shadow(sys, strips, omega_from(p, ctx.cfg.seed), r, opt);
  auto& out = ctx.results;
  out["t0"] = s.t0;
  out["width"] = s.width;
  out["log_width"] = s.log_width;
  out["horizon"] = s.horizon;
  out["forward_ok"] = s.forward_ok;
  out["max_residual"] = s.max_residual;
  out["pure_forward_horizon"] = s.pure_forward_horizon;
  out["prefix_widths"] = s.prefix_widths;
  if (!s.forward_ok) ctx.fail("forward check failed at step " + std::to_string(s.verified + 1));
  write_orbit(ctx, s.orbit, r);
}

inline void run_standardmap_lyapunov(Context& ctx) {
  Params p(ctx.cfg.params, {"k", "f", "eps", "steps", "mode", "x0", "omega", "chi"});
  ctx.require_inputs({});
  const auto sys = system_from(p);
  const auto steps = static_cast<std::size_t>(p.integer("steps", 10000, 1));
  const std::string mode = p.string("mode", "forward");
  const BasePoint w = omega_from(p, ctx.cfg.seed);
  LyapunovPair fib;
  if (mode == "forward") {
    const auto x0 = p.pair("x0").value_or(Torus{counter_uniform(ctx.cfg.seed, 0x10, 0), counter_uniform(ctx.cfg.seed, 0x10, 1)});
    fib = fiber_lyapunov(sys, w, x0, steps);
  } else if (mode == "shadowed") {
    const auto strips = find_strips(sys.k);
    std::vector<int> r(steps);
    CounterRng g(ctx.cfg.seed, 0x17);
    for (int& x : r) x = 1 + g.bit();
    const auto orbit = shadow_orbit(sys, strips, w, r);
    fib = fiber_lyapunov_along(sys, orbit);
    write_orbit(ctx, orbit, r);
  } else {
    throw Error(ErrorCode::Schema, "params: mode must be 'forward' or 'shadowed'");
  }
  const auto base = base_lyapunov(sys);
  const auto v = hyperbolicity(fib, base, p.number("chi", 0.5));
  io::Csv csv({"kind", "lambda_plus", "lambda_minus", "steps"});
  csv.row({std::string("fiber"), fib.plus, fib.minus, static_cast<long long>(fib.steps)});
  csv.row({std::string("base"), base.plus, base.minus, static_cast<long long>(0)});
  ctx.files["exponents.csv"] = csv.str();
  ctx.results["fiber"] = {{"plus", fib.plus}, {"minus", fib.minus}, {"steps", fib.steps}};
  ctx.results["base"] = {{"plus", base.plus}, {"minus", base.minus}};
  ctx.results["hyperbolic"] = v.hyperbolic;
  ctx.results["min_abs_exponent"] = v.min_abs;
}

inline void dispatch(Context& ctx) {
  const auto& e = ctx.cfg.experiment;
  if (e == "sft-info") run_sft_info(ctx);
  else if (e == "mmre") run_mmre(ctx);
  else if (e == "orthogonality") run_orthogonality(ctx);
  else if (e == "pqs-gain") run_pqs_gain(ctx);
  else if (e == "xi") run_xi(ctx);
  else if (e == "truncation") run_truncation(ctx);
  else if (e == "product-coding") run_product_coding(ctx);
  else if (e == "standardmap-certify") run_standardmap_certify(ctx);
  else if (e == "standardmap-shadow") run_standardmap_shadow(ctx);
  else if (e == "standardmap-lyapunov") run_standardmap_lyapunov(ctx);
  else throw Error(ErrorCode::Schema, "unknown experiment '" + e + "'");
}

inline nlohmann::json inputs_json(const io::Loader& l) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : l.records()) a.push_back({{"role", r.role}, {"path", r.path}, {"sha256", r.sha256}});
  return a;
}

}  // namespace detail

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::json report;
  std::map<std::string, std::string> files;  // deterministic outputs, including report.json
};

/// Runs one experiment. Deterministic outputs go in `files`; wall-clock data is
/// written separately by write_outputs.
inline RunResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  RunResult out;
  detail::Context ctx{cfg, threads, {}, {}, {}, false, {}};
  nlohmann::json rep = {{"experiment", cfg.experiment},
                        {"seed", cfg.seed},
                        {"config_sha256", cfg.hash()},
                        {"artifact_version", kArtifactVersion}};
  try {
    detail::dispatch(ctx);
    rep["status"] = ctx.numerical_failure ? "numerical_failure" : "ok";
    if (ctx.numerical_failure) rep["reason"] = {{"code", "NumericalFailure"}, {"detail", ctx.failure_reason}};
    out.exit_code = ctx.numerical_failure ? kExitNumerical : kExitOk;
  } catch (const Error& e) {
    out.exit_code = exit_code_for(e.code());
    rep["status"] = "error";
    rep["reason"] = {{"code", std::string(to_string(e.code()))}, {"detail", e.what()}};
    ctx.files.clear();
  }
  rep["inputs"] = detail::inputs_json(ctx.loader);
  rep["results"] = ctx.results;
  out.report = rep;
  out.files = std::move(ctx.files);
  out.files["report.json"] = rep.dump(2) + "\n";
  return out;
}

inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : r.files) io::write_file(dir / name, body);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  io::write_file(dir / "run.sidecar.json", nlohmann::json{{"finished_utc", buf}, {"exit_code", r.exit_code}}.dump(2) + "\n");
}

/// Re-hashes every input a report lists; returns the paths whose content changed.
inline std::vector<std::string> verify_report_inputs(const nlohmann::json& report) {
  std::vector<std::string> bad;
  if (!report.contains("inputs") || !report["inputs"].is_array())
    throw Error(ErrorCode::Schema, "report has no input list");
  for (const auto& in : report["inputs"]) {
    const auto path = in.at("path").get<std::string>();
    if (!std::filesystem::exists(path) || io::sha256_hex(io::read_file(path)) != in.at("sha256").get<std::string>())
      bad.push_back(path);
  }
  return bad;
}

}  // namespace relent
