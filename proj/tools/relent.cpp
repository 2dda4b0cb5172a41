// Command-line runner: one experiment per invocation.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "relent/experiment.hpp"

namespace {

struct Globals {
  std::string config;
  std::string out = "out";
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

int run(const std::string& kind, const Globals& g) {
  relent::RunResult r;
  try {
    const auto cfg = relent::load_config(g.config, g.seed);
    if (cfg.experiment != kind)
      throw relent::Error(relent::ErrorCode::Schema,
                          "config names experiment '" + cfg.experiment + "' but subcommand is '" + kind + "'");
    r = relent::run_experiment(cfg, g.threads);
  } catch (const relent::Error& e) {
    r.exit_code = relent::kExitValidation;
    r.report = {{"experiment", kind},
                {"status", "error"},
                {"artifact_version", relent::kArtifactVersion},
                {"reason", {{"code", std::string(relent::to_string(e.code()))}, {"detail", e.what()}}}};
    r.files["report.json"] = r.report.dump(2) + "\n";
  }
  try {
    relent::write_outputs(r, g.out);
  } catch (const relent::Error& e) {
    std::cerr << e.what() << "\n";
    return relent::kExitValidation;
  }
  if (r.report.value("status", "") != "ok") std::cerr << r.report["reason"].dump() << "\n";
  else std::cout << r.report["results"].dump(2) << "\n";
  return r.exit_code;
}

int verify(const std::string& report_path) {
  try {
    const auto rep = relent::io::parse_json(relent::io::read_file(report_path), report_path);
    const auto bad = relent::verify_report_inputs(rep);
    for (const auto& b : bad) std::cerr << "hash mismatch: " << b << "\n";
    if (bad.empty()) std::cout << "inputs match\n";
    return bad.empty() ? relent::kExitOk : relent::kExitValidation;
  } catch (const relent::Error& e) {
    std::cerr << e.what() << "\n";
    return relent::kExitValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative entropy toolkit for factor codes and skew products"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  int code = 0;
  for (const auto& kind : relent::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", g.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", g.out, "output directory");
    sub->add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed_value, "override the config seed");
    sub->callback([&, kind, sub] {
      if (sub->count("--seed")) g.seed = seed_value;
      code = run(kind, g);
    });
  }
  std::string report;
  auto* v = app.add_subcommand("verify", "re-hash the inputs listed in a report");
  v->add_option("report", report, "report.json")->required()->check(CLI::ExistingFile);
  v->callback([&] { code = verify(report); });
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : relent::kExitValidation;
  }
  return code;
}
