#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "metaspec/cli.hpp"

namespace mc = metaspec::cli;

int main(int argc, char** argv) {
  CLI::App app{"Metastable spectra of Witten and Kramers-Fokker-Planck operators"};
  app.require_subcommand(1);

  std::string config, out = "out";
  std::optional<unsigned> seed;
  std::optional<int> threads;
  std::optional<long> dense_ceiling;
  bool dump = false;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config,-c", config, "TOML or JSON run configuration");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", out, "output directory");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (default METASPEC_THREADS or 1)");
    sub->add_option("--dense-ceiling", dense_ceiling, "largest problem solved densely");
    sub->add_flag("--dump-operators", dump, "write the assembled operators as Matrix Market files");
  };
  auto* analyze = app.add_subcommand("analyze", "critical points, labelling and asymptotic spectrum");
  auto* validate = app.add_subcommand("validate", "compare the asymptotics with the numerical oracle");
  auto* matrix = app.add_subcommand("matrix", "interaction-matrix diagnostics");
  auto* example3 = app.add_subcommand("example3", "symmetric three-well example");
  add_common(analyze, true);
  add_common(validate, true);
  add_common(matrix, true);
  add_common(example3, false);

  CLI11_PARSE(app, argc, argv);

  try {
    mc::RunConfig cfg = (example3->parsed() && config.empty()) ? mc::parse_config(mc::example3_config())
                                                               : mc::load_config(config);
    if (seed) cfg.seed = *seed;
    if (threads) {
      cfg.threads = *threads;
    } else if (const char* env = std::getenv("METASPEC_THREADS")) {
      cfg.threads = std::max(1, std::atoi(env));
    }
    if (dense_ceiling) cfg.dense_ceiling = *dense_ceiling;
    cfg.dump_operators = dump;

    mc::Outcome o;
    if (analyze->parsed()) {
      o = mc::analyze(cfg);
    } else if (validate->parsed()) {
      o = mc::validate(cfg);
    } else if (matrix->parsed()) {
      o = mc::matrix_diagnostics(cfg);
    } else {
      o = mc::example3(cfg);
    }
    mc::write_outputs(o, out);
    for (const auto& [name, ok] : o.checks) std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
    std::cout << "report: " << out << "/report.json\n";
    return o.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
