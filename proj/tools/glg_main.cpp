// glg: run gradient-inversion attacks against simulated federated graph
// learning and write tabular reports.

#include "glg/error.hpp"
#include "glg/experiment.hpp"
#include "glg/report.hpp"
#include "glg/selftest.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

enum Exit { kOk = 0, kValidation = 1, kNumeric = 2 };

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void print_summary(const std::vector<glg::cli::ReportRow>& rows) {
  for (const auto& r : rows) {
    std::cout << r.scenario << " " << r.framework << " " << r.dataset;
    if (!r.param.empty()) std::cout << " " << r.param << "=" << r.value;
    std::cout << ": " << (r.repeats - r.failures) << "/" << r.repeats << " ok";
    for (const auto& [k, m] : r.metrics) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %s %.4g (min %.4g)", k.c_str(), m.mean, m.min);
      std::cout << buf;
    }
    std::cout << '\n';
    for (const auto& run : r.runs)
      if (!run.ok) std::cerr << "  repetition " << run.repetition << " failed: " << run.error << '\n';
  }
}

int finish(const glg::cli::ExperimentConfig& config, const std::vector<glg::cli::ReportRow>& rows) {
  const auto path = glg::cli::emit_report(config, rows, config.output.format, config.output.dir);
  print_summary(rows);
  std::cout << "report: " << path << '\n';
  for (const auto& r : rows)
    if (r.failures > 0) return kNumeric;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient inversion attacks on federated graph learning"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format, param, values;
  std::uint64_t seed = 0;

  auto* att = app.add_subcommand("attack", "Run one configured attack scenario");
  att->add_option("--config", config_path, "JSON experiment config")->required();
  auto* seed_opt = att->add_option("--seed", seed, "Base seed (overrides the config)");
  auto* out_opt = att->add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* fmt_opt = att->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));

  auto* sw = app.add_subcommand("sweep", "Vary one hyperparameter");
  sw->add_option("--config", config_path, "JSON experiment config")->required();
  sw->add_option("--param", param, "alpha, beta, hidden, tau, batch_size, d_tree or init")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  auto* sw_seed = sw->add_option("--seed", seed, "Base seed (overrides the config)");
  auto* sw_out = sw->add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* sw_fmt = sw->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));

  auto* st = app.add_subcommand("selftest", "Run the gradient and recovery property suites");
  int scale = 1;
  st->add_option("--scale", scale, "Multiply suite sizes")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (st->parsed()) {
      const auto results = glg::selftest::run_all(std::cout, 1, scale);
      for (const auto& r : results)
        if (!r.passed()) return kNumeric;
      return kOk;
    }

    auto config = glg::cli::load_config(config_path);
    const bool sweeping = sw->parsed();
    if ((sweeping ? sw_seed : seed_opt)->count()) config.seed = seed;
    if ((sweeping ? sw_out : out_opt)->count()) config.output.dir = out_dir;
    if ((sweeping ? sw_fmt : fmt_opt)->count()) config.output.format = format;
    config.validate();

    if (sweeping) return finish(config, glg::cli::sweep(config, param, split_values(values)));
    return finish(config, {glg::cli::run_experiment(config)});
  } catch (const glg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? kValidation : kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
}
