#include <agmlab/agmlab.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

void print_summary(const agmlab::Report& r) {
  std::cout << r.id << ": " << agmlab::status_name(r.status) << " (" << std::fixed << std::setprecision(3) << r.runtime_s
            << " s)\n";
  std::cout.unsetf(std::ios::fixed);
  for (const auto& w : r.warnings) std::cout << "  warning: " << w << '\n';
  if (!r.error.empty()) std::cout << "  error: " << r.error << '\n';
  for (const auto& c : r.certificates)
    std::cout << "  " << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.id << std::right
              << " worst=" << std::setprecision(6) << c.worst_violation << " tol=" << c.tolerance << '\n';
}

void write_json(const std::string& out_dir, const std::string& name, const nlohmann::json& j) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  std::ofstream os(std::filesystem::path(out_dir) / name);
  os << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agmlab: conservation-law certificates for accelerated gradient flows and their discretizations"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_dir;
  double tol_scale = 1.0;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory for report.json and CSV files");
  run->add_option("--tol-scale", tol_scale, "Multiply every certificate tolerance")->check(CLI::PositiveNumber);

  auto* suite = app.add_subcommand("suite", "Run every config listed in a manifest");
  suite->add_option("manifest", manifest_path, "Manifest JSON {\"configs\": [...]}")->required()->check(CLI::ExistingFile);
  suite->add_option("--out", out_dir, "Output directory");
  suite->add_option("--tol-scale", tol_scale, "Multiply every certificate tolerance")->check(CLI::PositiveNumber);
  suite->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* list_problems = app.add_subcommand("list-problems", "Show problem catalog keys");
  auto* list_laws = app.add_subcommand("list-laws", "Show conservation laws and discrete methods");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const agmlab::RunOptions opt{out_dir, tol_scale};
  try {
    if (*run) {
      agmlab::ExperimentConfig cfg;
      try {
        cfg = agmlab::load_config(config_path);
      } catch (const agmlab::ConfigurationError& e) {
        std::cerr << e.what() << '\n';
        return 2;
      }
      const agmlab::Report rep = agmlab::run_experiment(cfg, opt);
      print_summary(rep);
      const std::string dir = !out_dir.empty() ? out_dir : cfg.out_dir;
      if (!dir.empty()) write_json((std::filesystem::path(dir) / cfg.id).string(), "report.json", agmlab::to_json(rep));
      return rep.exit_code();
    }
    if (*suite) {
      const agmlab::SuiteReport rep = agmlab::run_suite(manifest_path, opt, jobs);
      for (const auto& r : rep.reports) print_summary(r);
      write_json(out_dir, "suite_report.json", agmlab::to_json(rep));
      std::cout << "suite: " << agmlab::status_name(rep.status()) << '\n';
      return rep.exit_code();
    }
    if (*list_problems) {
      for (const auto& e : agmlab::problem_catalog()) std::cout << std::left << std::setw(40) << e.key_pattern << e.description << '\n';
      return 0;
    }
    if (*list_laws) {
      for (const auto& l : agmlab::law_catalog()) {
        std::cout << std::left << std::setw(16) << agmlab::mode_name(l.mode) << std::setw(14) << l.id << "requires:";
        for (const auto& p : l.required) std::cout << ' ' << p;
        if (!l.optional.empty()) {
          std::cout << "  optional:";
          for (const auto& p : l.optional) std::cout << ' ' << p;
        }
        std::cout << "\n    " << l.summary << '\n';
      }
      return 0;
    }
  } catch (const agmlab::ConfigurationError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 3;
  }
  return 0;
}
