#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fedgansim/config.hpp"
#include "fedgansim/dataset.hpp"
#include "fedgansim/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;
constexpr int kExitRuntime = 4;

using fedgan::cli::ComparisonReport;

void write_report(const ComparisonReport& report, const std::filesystem::path& out_dir,
                  const std::string& stem) {
  std::filesystem::create_directories(out_dir);
  std::ofstream json_out(out_dir / (stem + ".json"));
  json_out << report.to_json().dump(2) << "\n";
  std::ofstream csv_out(out_dir / (stem + ".csv"));
  csv_out << report.to_csv();
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> sizes;
  std::size_t begin = 0;
  while (begin <= csv.size()) {
    const auto comma = csv.find(',', begin);
    const std::string tok =
        csv.substr(begin, comma == std::string::npos ? comma : comma - begin);
    if (!tok.empty()) sizes.push_back(std::stoull(tok));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedgansim: federated GAN training simulator with backdoor "
               "attack and defense scenarios"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "execute one scenario run");
  std::string run_config;
  std::string run_preset;
  std::vector<std::string> run_sets;
  run->add_option("--config", run_config, "config JSON file")->required();
  run->add_option("--preset", run_preset,
                  "vanilla|attack|global_defense|local_defense|full_defense");
  run->add_option("--set", run_sets, "override, e.g. --set rounds=50")
      ->take_all();

  // compare
  auto* compare = app.add_subcommand("compare", "compare completed runs");
  std::vector<std::string> compare_dirs;
  std::string assert_file;
  std::string compare_out = ".";
  compare->add_option("dirs", compare_dirs, "run directories")->required();
  compare->add_option("--assert", assert_file, "JSON array of ordering assertions");
  compare->add_option("--out", compare_out, "report output directory");

  // sweep-trigger
  auto* sweep = app.add_subcommand("sweep-trigger",
                                   "local vs full defense across trigger sizes");
  std::string sweep_config;
  std::string sweep_sizes;
  std::string sweep_out = ".";
  sweep->add_option("--config", sweep_config, "base config JSON file")->required();
  sweep->add_option("--sizes", sweep_sizes, "comma-separated block sides, e.g. 1,2,4")
      ->required();
  sweep->add_option("--out", sweep_out, "report output directory");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a standalone dataset blob");
  std::string gen_kind;
  std::string gen_out;
  std::size_t gen_n = 2000;
  std::uint64_t gen_seed = 1;
  std::size_t gen_size = 16;
  gen->add_option("--kind", gen_kind, "ring|images")->required();
  gen->add_option("--out", gen_out, "output path (.fgs)")->required();
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--size", gen_size, "image side length (images only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) {
      fedgan::cli::RunConfig cfg =
          fedgan::cli::resolve_config(run_config, run_preset, run_sets);
      const std::filesystem::path dir = fedgan::cli::run_scenario(cfg);
      std::cout << dir.string() << "\n";
      return kExitOk;
    }

    if (compare->parsed()) {
      std::vector<std::filesystem::path> dirs(compare_dirs.begin(), compare_dirs.end());
      ComparisonReport report = fedgan::cli::compare_runs(dirs, assert_file);
      write_report(report, compare_out, "compare_report");
      for (const auto& a : report.assertions) {
        std::cout << (a.passed ? "[PASS] " : "[FAIL] ") << a.text << "  (lhs=" << a.lhs
                  << " rhs=" << a.rhs << ")\n";
      }
      return report.all_passed() ? kExitOk : kExitAssertion;
    }

    if (sweep->parsed()) {
      fedgan::cli::RunConfig base = fedgan::cli::parse_config(sweep_config);
      ComparisonReport report =
          fedgan::cli::sweep_trigger_sizes(base, parse_sizes(sweep_sizes));
      write_report(report, sweep_out, "sweep_report");
      for (const auto& a : report.assertions) {
        std::cout << (a.passed ? "[PASS] " : "[FAIL] ") << a.text << "\n";
      }
      return report.all_passed() ? kExitOk : kExitAssertion;
    }

    if (gen->parsed()) {
      fedgan::data::Dataset ds;
      if (gen_kind == "ring") {
        ds = fedgan::data::make_gaussian_ring(8, 2.0, 0.05, gen_n, gen_seed);
      } else if (gen_kind == "images") {
        ds = fedgan::data::make_tiny_images(gen_size, gen_n, gen_seed);
      } else {
        std::cerr << "gen-data: --kind must be ring or images\n";
        return kExitConfig;
      }
      fedgan::data::save_dataset(gen_out, ds);
      std::cout << gen_out << "\n";
      return kExitOk;
    }
  } catch (const fedgan::cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
