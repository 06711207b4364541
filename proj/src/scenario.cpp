#include "fedgansim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fedgansim/checkpoint.hpp"
#include "fedgansim/rng.hpp"

namespace fedgan::cli {

namespace {

const char* kColumns[] = {
    "name",         "data_seed",   "frechet",     "kid",
    "modes_covered", "hq_fraction", "frechet_best", "kid_best",
    "top_counter_client", "top_counter", "diverged_rounds",
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ad::Tensor final_sample_dump(const RunConfig& cfg, const fl::RunResult& result) {
  const std::size_t n = std::min<std::size_t>(cfg.eval_samples, 4096);
  Rng rng(fl::StreamSeeds::eval_noise(cfg, cfg.rounds + 1));
  ad::Tensor z = ad::Tensor::zeros(n, result.g_spec.input_dim());
  for (double& v : z.data) v = rng.normal();
  return gan::gen_forward(result.g_server, result.g_spec, z);
}

nlohmann::ordered_json scenario_row_from_report(const nlohmann::json& report) {
  nlohmann::ordered_json row;
  row["name"] = report.at("name").get<std::string>();
  row["data_seed"] = report.at("data_seed").get<std::uint64_t>();
  const auto& fin = report.at("final");
  row["frechet"] = fin.at("frechet").get<double>();
  row["kid"] = fin.at("mmd_poly3_x1000").get<double>();
  row["modes_covered"] = fin.at("modes_covered").get<std::uint64_t>();
  row["hq_fraction"] = fin.at("hq_fraction").get<double>();
  const auto& best = report.at("best");
  row["frechet_best"] = best.at("frechet").get<double>();
  row["kid_best"] = best.at("mmd_poly3_x1000").get<double>();

  const auto counters = report.at("detection").at("counters").get<std::vector<std::uint64_t>>();
  std::size_t top = 0;
  for (std::size_t i = 1; i < counters.size(); ++i) {
    if (counters[i] > counters[top]) top = i;
  }
  row["top_counter_client"] = counters.empty() ? 0 : top;
  row["top_counter"] = counters.empty() ? 0 : counters[top];
  row["diverged_rounds"] = report.at("diverged_rounds").get<std::uint64_t>();
  return row;
}

}  // namespace

std::filesystem::path out_root() {
  if (const char* env = std::getenv("FEDGANSIM_OUT_ROOT"); env && *env) {
    return std::filesystem::path(env);
  }
  return std::filesystem::path("runs");
}

std::filesystem::path run_scenario(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::path dir =
      cfg.out_dir.empty()
          ? out_root() / (cfg.name + "_seed" + std::to_string(cfg.seed))
          : std::filesystem::path(cfg.out_dir);
  std::filesystem::create_directories(dir);

  {
    std::ofstream echo(dir / "config.json");
    if (!echo) throw std::runtime_error("run_scenario: cannot write " + dir.string());
    echo << cfg.to_json().dump(2) << "\n";
  }

  std::ofstream rounds(dir / "rounds.jsonl", std::ios::trunc);
  if (!rounds) throw std::runtime_error("run_scenario: cannot open rounds.jsonl");

  try {
    fl::RunResult result = fl::run_training(cfg, [&rounds](const fl::RoundRecord& rec) {
      rounds << rec.to_json().dump() << "\n";
      rounds.flush();
    });

    gan::save_params(dir / "g_server.fgs", result.g_spec, result.g_server, cfg.rounds);
    gan::save_samples(dir / "samples.fgs", final_sample_dump(cfg, result));

    std::size_t diverged_rounds = 0;
    for (const fl::RoundRecord& rec : result.records) {
      if (!rec.diverged.empty()) ++diverged_rounds;
    }

    nlohmann::json report = {
        {"name", cfg.name},
        {"data_seed", cfg.data_seed},
        {"dataset", cfg.to_json().at("dataset")},
        {"rounds", cfg.rounds},
        {"final", result.final_metrics.to_json()},
        {"best", result.best_metrics.to_json()},
        {"detection",
         {{"counters", result.detection.counters}, {"weights", result.detection.weights}}},
        {"malicious_ids", result.malicious_ids},
        {"diverged_rounds", diverged_rounds},
    };
    std::ofstream rep(dir / "final_report.json");
    rep << report.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::ofstream marker(dir / "FAILED");
    marker << e.what() << "\n";
    throw;
  }
  return dir;
}

bool ComparisonReport::all_passed() const {
  for (const AssertionResult& a : assertions) {
    if (!a.passed) return false;
  }
  return true;
}

nlohmann::ordered_json ComparisonReport::to_json() const {
  nlohmann::ordered_json j;
  j["scenarios"] = scenarios;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const AssertionResult& a : assertions) {
    checks.push_back({{"assert", a.text}, {"lhs", a.lhs}, {"rhs", a.rhs}, {"passed", a.passed}});
  }
  j["assertions"] = checks;
  j["all_passed"] = all_passed();
  return j;
}

std::string ComparisonReport::to_csv() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < std::size(kColumns); ++c) {
    out << (c ? "," : "") << kColumns[c];
  }
  out << "\n";
  for (const auto& row : scenarios) {
    for (std::size_t c = 0; c < std::size(kColumns); ++c) {
      if (c) out << ",";
      const auto& v = row.at(kColumns[c]);
      if (v.is_string()) out << v.get<std::string>();
      else if (v.is_number_float()) out << format_double(v.get<double>());
      else out << v.dump();
    }
    out << "\n";
  }
  return out.str();
}

std::vector<nlohmann::ordered_json> ComparisonReport::scenarios_from_csv(
    const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header

  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }

  std::vector<nlohmann::ordered_json> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream l(line);
    std::string cell;
    nlohmann::ordered_json row;
    for (const std::string& col : header) {
      std::getline(l, cell, ',');
      if (col == "name") {
        row[col] = cell;
      } else if (col == "data_seed" || col == "modes_covered" ||
                 col == "top_counter_client" || col == "top_counter" ||
                 col == "diverged_rounds") {
        row[col] = static_cast<std::uint64_t>(std::stoull(cell));
      } else {
        row[col] = std::strtod(cell.c_str(), nullptr);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double eval_assertion_side(const ComparisonReport& report, const std::string& side) {
  std::string s = side;
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' '; }), s.end());
  if (s.empty()) throw std::invalid_argument("assertion: empty side");

  // plain number?
  {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end && *end == '\0') return v;
  }

  double coeff = 1.0;
  const auto star = s.find('*');
  if (star != std::string::npos) {
    coeff = std::strtod(s.substr(0, star).c_str(), nullptr);
    s = s.substr(star + 1);
  }
  const auto dot = s.rfind('.');
  if (dot == std::string::npos) {
    throw std::invalid_argument("assertion: expected scenario.column, got '" + side + "'");
  }
  const std::string name = s.substr(0, dot);
  const std::string column = s.substr(dot + 1);
  for (const auto& row : report.scenarios) {
    if (row.at("name").get<std::string>() == name) {
      if (!row.contains(column)) {
        throw std::invalid_argument("assertion: unknown column '" + column + "'");
      }
      return coeff * row.at(column).get<double>();
    }
  }
  throw std::invalid_argument("assertion: unknown scenario '" + name + "'");
}

namespace {

AssertionResult eval_assertion(const ComparisonReport& report, const std::string& text) {
  // find the comparison operator
  static const char* kOps[] = {"<=", ">=", "<", ">"};
  std::size_t pos = std::string::npos;
  std::string op;
  for (const char* candidate : kOps) {
    const auto p = text.find(candidate);
    if (p != std::string::npos) {
      pos = p;
      op = candidate;
      break;
    }
  }
  if (pos == std::string::npos) {
    throw std::invalid_argument("assertion: no comparison operator in '" + text + "'");
  }

  AssertionResult res;
  res.text = text;
  res.lhs = eval_assertion_side(report, text.substr(0, pos));
  res.rhs = eval_assertion_side(report, text.substr(pos + op.size()));
  if (op == "<") res.passed = res.lhs < res.rhs;
  else if (op == "<=") res.passed = res.lhs <= res.rhs;
  else if (op == ">") res.passed = res.lhs > res.rhs;
  else res.passed = res.lhs >= res.rhs;
  return res;
}

nlohmann::json load_run_report(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "FAILED")) {
    throw std::runtime_error("compare: run '" + dir.string() + "' is marked FAILED");
  }
  std::ifstream in(dir / "final_report.json");
  if (!in) {
    throw std::runtime_error("compare: missing final_report.json in '" + dir.string() + "'");
  }
  return nlohmann::json::parse(in);
}

}  // namespace

ComparisonReport compare_runs(const std::vector<std::filesystem::path>& run_dirs,
                              const std::filesystem::path& assertions_file) {
  if (run_dirs.size() < 2) {
    throw std::invalid_argument("compare: need at least two run directories");
  }

  ComparisonReport report;
  std::uint64_t data_seed = 0;
  nlohmann::json dataset;
  std::set<std::string> names;
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    nlohmann::json run = load_run_report(run_dirs[i]);
    if (i == 0) {
      data_seed = run.at("data_seed").get<std::uint64_t>();
      dataset = run.at("dataset");
    } else {
      if (run.at("data_seed").get<std::uint64_t>() != data_seed) {
        throw std::runtime_error("compare: run '" + run_dirs[i].string() +
                                 "' uses a different data seed; runs are incomparable");
      }
      if (run.at("dataset") != dataset) {
        throw std::runtime_error("compare: run '" + run_dirs[i].string() +
                                 "' uses a different dataset geometry");
      }
    }
    nlohmann::ordered_json row = scenario_row_from_report(run);
    const std::string name = row.at("name").get<std::string>();
    if (!names.insert(name).second) {
      throw std::runtime_error("compare: duplicate scenario name '" + name + "'");
    }
    report.scenarios.push_back(std::move(row));
  }

  if (!assertions_file.empty()) {
    std::ifstream in(assertions_file);
    if (!in) {
      throw std::runtime_error("compare: cannot open assertions file '" +
                               assertions_file.string() + "'");
    }
    nlohmann::json spec = nlohmann::json::parse(in, nullptr, false);
    if (spec.is_discarded() || !spec.is_array()) {
      throw std::runtime_error("compare: assertions file must be a JSON array of strings");
    }
    for (const auto& entry : spec) {
      report.assertions.push_back(eval_assertion(report, entry.get<std::string>()));
    }
  }
  return report;
}

ComparisonReport sweep_trigger_sizes(const RunConfig& base,
                                     const std::vector<std::size_t>& sizes) {
  if (sizes.empty()) {
    throw ConfigSchemaError("sweep: sizes list must not be empty");
  }
  if (base.dataset.kind != DatasetChoice::kImages) {
    throw ConfigSchemaError("sweep: trigger-size sweeps need an image dataset");
  }
  for (std::size_t s : sizes) {
    if (s == 0 || s > base.dataset.image_size) {
      throw ConfigSchemaError("sweep: trigger size " + std::to_string(s) +
                              " does not fit " + std::to_string(base.dataset.image_size) +
                              "-pixel images");
    }
  }

  ComparisonReport report;
  for (std::size_t s : sizes) {
    std::vector<nlohmann::ordered_json> rows;
    for (const std::string arm : {"local_defense", "full_defense"}) {
      nlohmann::json j = base.to_json();
      merge_config(j, preset_delta(arm));
      j["name"] = arm + "_size" + std::to_string(s);
      j["trigger"]["block_h"] = s;
      j["trigger"]["block_w"] = s;
      j["trigger"]["block_row"] = base.dataset.image_size - s;
      j["trigger"]["block_col"] = base.dataset.image_size - s;
      j["out_dir"] = "";
      RunConfig cfg = config_from_json(j);

      const std::filesystem::path dir = run_scenario(cfg);
      rows.push_back(scenario_row_from_report(load_run_report(dir)));
    }
    report.scenarios.push_back(rows[0]);
    report.scenarios.push_back(rows[1]);
    report.assertions.push_back(eval_assertion(
        report, "full_defense_size" + std::to_string(s) + ".kid <= local_defense_size" +
                    std::to_string(s) + ".kid"));
  }
  return report;
}

}  // namespace fedgan::cli
