#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedgansim/detection.hpp"
#include "fedgansim/losses.hpp"

namespace fedgan::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// missing/unreadable file, as opposed to bad contents
struct ConfigFileError : ConfigError {
  using ConfigError::ConfigError;
};
// schema violation: unknown key, wrong type, broken invariant
struct ConfigSchemaError : ConfigError {
  using ConfigError::ConfigError;
};

enum class DatasetChoice { kRing, kImages };
enum class LossReduce { kMean, kLast };
// generator head: kAuto = identity for ring data, tanh for images
enum class GenOutput { kAuto, kIdentity, kTanh };

struct DatasetConfig {
  DatasetChoice kind = DatasetChoice::kRing;
  std::size_t samples_per_client = 2000;
  std::size_t modes = 8;
  double radius = 2.0;
  double sigma = 0.05;
  std::size_t marker_dims = 1;   // ring only
  std::size_t image_size = 16;   // images only
};

struct TriggerConfig {
  std::uint64_t seed = 1234;
  double marker_value = 3.0;  // ring: overwrites the marker coordinates
  std::size_t block_row = 14, block_col = 14;  // images: bottom-right 2x2
  std::size_t block_h = 2, block_w = 2;
  double poison_fraction = 1.0;
};

struct OptimConfig {
  double adam_lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double rmsprop_lr = 5e-5;
  double rmsprop_rho = 0.9;
};

struct ForestConfigIn {
  std::size_t trees = 100;
  std::size_t subsample = 256;
  double threshold = 0.6;
};

// Fully-resolved run description: every field materialized, echoed verbatim
// into the run directory so a run replays from its echo alone.
struct RunConfig {
  std::string name = "run";
  std::string preset;  // echo of the preset applied, if any
  std::size_t clients = 4;
  std::vector<std::size_t> malicious_ids;
  std::size_t rounds = 300;
  std::size_t local_steps = 0;  // 0 = one local epoch: ceil(n/batch) steps
  std::size_t warmup = 10;      // m
  double decay = 0.9;           // d
  iso::DecayMode decay_mode = iso::DecayMode::kCompound;
  bool detection_enabled = false;
  LossReduce report_loss = LossReduce::kMean;
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 1;  // defaults to seed when null in the file
  std::size_t batch_size = 64;
  std::size_t eval_every = 25;
  std::size_t eval_samples = 2048;
  std::size_t z_dim = 16;
  std::vector<std::size_t> gen_hidden = {64, 64};
  std::vector<std::size_t> disc_hidden = {64, 64};
  GenOutput gen_output = GenOutput::kAuto;
  gan::GanLossKind loss_kind = gan::GanLossKind::kVanillaNonsaturating;
  double gp_lambda = 10.0;
  OptimConfig optim;
  DatasetConfig dataset;
  TriggerConfig trigger;
  ForestConfigIn forest;
  std::string out_dir;
  std::string fidelity = "desk";

  std::size_t data_dim() const;
  double alpha() const {
    return static_cast<double>(malicious_ids.size()) / static_cast<double>(clients);
  }
  bool is_wgan() const { return loss_kind == gan::GanLossKind::kWganGp; }

  nlohmann::json to_json() const;
  void validate() const;
};

// Base defaults as JSON (the schema: unknown keys are whatever this object
// does not contain).
nlohmann::json default_config_json();

// Recursive merge of `patch` into `base`; any key in `patch` missing from
// `base` is a schema error (reported with its full path).
void merge_config(nlohmann::json& base, const nlohmann::json& patch,
                  const std::string& path = "");

// Preset deltas for the five experiment arms.
nlohmann::json preset_delta(const std::string& preset);

// "dotted.path=value" override applied onto the merged JSON; the path must
// already exist and the value is coerced to the existing type.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

RunConfig config_from_json(const nlohmann::json& j);

// Load + strict-merge + validate, no preset. Throws ConfigFileError when the
// file cannot be read and ConfigSchemaError for content problems.
RunConfig parse_config(const std::filesystem::path& path);

// Full pipeline used by the CLI: defaults <- file <- preset <- overrides.
RunConfig resolve_config(const std::filesystem::path& path, const std::string& preset,
                         const std::vector<std::string>& overrides);

}  // namespace fedgan::cli
