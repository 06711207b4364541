#include "fedgansim/config.hpp"

#include <fstream>
#include <set>

namespace fedgan::cli {

std::size_t RunConfig::data_dim() const {
  if (dataset.kind == DatasetChoice::kRing) return 2 + dataset.marker_dims;
  return dataset.image_size * dataset.image_size;
}

nlohmann::json default_config_json() {
  return {
      {"name", "run"},
      {"clients", 4},
      {"malicious_ids", nlohmann::json::array()},
      {"rounds", 300},
      {"local_steps", 0},
      {"warmup", 10},
      {"decay", 0.9},
      {"decay_mode", "compound"},
      {"detection_enabled", false},
      {"report_loss", "mean"},
      {"seed", 1},
      {"data_seed", nullptr},
      {"batch_size", 64},
      {"eval_every", 25},
      {"eval_samples", 2048},
      {"z_dim", 16},
      {"gen_hidden", {64, 64}},
      {"disc_hidden", {64, 64}},
      {"gen_output", "auto"},
      {"loss", {{"kind", "vanilla_nonsaturating"}, {"gp_lambda", 10.0}}},
      {"optim",
       {{"adam_lr", 2e-4},
        {"adam_beta1", 0.5},
        {"adam_beta2", 0.999},
        {"rmsprop_lr", 5e-5},
        {"rmsprop_rho", 0.9}}},
      {"dataset",
       {{"kind", "ring"},
        {"samples_per_client", 2000},
        {"modes", 8},
        {"radius", 2.0},
        {"sigma", 0.05},
        {"marker_dims", 1},
        {"image_size", 16}}},
      {"trigger",
       {{"seed", 1234},
        {"marker_value", 3.0},
        {"block_row", 14},
        {"block_col", 14},
        {"block_h", 2},
        {"block_w", 2},
        {"poison_fraction", 1.0}}},
      {"forest", {{"trees", 100}, {"subsample", 256}, {"threshold", 0.6}}},
      {"out_dir", ""},
      {"fidelity", "desk"},
      {"preset", nullptr},  // echo of the preset a run was launched with
  };
}

void merge_config(nlohmann::json& base, const nlohmann::json& patch,
                  const std::string& path) {
  if (!patch.is_object()) {
    throw ConfigSchemaError("config: expected an object at '" +
                            (path.empty() ? "<root>" : path) + "'");
  }
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) {
      throw ConfigSchemaError("config: unknown key '" + where + "'");
    }
    if (base[key].is_object()) {
      merge_config(base[key], value, where);
    } else {
      base[key] = value;
    }
  }
}

nlohmann::json preset_delta(const std::string& preset) {
  if (preset == "vanilla") {
    return {{"name", "vanilla"},
            {"malicious_ids", nlohmann::json::array()},
            {"detection_enabled", false},
            {"loss", {{"kind", "vanilla_nonsaturating"}}}};
  }
  if (preset == "attack") {
    return {{"name", "attack"},
            {"malicious_ids", {0}},
            {"detection_enabled", false},
            {"loss", {{"kind", "vanilla_nonsaturating"}}}};
  }
  if (preset == "global_defense") {
    return {{"name", "global_defense"},
            {"malicious_ids", {0}},
            {"detection_enabled", true},
            {"loss", {{"kind", "vanilla_nonsaturating"}}}};
  }
  if (preset == "local_defense") {
    return {{"name", "local_defense"},
            {"malicious_ids", {0}},
            {"detection_enabled", false},
            {"loss", {{"kind", "wgan_gp"}}}};
  }
  if (preset == "full_defense") {
    return {{"name", "full_defense"},
            {"malicious_ids", {0}},
            {"detection_enabled", true},
            {"loss", {{"kind", "wgan_gp"}}}};
  }
  throw ConfigSchemaError("config: unknown preset '" + preset +
                          "' (expected vanilla|attack|global_defense|local_defense|full_defense)");
}

void apply_override(nlohmann::json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigSchemaError("config: override must look like key.path=value, got '" +
                            assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json* node = &cfg;
  std::size_t begin = 0;
  std::vector<std::string> parts;
  while (begin <= path.size()) {
    const auto dot = path.find('.', begin);
    parts.push_back(path.substr(begin, dot == std::string::npos ? dot : dot - begin));
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
      throw ConfigSchemaError("config: unknown key '" + path + "' in override");
    }
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf)) {
    throw ConfigSchemaError("config: unknown key '" + path + "' in override");
  }

  // coerce to the JSON value the string parses as; arrays/objects included
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // plain string
  (*node)[leaf] = value;
}

namespace {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& path) {
  try {
    const nlohmann::json* node = &j;
    std::size_t begin = 0;
    while (true) {
      const auto dot = path.find('.', begin);
      const std::string key =
          path.substr(begin, dot == std::string::npos ? dot : dot - begin);
      node = &node->at(key);
      if (dot == std::string::npos) break;
      begin = dot + 1;
    }
    return node->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigSchemaError("config: field '" + path + "': " + e.what());
  }
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.name = get_field<std::string>(j, "name");
  c.clients = get_field<std::size_t>(j, "clients");
  c.malicious_ids = get_field<std::vector<std::size_t>>(j, "malicious_ids");
  c.rounds = get_field<std::size_t>(j, "rounds");
  c.local_steps = get_field<std::size_t>(j, "local_steps");
  c.warmup = get_field<std::size_t>(j, "warmup");
  c.decay = get_field<double>(j, "decay");

  const std::string mode = get_field<std::string>(j, "decay_mode");
  if (mode == "compound") c.decay_mode = iso::DecayMode::kCompound;
  else if (mode == "absolute") c.decay_mode = iso::DecayMode::kAbsolute;
  else throw ConfigSchemaError("config: decay_mode must be compound|absolute, got " + mode);

  c.detection_enabled = get_field<bool>(j, "detection_enabled");

  const std::string reduce = get_field<std::string>(j, "report_loss");
  if (reduce == "mean") c.report_loss = LossReduce::kMean;
  else if (reduce == "last") c.report_loss = LossReduce::kLast;
  else throw ConfigSchemaError("config: report_loss must be mean|last, got " + reduce);

  c.seed = get_field<std::uint64_t>(j, "seed");
  c.data_seed = j.at("data_seed").is_null() ? c.seed
                                            : get_field<std::uint64_t>(j, "data_seed");
  c.batch_size = get_field<std::size_t>(j, "batch_size");
  c.eval_every = get_field<std::size_t>(j, "eval_every");
  c.eval_samples = get_field<std::size_t>(j, "eval_samples");
  c.z_dim = get_field<std::size_t>(j, "z_dim");
  c.gen_hidden = get_field<std::vector<std::size_t>>(j, "gen_hidden");
  c.disc_hidden = get_field<std::vector<std::size_t>>(j, "disc_hidden");

  const std::string head = get_field<std::string>(j, "gen_output");
  if (head == "auto") c.gen_output = GenOutput::kAuto;
  else if (head == "identity") c.gen_output = GenOutput::kIdentity;
  else if (head == "tanh") c.gen_output = GenOutput::kTanh;
  else throw ConfigSchemaError("config: gen_output must be auto|identity|tanh, got " + head);

  const std::string kind = get_field<std::string>(j, "loss.kind");
  if (kind == "vanilla_saturating") c.loss_kind = gan::GanLossKind::kVanillaSaturating;
  else if (kind == "vanilla_nonsaturating") c.loss_kind = gan::GanLossKind::kVanillaNonsaturating;
  else if (kind == "wgan_gp") c.loss_kind = gan::GanLossKind::kWganGp;
  else {
    throw ConfigSchemaError(
        "config: loss.kind must be vanilla_saturating|vanilla_nonsaturating|wgan_gp, got " +
        kind);
  }
  c.gp_lambda = get_field<double>(j, "loss.gp_lambda");

  c.optim.adam_lr = get_field<double>(j, "optim.adam_lr");
  c.optim.adam_beta1 = get_field<double>(j, "optim.adam_beta1");
  c.optim.adam_beta2 = get_field<double>(j, "optim.adam_beta2");
  c.optim.rmsprop_lr = get_field<double>(j, "optim.rmsprop_lr");
  c.optim.rmsprop_rho = get_field<double>(j, "optim.rmsprop_rho");

  const std::string ds = get_field<std::string>(j, "dataset.kind");
  if (ds == "ring") c.dataset.kind = DatasetChoice::kRing;
  else if (ds == "images") c.dataset.kind = DatasetChoice::kImages;
  else throw ConfigSchemaError("config: dataset.kind must be ring|images, got " + ds);
  c.dataset.samples_per_client = get_field<std::size_t>(j, "dataset.samples_per_client");
  c.dataset.modes = get_field<std::size_t>(j, "dataset.modes");
  c.dataset.radius = get_field<double>(j, "dataset.radius");
  c.dataset.sigma = get_field<double>(j, "dataset.sigma");
  c.dataset.marker_dims = get_field<std::size_t>(j, "dataset.marker_dims");
  c.dataset.image_size = get_field<std::size_t>(j, "dataset.image_size");

  c.trigger.seed = get_field<std::uint64_t>(j, "trigger.seed");
  c.trigger.marker_value = get_field<double>(j, "trigger.marker_value");
  c.trigger.block_row = get_field<std::size_t>(j, "trigger.block_row");
  c.trigger.block_col = get_field<std::size_t>(j, "trigger.block_col");
  c.trigger.block_h = get_field<std::size_t>(j, "trigger.block_h");
  c.trigger.block_w = get_field<std::size_t>(j, "trigger.block_w");
  c.trigger.poison_fraction = get_field<double>(j, "trigger.poison_fraction");

  c.forest.trees = get_field<std::size_t>(j, "forest.trees");
  c.forest.subsample = get_field<std::size_t>(j, "forest.subsample");
  c.forest.threshold = get_field<double>(j, "forest.threshold");

  c.out_dir = get_field<std::string>(j, "out_dir");
  c.fidelity = get_field<std::string>(j, "fidelity");
  if (j.contains("preset") && j.at("preset").is_string()) {
    c.preset = j.at("preset").get<std::string>();
  }

  c.validate();
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigSchemaError("config: " + msg); };

  if (clients == 0) fail("clients: must be >= 1");
  std::set<std::size_t> distinct(malicious_ids.begin(), malicious_ids.end());
  if (distinct.size() != malicious_ids.size()) fail("malicious_ids: duplicate ids");
  for (std::size_t id : malicious_ids) {
    if (id >= clients) fail("malicious_ids: id " + std::to_string(id) + " out of range");
  }
  if (!malicious_ids.empty() && 2 * malicious_ids.size() >= clients) {
    fail("malicious_ids: adversarial fraction alpha = " +
         std::to_string(alpha()) + " violates 0 < alpha < 0.5");
  }
  if (detection_enabled && warmup >= rounds) {
    fail("warmup: m must be < rounds when detection is enabled");
  }
  if (!(decay > 0.0 && decay < 1.0)) fail("decay: d must lie in (0, 1)");
  if (batch_size == 0) fail("batch_size: must be >= 1");
  if (eval_every == 0) fail("eval_every: must be >= 1");
  if (eval_samples < 2) fail("eval_samples: must be >= 2");
  if (z_dim == 0) fail("z_dim: must be >= 1");
  if (dataset.samples_per_client == 0) fail("dataset.samples_per_client: must be >= 1");
  if (!(dataset.sigma > 0.0)) fail("dataset.sigma: must be > 0");
  if (dataset.kind == DatasetChoice::kRing) {
    if (dataset.modes < 2) fail("dataset.modes: must be >= 2");
    if (!malicious_ids.empty() && dataset.marker_dims == 0) {
      fail("dataset.marker_dims: ring data needs marker coordinates to poison");
    }
  } else {
    const std::size_t s = dataset.image_size;
    if (s != 8 && s != 16 && s != 32) fail("dataset.image_size: must be 8, 16 or 32");
    if (trigger.block_row + trigger.block_h > s || trigger.block_col + trigger.block_w > s) {
      fail("trigger: block does not fit the image");
    }
    if (trigger.block_h == 0 || trigger.block_w == 0) fail("trigger: empty block");
  }
  if (trigger.poison_fraction < 0.0 || trigger.poison_fraction > 1.0) {
    fail("trigger.poison_fraction: must lie in [0, 1]");
  }
  if (!(gp_lambda >= 0.0)) fail("loss.gp_lambda: must be >= 0");
  if (!(optim.adam_lr > 0.0) || !(optim.rmsprop_lr > 0.0)) {
    fail("optim: learning rates must be > 0");
  }
  if (forest.trees < 1) fail("forest.trees: must be >= 1");
  if (forest.subsample < 2) fail("forest.subsample: must be >= 2");
  if (!(forest.threshold > 0.5 && forest.threshold < 1.0)) {
    fail("forest.threshold: must lie in (0.5, 1)");
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = default_config_json();
  j["name"] = name;
  j["clients"] = clients;
  j["malicious_ids"] = malicious_ids;
  j["rounds"] = rounds;
  j["local_steps"] = local_steps;
  j["warmup"] = warmup;
  j["decay"] = decay;
  j["decay_mode"] = decay_mode == iso::DecayMode::kCompound ? "compound" : "absolute";
  j["detection_enabled"] = detection_enabled;
  j["report_loss"] = report_loss == LossReduce::kMean ? "mean" : "last";
  j["seed"] = seed;
  j["data_seed"] = data_seed;
  j["batch_size"] = batch_size;
  j["eval_every"] = eval_every;
  j["eval_samples"] = eval_samples;
  j["z_dim"] = z_dim;
  j["gen_hidden"] = gen_hidden;
  j["disc_hidden"] = disc_hidden;
  static const char* kHeads[] = {"auto", "identity", "tanh"};
  j["gen_output"] = kHeads[static_cast<int>(gen_output)];
  static const char* kKinds[] = {"vanilla_saturating", "vanilla_nonsaturating", "wgan_gp"};
  j["loss"] = {{"kind", kKinds[static_cast<int>(loss_kind)]}, {"gp_lambda", gp_lambda}};
  j["optim"] = {{"adam_lr", optim.adam_lr},
                {"adam_beta1", optim.adam_beta1},
                {"adam_beta2", optim.adam_beta2},
                {"rmsprop_lr", optim.rmsprop_lr},
                {"rmsprop_rho", optim.rmsprop_rho}};
  j["dataset"] = {{"kind", dataset.kind == DatasetChoice::kRing ? "ring" : "images"},
                  {"samples_per_client", dataset.samples_per_client},
                  {"modes", dataset.modes},
                  {"radius", dataset.radius},
                  {"sigma", dataset.sigma},
                  {"marker_dims", dataset.marker_dims},
                  {"image_size", dataset.image_size}};
  j["trigger"] = {{"seed", trigger.seed},
                  {"marker_value", trigger.marker_value},
                  {"block_row", trigger.block_row},
                  {"block_col", trigger.block_col},
                  {"block_h", trigger.block_h},
                  {"block_w", trigger.block_w},
                  {"poison_fraction", trigger.poison_fraction}};
  j["forest"] = {{"trees", forest.trees},
                 {"subsample", forest.subsample},
                 {"threshold", forest.threshold}};
  j["out_dir"] = out_dir;
  j["fidelity"] = fidelity;
  if (!preset.empty()) j["preset"] = preset;
  return j;
}

namespace {

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigFileError("config: cannot open file '" + path.string() + "'");
  }
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigSchemaError("config: '" + path.string() + "' is not valid JSON");
  }
  return j;
}

}  // namespace

RunConfig parse_config(const std::filesystem::path& path) {
  nlohmann::json merged = default_config_json();
  merge_config(merged, load_json_file(path));
  return config_from_json(merged);
}

RunConfig resolve_config(const std::filesystem::path& path, const std::string& preset,
                         const std::vector<std::string>& overrides) {
  nlohmann::json merged = default_config_json();
  if (!path.empty()) merge_config(merged, load_json_file(path));
  if (!preset.empty()) {
    merge_config(merged, preset_delta(preset));
    merged["preset"] = preset;
  }
  for (const std::string& assignment : overrides) apply_override(merged, assignment);
  return config_from_json(merged);
}

}  // namespace fedgan::cli
