#include "fedgansim/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fedgan::gan {

static_assert(std::endian::native == std::endian::little,
              "FGS1 payload is written as native doubles and documented "
              "little-endian; big-endian hosts would need byte swaps");

namespace {
constexpr char kMagic[4] = {'F', 'G', 'S', '1'};
}

void write_blob(const std::filesystem::path& path, nlohmann::json header,
                std::span<const double> payload) {
  header["count"] = payload.size();
  const std::string hdr = header.dump();
  if (hdr.size() > 0xffffffffull) throw std::invalid_argument("write_blob: header too large");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_blob: cannot open " + path.string());
  out.write(kMagic, 4);
  const std::uint32_t len = static_cast<std::uint32_t>(hdr.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_blob: write failed for " + path.string());
}

Blob read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_blob: cannot open " + path.string());

  char magic[4];
  std::uint32_t len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&len), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("read_blob: " + path.string() + " is not an FGS1 file");
  }
  std::string hdr(len, '\0');
  in.read(hdr.data(), len);
  if (!in) throw std::runtime_error("read_blob: truncated header in " + path.string());

  Blob blob;
  blob.header = nlohmann::json::parse(hdr);
  const std::size_t count = blob.header.at("count").get<std::size_t>();
  blob.payload.resize(count);
  in.read(reinterpret_cast<char*>(blob.payload.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("read_blob: truncated payload in " + path.string());
  return blob;
}

nlohmann::json spec_to_json(const MlpSpec& spec) {
  static const char* kAct[] = {"tanh", "sigmoid", "softplus"};
  static const char* kOut[] = {"identity", "sigmoid", "tanh"};
  return {
      {"layer_sizes", spec.layer_sizes},
      {"activation", kAct[static_cast<int>(spec.activation)]},
      {"output_activation", kOut[static_cast<int>(spec.output_activation)]},
      {"init_seed", spec.init_seed},
  };
}

MlpSpec spec_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  const std::string act = j.at("activation").get<std::string>();
  if (act == "tanh") spec.activation = Activation::kTanh;
  else if (act == "sigmoid") spec.activation = Activation::kSigmoid;
  else if (act == "softplus") spec.activation = Activation::kSoftplus;
  else throw std::invalid_argument("spec_from_json: unknown activation " + act);
  const std::string out = j.at("output_activation").get<std::string>();
  if (out == "identity") spec.output_activation = OutputActivation::kIdentity;
  else if (out == "sigmoid") spec.output_activation = OutputActivation::kSigmoid;
  else if (out == "tanh") spec.output_activation = OutputActivation::kTanh;
  else throw std::invalid_argument("spec_from_json: unknown output activation " + out);
  spec.init_seed = j.at("init_seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

void save_params(const std::filesystem::path& path, const MlpSpec& spec,
                 const ParamVector& params, std::uint64_t step) {
  nlohmann::json header = {
      {"kind", "params"},
      {"spec", spec_to_json(spec)},
      {"seed", spec.init_seed},
      {"step", step},
  };
  write_blob(path, std::move(header), params.data);
}

std::pair<MlpSpec, ParamVector> load_params(const std::filesystem::path& path) {
  Blob blob = read_blob(path);
  if (blob.header.at("kind") != "params") {
    throw std::runtime_error("load_params: " + path.string() + " is not a params blob");
  }
  MlpSpec spec = spec_from_json(blob.header.at("spec"));
  ParamVector params;
  params.layout = ParamLayout::from_spec(spec);
  if (blob.payload.size() != params.layout.total) {
    throw std::runtime_error("load_params: payload length does not match spec layout");
  }
  params.data = std::move(blob.payload);
  return {spec, std::move(params)};
}

void save_samples(const std::filesystem::path& path, const ad::Tensor& samples) {
  nlohmann::json header = {
      {"kind", "samples"},
      {"shape", {samples.rows(), samples.cols()}},
  };
  write_blob(path, std::move(header), samples.data);
}

ad::Tensor load_samples(const std::filesystem::path& path) {
  Blob blob = read_blob(path);
  if (blob.header.at("kind") != "samples" && blob.header.at("kind") != "dataset") {
    throw std::runtime_error("load_samples: unexpected blob kind in " + path.string());
  }
  const auto shape = blob.header.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw std::runtime_error("load_samples: expected rank-2 shape");
  return ad::Tensor({shape[0], shape[1]}, std::move(blob.payload));
}

}  // namespace fedgan::gan
