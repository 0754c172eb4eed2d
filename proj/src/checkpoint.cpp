#include "wmg/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "wmg/error.hpp"
#include "wmg/feature_table.hpp"

namespace wmg {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "weights.bin is written as raw little-endian float32");

namespace {

constexpr const char* kManifest = "manifest";
constexpr const char* kWeights = "weights.bin";

[[noreturn]] void bad_field(const std::string& field, const std::string& why = "missing or invalid") {
  throw ValidationError("checkpoint manifest: field '" + field + "' is " + why);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) bad_field(path + key);
  return obj.at(key);
}

template <class T>
T get_as(const json& obj, const std::string& key, const std::string& path = "") {
  const json& v = require(obj, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    bad_field(path + key);
  }
}

json to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double double_field(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) bad_field(path + key);
  return v.get<double>();
}

struct TensorEntry {
  std::string name;
  std::int64_t rows;
  std::int64_t cols;
};

std::vector<TensorEntry> tensor_entries(const Checkpoint& ckpt) {
  std::vector<TensorEntry> out;
  const ParameterLayout layout(ckpt.denoiser);
  for (const auto& ti : layout.tensors()) out.push_back({ti.name, ti.rows, ti.cols});
  const auto c = static_cast<std::int64_t>(ckpt.norm_mean.size());
  out.push_back({"normalization.mean", 1, c});
  out.push_back({"normalization.scale", 1, c});
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  const ParameterLayout layout(ckpt.denoiser);
  if (ckpt.params.size() != layout.total_size())
    throw ArgumentError("checkpoint parameters do not match its denoiser config");
  const auto c = static_cast<std::size_t>(ckpt.denoiser.cluster_count);
  if (ckpt.norm_mean.size() != c || ckpt.norm_scale.size() != c)
    throw ArgumentError("checkpoint normalization constants do not match the cluster count");

  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : tensor_entries(ckpt)) {
    const auto count = static_cast<std::size_t>(t.rows * t.cols);
    tensors.push_back({{"name", t.name},
                       {"shape", {t.rows, t.cols}},
                       {"offset", offset},
                       {"count", count}});
    offset += count * sizeof(float);
  }
  const auto& d = ckpt.denoiser;
  const auto& tr = ckpt.training;
  json manifest = {
      {"format_version", ckpt.format_version},
      {"denoiser",
       {{"layers", d.layers},
        {"channels", d.channels},
        {"heads", d.heads},
        {"embed_dim", d.embed_dim},
        {"cluster_count", d.cluster_count},
        {"cluster_embed_dim", d.cluster_embed_dim}}},
      {"schedule",
       {{"steps", ckpt.schedule.steps},
        {"beta_start", ckpt.schedule.beta_start},
        {"beta_end", ckpt.schedule.beta_end},
        {"kind", to_string(ckpt.schedule.kind)}}},
      {"cluster_ids", ckpt.cluster_ids},
      {"standardize", ckpt.standardize},
      {"training",
       {{"epochs", tr.epochs},
        {"final_loss", to_json(tr.final_loss)},
        {"seed", tr.seed},
        {"batch_size", tr.batch_size},
        {"learning_rate", tr.learning_rate},
        {"mask_mode", tr.mask_mode},
        {"mask_polarity", tr.mask_polarity},
        {"observable_ratio", tr.observable_ratio}}},
      {"tensors", tensors},
      {"weights_bytes", offset}};

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory '" + dir.string() + "'");
  write_text_file(dir / kManifest, manifest.dump(2) + "\n");

  std::ofstream out(dir / kWeights, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + (dir / kWeights).string() + "' for writing");
  auto write_floats = [&](const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  };
  write_floats(ckpt.params);
  write_floats(ckpt.norm_mean);
  write_floats(ckpt.norm_scale);
  out.flush();
  if (!out) throw IoError("write to '" + (dir / kWeights).string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::string text = read_text_file(dir / kManifest);
  json m;
  try {
    m = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.format_version = get_as<int>(m, "format_version");
  if (ckpt.format_version != Checkpoint::kFormatVersion)
    throw VersionError("checkpoint format version " + std::to_string(ckpt.format_version) +
                       " is not supported (expected " +
                       std::to_string(Checkpoint::kFormatVersion) + ")");

  const json& d = require(m, "denoiser", "");
  ckpt.denoiser.layers = get_as<int>(d, "layers", "denoiser.");
  ckpt.denoiser.channels = get_as<int>(d, "channels", "denoiser.");
  ckpt.denoiser.heads = get_as<int>(d, "heads", "denoiser.");
  ckpt.denoiser.embed_dim = get_as<int>(d, "embed_dim", "denoiser.");
  ckpt.denoiser.cluster_count = get_as<int>(d, "cluster_count", "denoiser.");
  ckpt.denoiser.cluster_embed_dim = get_as<int>(d, "cluster_embed_dim", "denoiser.");
  try {
    ckpt.denoiser.validate();
  } catch (const ArgumentError& e) {
    throw ValidationError(std::string("checkpoint manifest: field 'denoiser' is invalid: ") +
                          e.what());
  }

  const json& s = require(m, "schedule", "");
  ckpt.schedule.steps = get_as<int>(s, "steps", "schedule.");
  ckpt.schedule.beta_start = get_as<double>(s, "beta_start", "schedule.");
  ckpt.schedule.beta_end = get_as<double>(s, "beta_end", "schedule.");
  try {
    ckpt.schedule.kind = parse_schedule_kind(get_as<std::string>(s, "kind", "schedule."));
    (void)ckpt.schedule.build();
  } catch (const Error& e) {
    throw ValidationError(std::string("checkpoint manifest: field 'schedule' is invalid: ") +
                          e.what());
  }

  ckpt.cluster_ids = get_as<std::vector<std::string>>(m, "cluster_ids");
  if (!ckpt.cluster_ids.empty() &&
      ckpt.cluster_ids.size() != static_cast<std::size_t>(ckpt.denoiser.cluster_count))
    bad_field("cluster_ids", "inconsistent with denoiser.cluster_count");
  ckpt.standardize = get_as<bool>(m, "standardize");

  const json& tr = require(m, "training", "");
  ckpt.training.epochs = get_as<int>(tr, "epochs", "training.");
  ckpt.training.final_loss = double_field(tr, "final_loss", "training.");
  ckpt.training.seed = get_as<std::uint64_t>(tr, "seed", "training.");
  ckpt.training.batch_size = get_as<int>(tr, "batch_size", "training.");
  ckpt.training.learning_rate = get_as<double>(tr, "learning_rate", "training.");
  ckpt.training.mask_mode = get_as<std::string>(tr, "mask_mode", "training.");
  ckpt.training.mask_polarity = get_as<std::string>(tr, "mask_polarity", "training.");
  ckpt.training.observable_ratio = get_as<double>(tr, "observable_ratio", "training.");

  // The tensor table must match the layout implied by the config exactly.
  ckpt.norm_mean.resize(static_cast<std::size_t>(ckpt.denoiser.cluster_count));
  const auto expected = tensor_entries(ckpt);
  const json& tensors = require(m, "tensors", "");
  if (!tensors.is_array() || tensors.size() != expected.size())
    bad_field("tensors", "inconsistent with the denoiser config");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const std::string path = "tensors[" + std::to_string(i) + "].";
    const auto& jt = tensors[i];
    const auto& e = expected[i];
    if (get_as<std::string>(jt, "name", path) != e.name) bad_field(path + "name", "unexpected");
    const auto shape = get_as<std::vector<std::int64_t>>(jt, "shape", path);
    if (shape != std::vector<std::int64_t>{e.rows, e.cols}) bad_field(path + "shape", "unexpected");
    if (get_as<std::size_t>(jt, "offset", path) != offset) bad_field(path + "offset", "unexpected");
    const auto count = static_cast<std::size_t>(e.rows * e.cols);
    if (get_as<std::size_t>(jt, "count", path) != count) bad_field(path + "count", "unexpected");
    offset += count * sizeof(float);
  }
  if (get_as<std::size_t>(m, "weights_bytes") != offset)
    bad_field("weights_bytes", "inconsistent with the tensor table");

  std::ifstream in(dir / kWeights, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open '" + (dir / kWeights).string() + "'");
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != offset)
    throw IoError("weights.bin has " + std::to_string(size) + " bytes, manifest expects " +
                  std::to_string(offset));
  in.seekg(0);
  auto read_floats = [&](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  };
  const auto c = static_cast<std::size_t>(ckpt.denoiser.cluster_count);
  read_floats(ckpt.params, ParameterLayout(ckpt.denoiser).total_size());
  read_floats(ckpt.norm_mean, c);
  read_floats(ckpt.norm_scale, c);
  if (!in) throw IoError("failed reading '" + (dir / kWeights).string() + "'");
  return ckpt;
}

}  // namespace wmg
