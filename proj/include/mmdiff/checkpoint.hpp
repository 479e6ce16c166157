// Checkpoint archive: magic + JSON manifest (schema, step, config text and
// hash, array table) + raw little-endian f64 payload. Parameter and EMA
// arrays round-trip bit-exactly; loading into a model insists on a matching
// config hash — no silent reshapes.
#pragma once

#include <json.hpp>

#include <bit>

#include "mmdiff/config.hpp"
#include "mmdiff/fileio.hpp"
#include "mmdiff/graph.hpp"

namespace mmdiff {

inline constexpr char kCkptMagic[8] = {'M', 'M', 'D', 'C', 'K', 'P', 'T', '1'};
inline constexpr int kCkptSchema = 1;

struct Checkpoint {
  long step = 0;
  std::string config_text;
  uint64_t config_hash = 0;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> param;
  std::vector<std::vector<double>> ema;
};

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ParamStore<double>& store,
                            const std::vector<std::vector<double>>& ema, long step) {
  if (static_cast<int>(ema.size()) != store.size())
    throw config_error("save_checkpoint: EMA entry count mismatch");

  nlohmann::json arrays = nlohmann::json::array();
  for (int i = 0; i < store.size(); ++i) {
    const auto& e = store[i];
    if (ema[i].size() != e.value.size())
      throw config_error("save_checkpoint: EMA size mismatch at " + e.name);
    arrays.push_back({{"name", e.name},
                      {"shape", e.shape},
                      {"count", e.value.size()}});
  }
  nlohmann::json manifest = {{"schema", kCkptSchema},
                             {"step", step},
                             {"config", model_config_text(cfg)},
                             {"config_hash", model_config_hash(cfg)},
                             {"dtype", "f64"},
                             {"arrays", arrays}};
  std::string mtext = manifest.dump();

  Bytes b;
  b.insert(b.end(), kCkptMagic, kCkptMagic + 8);
  detail::put_u64le(b, mtext.size());
  b.insert(b.end(), mtext.begin(), mtext.end());
  auto put_array = [&](const std::vector<double>& v) {
    for (double x : v) detail::put_u64le(b, std::bit_cast<uint64_t>(x));
  };
  for (int i = 0; i < store.size(); ++i) put_array(store[i].value);
  for (int i = 0; i < store.size(); ++i) put_array(ema[i]);
  write_file(path, b);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Bytes b = read_file(path);
  detail::ByteReader r(b, "checkpoint " + path.string());
  if (r.tag(8) != std::string(kCkptMagic, 8))
    throw runtime_fault("not a checkpoint archive: " + path.string());
  uint64_t mlen = r.u64le();
  std::string mtext = r.tag(mlen);

  nlohmann::json manifest;
  Checkpoint out;
  try {
    manifest = nlohmann::json::parse(mtext);
    if (manifest.at("schema").get<int>() != kCkptSchema)
      throw runtime_fault("checkpoint schema version mismatch: " + path.string());
    if (manifest.at("dtype").get<std::string>() != "f64")
      throw runtime_fault("checkpoint dtype unsupported: " + path.string());
    out.step = manifest.at("step").get<long>();
    out.config_text = manifest.at("config").get<std::string>();
    out.config_hash = manifest.at("config_hash").get<uint64_t>();
    for (const auto& a : manifest.at("arrays")) {
      out.names.push_back(a.at("name").get<std::string>());
      out.shapes.push_back(a.at("shape").get<Shape>());
      size_t n = a.at("count").get<size_t>();
      if (n != static_cast<size_t>(shape_numel(out.shapes.back())))
        throw runtime_fault("checkpoint array table inconsistent: " + path.string());
      out.param.emplace_back(n);
    }
  } catch (const nlohmann::json::exception& e) {
    throw runtime_fault("corrupt checkpoint manifest: " + std::string(e.what()));
  }

  auto get_array = [&](std::vector<double>& v) {
    for (double& x : v) x = std::bit_cast<double>(r.u64le());
  };
  for (auto& v : out.param) get_array(v);
  out.ema.reserve(out.param.size());
  for (const auto& p : out.param) {
    out.ema.emplace_back(p.size());
    get_array(out.ema.back());
  }
  if (r.pos != b.size())
    throw runtime_fault("checkpoint has trailing bytes: " + path.string());
  return out;
}

// Copies the checkpoint's parameter (or EMA) arrays into a live model.
// Model concept: config() and params().
template <class Model>
void restore_model(Model& model, const Checkpoint& ck, bool use_ema) {
  if (model_config_hash(model.config()) != ck.config_hash)
    throw config_error(
        "checkpoint was written for a different model config (hash mismatch)");
  auto& store = model.params();
  if (store.size() != static_cast<int>(ck.names.size()))
    throw config_error("checkpoint parameter table size mismatch");
  const auto& arrays = use_ema ? ck.ema : ck.param;
  for (int i = 0; i < store.size(); ++i) {
    auto& e = store[i];
    if (e.name != ck.names[i] || e.value.size() != arrays[i].size())
      throw config_error("checkpoint entry mismatch at " + ck.names[i]);
    e.value = arrays[i];
  }
}

}  // namespace mmdiff
