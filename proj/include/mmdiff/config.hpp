// Model/run configuration: presets, validation, and the flat key=value
// config-file format used by the CLI (with a stable content hash).
#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmdiff/schedule.hpp"
#include "mmdiff/tensor.hpp"

namespace mmdiff {

struct ModelConfig {
  // Media shapes.
  int frames = 8;
  int video_channels = 3;
  int height = 16;
  int width = 16;
  int audio_channels = 1;
  int audio_len = 1024;
  double fps = 8.0;
  double sample_rate = 1024.0;
  // Topology.
  int base_channels = 32;
  std::vector<int> channel_mults{1, 2};
  int blocks_per_scale = 1;
  std::vector<int> video_attn_scales{2};   // 1-based scale indices
  std::vector<int> cross_attn_scales{2};   // 1-based scale indices
  std::vector<int> cross_attn_window{4};   // S per cross_attn_scales entry
  int audio_dilation_depth = 6;            // ladder 1,2,...,2^N
  int time_embed_dim = 128;
  int head_dim = 16;
  double dropout = 0.1;
  // Switches.
  bool time_scale_shift = false;    // bias (default) vs scale-shift fusion
  bool video_temporal_first = true; // 1D-then-2D conv order in video blocks
  bool use_group_norm = true;       // ablation/testing switch
  int fixed_shift = -1;             // -1: fresh R per block invocation
  // Schedule.
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SigmaMode sigma_mode = SigmaMode::beta;

  int scales() const { return static_cast<int>(channel_mults.size()); }
  int channels_at(int scale1) const {  // 1-based
    return base_channels * channel_mults[scale1 - 1];
  }
  int audio_len_at(int scale1) const {
    int len = audio_len;
    for (int s = 1; s < scale1; ++s) len /= 4;
    return len;
  }
  bool scale_in(const std::vector<int>& set, int scale1) const {
    for (int s : set)
      if (s == scale1) return true;
    return false;
  }
  // Window size S for a 1-based scale, 0 if the scale has no cross attention.
  int window_for_scale(int scale1) const {
    for (size_t i = 0; i < cross_attn_scales.size(); ++i)
      if (cross_attn_scales[i] == scale1) return cross_attn_window[i];
    return 0;
  }

  Shape video_shape() const { return {frames, video_channels, height, width}; }
  Shape audio_shape() const { return {audio_channels, audio_len}; }

  void validate() const {
    require(frames >= 1 && video_channels >= 1 && height >= 1 && width >= 1,
            "video shape fields must be positive");
    require(audio_channels >= 1 && audio_len >= 1, "audio shape fields must be positive");
    require(fps > 0 && sample_rate > 0, "fps and sample_rate must be positive");
    double dv = frames / fps, da = audio_len / sample_rate;
    require(std::abs(dv - da) <= 1e-9 * std::max(dv, da),
            "video and audio durations must match");
    require(base_channels >= 1, "base_channels must be >= 1");
    require(!channel_mults.empty(), "channel_mults must be non-empty");
    for (int m : channel_mults) require(m >= 1, "channel_mults entries must be >= 1");
    require(blocks_per_scale >= 1, "blocks_per_scale must be >= 1");
    require(time_embed_dim >= 2 && time_embed_dim % 2 == 0,
            "time_embed_dim must be even and >= 2");
    require(head_dim >= 1, "head_dim must be >= 1");
    require(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
    require(audio_dilation_depth >= 0, "audio_dilation_depth must be >= 0");
    require(timesteps >= 1, "timesteps must be >= 1");
    require(beta_start > 0 && beta_start <= beta_end && beta_end < 1,
            "invalid beta range");

    const int ns = scales();
    int hdiv = 1, adiv = 1;
    for (int s = 1; s < ns; ++s) {
      hdiv *= 2;
      adiv *= 4;
    }
    require(height % hdiv == 0 && width % hdiv == 0,
            "H and W must be divisible by 2^(scales-1)");
    require(audio_len % adiv == 0, "audio_len must be divisible by 4^(scales-1)");
    require(audio_len % frames == 0, "audio_len must be divisible by frames");

    require(cross_attn_window.size() == cross_attn_scales.size(),
            "cross_attn_window must parallel cross_attn_scales");
    auto check_scales = [&](const std::vector<int>& set, const char* what) {
      for (size_t i = 0; i < set.size(); ++i) {
        require(set[i] >= 1 && set[i] <= ns, std::string(what) + " scale out of range");
        for (size_t j = i + 1; j < set.size(); ++j)
          require(set[i] != set[j], std::string(what) + " has duplicate scales");
      }
    };
    check_scales(video_attn_scales, "video_attn_scales");
    check_scales(cross_attn_scales, "cross_attn_scales");
    for (size_t i = 0; i < cross_attn_scales.size(); ++i) {
      int s = cross_attn_scales[i], S = cross_attn_window[i];
      require(S >= 1 && S <= frames, "cross-attention window must be in [1, frames]");
      require(audio_len_at(s) % frames == 0,
              "audio length at cross-attention scale must be divisible by frames");
      require(channels_at(s) % head_dim == 0,
              "channels at cross-attention scale must be divisible by head_dim");
    }
    for (int s : video_attn_scales)
      require(channels_at(s) % head_dim == 0,
              "channels at video-attention scale must be divisible by head_dim");
    require(fixed_shift >= -1, "fixed_shift must be -1 (sampled) or >= 0");
  }

  NoiseSchedule make_schedule() const {
    return build_linear_schedule(timesteps, beta_start, beta_end, sigma_mode);
  }

  // CPU-testable default.
  static ModelConfig desk() { return ModelConfig{}; }

  // Tiny config for 64-bit finite-difference gradient checks.
  static ModelConfig micro() {
    ModelConfig c;
    c.frames = 4;
    c.height = 8;
    c.width = 8;
    c.audio_len = 64;
    c.fps = 4;
    c.sample_rate = 64;
    c.base_channels = 8;
    c.cross_attn_window = {2};
    c.audio_dilation_depth = 4;
    c.time_embed_dim = 32;
    c.head_dim = 8;
    c.dropout = 0.0;
    return c;
  }

  // Published architecture (for parameter counting; not CPU-trainable here).
  static ModelConfig paper() {
    ModelConfig c;
    c.frames = 16;
    c.height = 64;
    c.width = 64;
    c.audio_len = 25600;
    c.fps = 10;
    c.sample_rate = 16000;
    c.base_channels = 128;
    c.channel_mults = {1, 2, 3, 4};
    c.blocks_per_scale = 2;
    c.video_attn_scales = {2, 3, 4};
    c.cross_attn_scales = {2, 3, 4};
    c.cross_attn_window = {1, 4, 8};
    c.audio_dilation_depth = 10;
    c.time_embed_dim = 128;
    c.head_dim = 64;
    return c;
  }
};

struct TrainConfig {
  double lr = 2e-4;
  int batch_size = 8;
  int steps = 5000;
  double ema_decay = 0.999;
  double grad_clip = 1.0;
  double weight_decay = 0.0;
  int checkpoint_every = 1000;
  int log_every = 50;
  double loss_lambda = 1.0;

  void validate() const {
    require(lr >= 0, "train.lr must be >= 0");
    require(batch_size >= 1, "train.batch_size must be >= 1");
    require(steps >= 1, "train.steps must be >= 1");
    require(ema_decay >= 0 && ema_decay < 1, "train.ema_decay must be in [0, 1)");
    require(grad_clip >= 0, "train.grad_clip must be >= 0");
    require(weight_decay >= 0, "train.weight_decay must be >= 0");
    require(checkpoint_every >= 1, "train.checkpoint_every must be >= 1");
    require(log_every >= 1, "train.log_every must be >= 1");
    require(loss_lambda > 0, "train.loss_lambda must be > 0");
  }
};

struct DataConfig {
  int count = 256;
  double blob_freq_min = 0.5;
  double blob_freq_max = 1.0;
  double tone_freq_min = 50.0;
  double tone_freq_max = 200.0;
  double blob_sigma_frac = 0.125;  // blob sigma = height * frac

  void validate() const {
    require(count >= 1, "data.count must be >= 1");
    require(blob_freq_min > 0 && blob_freq_min <= blob_freq_max,
            "invalid blob frequency range");
    require(tone_freq_min > 0 && tone_freq_min <= tone_freq_max,
            "invalid tone frequency range");
    require(blob_sigma_frac > 0, "data.blob_sigma_frac must be > 0");
  }
};

struct SampleConfig {
  int stride = 1;
  int count = 1;

  void validate() const {
    require(stride >= 1, "sample.stride must be >= 1");
    require(count >= 1, "sample.count must be >= 1");
  }
};

struct EvalConfig {
  std::string extractor = "stats";  // stats | proj
  int proj_dim = 16;

  void validate() const {
    require(extractor == "stats" || extractor == "proj",
            "eval.extractor must be 'stats' or 'proj'");
    require(proj_dim >= 1, "eval.proj_dim must be >= 1");
  }
};

enum class GuideMethod { replacement, gradient };
enum class GuideDirection { audio_given_video, video_given_audio };

struct GuidanceConfig {
  GuideMethod method = GuideMethod::replacement;
  double lambda_guide = 1.0;
  GuideDirection direction = GuideDirection::audio_given_video;
  int stride = 1;

  void validate() const {
    if (lambda_guide < 0) throw config_error("lambda_guide must be >= 0");
    if (stride < 1) throw config_error("guidance stride must be >= 1");
  }
};

// Input/output locations; commands require the ones they consume, and the
// matching command-line flags override these keys.
struct PathsConfig {
  std::string data;        // dataset dir (train, eval fallback)
  std::string checkpoint;  // model archive (sample, sample-cond)
  std::string condition;   // condition media dir (sample-cond)
  std::string gen;         // generated set (eval)
  std::string ref;         // reference set (eval)
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  SampleConfig sample;
  EvalConfig eval;
  GuidanceConfig guidance;
  PathsConfig paths;
  long seed = 0;  // base RNG seed; the --seed flag overrides

  void validate() const {
    require(seed >= 0, "seed must be >= 0");
    model.validate();
    train.validate();
    data.validate();
    sample.validate();
    eval.validate();
    guidance.validate();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline int parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': not an integer: '" + v + "'");
  }
}

inline double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': not a number: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("config key '" + key + "': not a boolean: '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  std::string cur;
  std::stringstream ss(v);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(parse_int(cur, key));
  }
  if (out.empty()) throw config_error("config key '" + key + "': empty list");
  return out;
}

inline std::string fmt_int_list(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::string fmt_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace detail

// Parse "key = value" lines ('#' starts a comment). Later keys override
// earlier ones; returned in file order.
inline std::vector<std::pair<std::string, std::string>> parse_kv_text(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) +
                         ": expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw config_error("config line " + std::to_string(lineno) +
                                        ": empty key");
    out.emplace_back(key, val);
  }
  return out;
}

inline bool apply_model_key(ModelConfig& m, const std::string& key,
                            const std::string& val) {
  using namespace detail;
  if (key == "model.frames") m.frames = parse_int(val, key);
  else if (key == "model.video_channels") m.video_channels = parse_int(val, key);
  else if (key == "model.height") m.height = parse_int(val, key);
  else if (key == "model.width") m.width = parse_int(val, key);
  else if (key == "model.audio_channels") m.audio_channels = parse_int(val, key);
  else if (key == "model.audio_len") m.audio_len = parse_int(val, key);
  else if (key == "model.fps") m.fps = parse_double(val, key);
  else if (key == "model.sample_rate") m.sample_rate = parse_double(val, key);
  else if (key == "model.base_channels") m.base_channels = parse_int(val, key);
  else if (key == "model.channel_mults") m.channel_mults = parse_int_list(val, key);
  else if (key == "model.blocks_per_scale") m.blocks_per_scale = parse_int(val, key);
  else if (key == "model.video_attn_scales") m.video_attn_scales = parse_int_list(val, key);
  else if (key == "model.cross_attn_scales") m.cross_attn_scales = parse_int_list(val, key);
  else if (key == "model.cross_attn_window") m.cross_attn_window = parse_int_list(val, key);
  else if (key == "model.audio_dilation_depth") m.audio_dilation_depth = parse_int(val, key);
  else if (key == "model.time_embed_dim") m.time_embed_dim = parse_int(val, key);
  else if (key == "model.head_dim") m.head_dim = parse_int(val, key);
  else if (key == "model.dropout") m.dropout = parse_double(val, key);
  else if (key == "model.time_scale_shift") m.time_scale_shift = parse_bool(val, key);
  else if (key == "model.video_temporal_first") m.video_temporal_first = parse_bool(val, key);
  else if (key == "model.use_group_norm") m.use_group_norm = parse_bool(val, key);
  else if (key == "model.fixed_shift") m.fixed_shift = parse_int(val, key);
  else if (key == "model.timesteps") m.timesteps = parse_int(val, key);
  else if (key == "model.beta_start") m.beta_start = parse_double(val, key);
  else if (key == "model.beta_end") m.beta_end = parse_double(val, key);
  else if (key == "model.sigma_mode") {
    if (val == "beta") m.sigma_mode = SigmaMode::beta;
    else if (val == "beta_tilde") m.sigma_mode = SigmaMode::beta_tilde;
    else throw config_error("model.sigma_mode must be 'beta' or 'beta_tilde'");
  } else return false;
  return true;
}

inline GuideMethod parse_guide_method(const std::string& v) {
  if (v == "replacement") return GuideMethod::replacement;
  if (v == "gradient") return GuideMethod::gradient;
  throw config_error("guidance.method must be 'replacement' or 'gradient'");
}

inline GuideDirection parse_guide_direction(const std::string& v) {
  if (v == "video_to_audio") return GuideDirection::audio_given_video;
  if (v == "audio_to_video") return GuideDirection::video_given_audio;
  throw config_error(
      "guidance.direction must be 'video_to_audio' or 'audio_to_video'");
}

inline std::string guide_method_name(GuideMethod m) {
  return m == GuideMethod::replacement ? "replacement" : "gradient";
}

inline std::string guide_direction_name(GuideDirection d) {
  return d == GuideDirection::audio_given_video ? "video_to_audio"
                                                : "audio_to_video";
}

inline ModelConfig preset_by_name(const std::string& name) {
  if (name == "desk") return ModelConfig::desk();
  if (name == "micro") return ModelConfig::micro();
  if (name == "paper") return ModelConfig::paper();
  throw config_error("unknown model.preset '" + name +
                     "' (expected desk, micro, or paper)");
}

// Full run-config parse. "model.preset" (if present) seeds the model config
// before field overrides; unknown keys are rejected.
inline RunConfig parse_run_config(const std::string& text) {
  auto kvs = parse_kv_text(text);
  RunConfig rc;
  for (const auto& [k, v] : kvs)
    if (k == "model.preset") rc.model = preset_by_name(v);
  using namespace detail;
  for (const auto& [key, val] : kvs) {
    if (key == "model.preset") continue;
    if (apply_model_key(rc.model, key, val)) continue;
    if (key == "train.lr") rc.train.lr = parse_double(val, key);
    else if (key == "train.batch_size") rc.train.batch_size = parse_int(val, key);
    else if (key == "train.steps") rc.train.steps = parse_int(val, key);
    else if (key == "train.ema_decay") rc.train.ema_decay = parse_double(val, key);
    else if (key == "train.grad_clip") rc.train.grad_clip = parse_double(val, key);
    else if (key == "train.weight_decay") rc.train.weight_decay = parse_double(val, key);
    else if (key == "train.checkpoint_every") rc.train.checkpoint_every = parse_int(val, key);
    else if (key == "train.log_every") rc.train.log_every = parse_int(val, key);
    else if (key == "train.loss_lambda") rc.train.loss_lambda = parse_double(val, key);
    else if (key == "data.count") rc.data.count = parse_int(val, key);
    else if (key == "data.blob_freq_min") rc.data.blob_freq_min = parse_double(val, key);
    else if (key == "data.blob_freq_max") rc.data.blob_freq_max = parse_double(val, key);
    else if (key == "data.tone_freq_min") rc.data.tone_freq_min = parse_double(val, key);
    else if (key == "data.tone_freq_max") rc.data.tone_freq_max = parse_double(val, key);
    else if (key == "data.blob_sigma_frac") rc.data.blob_sigma_frac = parse_double(val, key);
    else if (key == "sample.stride") rc.sample.stride = parse_int(val, key);
    else if (key == "sample.count") rc.sample.count = parse_int(val, key);
    else if (key == "eval.extractor") rc.eval.extractor = val;
    else if (key == "eval.proj_dim") rc.eval.proj_dim = parse_int(val, key);
    else if (key == "guidance.method") rc.guidance.method = parse_guide_method(val);
    else if (key == "guidance.lambda") rc.guidance.lambda_guide = parse_double(val, key);
    else if (key == "guidance.direction")
      rc.guidance.direction = parse_guide_direction(val);
    else if (key == "paths.data") rc.paths.data = val;
    else if (key == "paths.checkpoint") rc.paths.checkpoint = val;
    else if (key == "paths.condition") rc.paths.condition = val;
    else if (key == "paths.gen") rc.paths.gen = val;
    else if (key == "paths.ref") rc.paths.ref = val;
    else if (key == "seed") rc.seed = parse_int(val, key);
    else throw config_error("unknown config key '" + key + "'");
  }
  rc.validate();
  return rc;
}

// Canonical flat serialization of the model config (field order is part of
// the format); the basis for the checkpoint's config identity hash.
inline std::string model_config_text(const ModelConfig& m) {
  using namespace detail;
  std::ostringstream os;
  os << "model.frames = " << m.frames << "\n";
  os << "model.video_channels = " << m.video_channels << "\n";
  os << "model.height = " << m.height << "\n";
  os << "model.width = " << m.width << "\n";
  os << "model.audio_channels = " << m.audio_channels << "\n";
  os << "model.audio_len = " << m.audio_len << "\n";
  os << "model.fps = " << fmt_double(m.fps) << "\n";
  os << "model.sample_rate = " << fmt_double(m.sample_rate) << "\n";
  os << "model.base_channels = " << m.base_channels << "\n";
  os << "model.channel_mults = " << fmt_int_list(m.channel_mults) << "\n";
  os << "model.blocks_per_scale = " << m.blocks_per_scale << "\n";
  os << "model.video_attn_scales = " << fmt_int_list(m.video_attn_scales) << "\n";
  os << "model.cross_attn_scales = " << fmt_int_list(m.cross_attn_scales) << "\n";
  os << "model.cross_attn_window = " << fmt_int_list(m.cross_attn_window) << "\n";
  os << "model.audio_dilation_depth = " << m.audio_dilation_depth << "\n";
  os << "model.time_embed_dim = " << m.time_embed_dim << "\n";
  os << "model.head_dim = " << m.head_dim << "\n";
  os << "model.dropout = " << fmt_double(m.dropout) << "\n";
  os << "model.time_scale_shift = " << (m.time_scale_shift ? "true" : "false") << "\n";
  os << "model.video_temporal_first = " << (m.video_temporal_first ? "true" : "false") << "\n";
  os << "model.use_group_norm = " << (m.use_group_norm ? "true" : "false") << "\n";
  os << "model.fixed_shift = " << m.fixed_shift << "\n";
  os << "model.timesteps = " << m.timesteps << "\n";
  os << "model.beta_start = " << fmt_double(m.beta_start) << "\n";
  os << "model.beta_end = " << fmt_double(m.beta_end) << "\n";
  os << "model.sigma_mode = "
     << (m.sigma_mode == SigmaMode::beta ? "beta" : "beta_tilde") << "\n";
  return os.str();
}

inline ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig m;
  for (const auto& [k, v] : parse_kv_text(text)) {
    if (!apply_model_key(m, k, v))
      throw config_error("unknown model config key '" + k + "'");
  }
  m.validate();
  return m;
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t model_config_hash(const ModelConfig& m) {
  return fnv1a64(model_config_text(m));
}

// Full resolved run configuration; reparses to an identical RunConfig.
inline std::string run_config_text(const RunConfig& rc) {
  using namespace detail;
  std::ostringstream os;
  os << model_config_text(rc.model);
  os << "train.lr = " << fmt_double(rc.train.lr) << "\n";
  os << "train.batch_size = " << rc.train.batch_size << "\n";
  os << "train.steps = " << rc.train.steps << "\n";
  os << "train.ema_decay = " << fmt_double(rc.train.ema_decay) << "\n";
  os << "train.grad_clip = " << fmt_double(rc.train.grad_clip) << "\n";
  os << "train.weight_decay = " << fmt_double(rc.train.weight_decay) << "\n";
  os << "train.checkpoint_every = " << rc.train.checkpoint_every << "\n";
  os << "train.log_every = " << rc.train.log_every << "\n";
  os << "train.loss_lambda = " << fmt_double(rc.train.loss_lambda) << "\n";
  os << "data.count = " << rc.data.count << "\n";
  os << "data.blob_freq_min = " << fmt_double(rc.data.blob_freq_min) << "\n";
  os << "data.blob_freq_max = " << fmt_double(rc.data.blob_freq_max) << "\n";
  os << "data.tone_freq_min = " << fmt_double(rc.data.tone_freq_min) << "\n";
  os << "data.tone_freq_max = " << fmt_double(rc.data.tone_freq_max) << "\n";
  os << "data.blob_sigma_frac = " << fmt_double(rc.data.blob_sigma_frac) << "\n";
  os << "sample.stride = " << rc.sample.stride << "\n";
  os << "sample.count = " << rc.sample.count << "\n";
  os << "eval.extractor = " << rc.eval.extractor << "\n";
  os << "eval.proj_dim = " << rc.eval.proj_dim << "\n";
  os << "guidance.method = " << guide_method_name(rc.guidance.method) << "\n";
  os << "guidance.lambda = " << fmt_double(rc.guidance.lambda_guide) << "\n";
  os << "guidance.direction = " << guide_direction_name(rc.guidance.direction)
     << "\n";
  if (!rc.paths.data.empty()) os << "paths.data = " << rc.paths.data << "\n";
  if (!rc.paths.checkpoint.empty())
    os << "paths.checkpoint = " << rc.paths.checkpoint << "\n";
  if (!rc.paths.condition.empty())
    os << "paths.condition = " << rc.paths.condition << "\n";
  if (!rc.paths.gen.empty()) os << "paths.gen = " << rc.paths.gen << "\n";
  if (!rc.paths.ref.empty()) os << "paths.ref = " << rc.paths.ref << "\n";
  os << "seed = " << rc.seed << "\n";
  return os.str();
}

}  // namespace mmdiff
