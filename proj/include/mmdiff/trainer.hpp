// Training loop: adaptive-moment optimizer with global-norm clipping, EMA
// parameter shadow, per-example timestep draws, and checkpoint plumbing.
// Parameters have a single writer (the trainer); batches are immutable.
#pragma once

#include <chrono>
#include <sstream>

#include "mmdiff/checkpoint.hpp"
#include "mmdiff/config.hpp"
#include "mmdiff/diffusion.hpp"

namespace mmdiff {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: theta *= 1 - lr * wd before the step
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long t = 0;
};

inline AdamState make_adam_state(const ParamStore<double>& store) {
  AdamState st;
  st.m.resize(store.size());
  st.v.resize(store.size());
  for (int i = 0; i < store.size(); ++i) {
    st.m[i].assign(store[i].value.size(), 0.0);
    st.v[i].assign(store[i].value.size(), 0.0);
  }
  return st;
}

inline void scale_grads(ParamStore<double>& store, double s) {
  for (int i = 0; i < store.size(); ++i)
    for (auto& g : store[i].grad) g *= s;
}

// Returns the pre-clip global norm; scales grads only when above max_norm.
inline double clip_global_norm(ParamStore<double>& store, double max_norm) {
  double norm = std::sqrt(store.grad_sq_norm());
  if (max_norm > 0 && norm > max_norm && norm > 0)
    scale_grads(store, max_norm / norm);
  return norm;
}

inline void adam_step(ParamStore<double>& store, AdamState& st, const AdamConfig& c) {
  if (static_cast<int>(st.m.size()) != store.size())
    throw config_error("adam_step: state does not match parameter store");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  for (int i = 0; i < store.size(); ++i) {
    auto& e = store[i];
    auto& m = st.m[i];
    auto& v = st.v[i];
    if (m.size() != e.value.size())
      throw config_error("adam_step: state does not match parameter store");
    for (size_t j = 0; j < e.value.size(); ++j) {
      const double g = e.grad[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      if (c.weight_decay > 0) e.value[j] *= 1.0 - c.lr * c.weight_decay;
      e.value[j] -= c.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.eps);
    }
  }
}

inline std::vector<std::vector<double>> make_ema_shadow(
    const ParamStore<double>& store) {
  std::vector<std::vector<double>> s(store.size());
  for (int i = 0; i < store.size(); ++i) s[i] = store[i].value;
  return s;
}

inline void ema_update(std::vector<std::vector<double>>& shadow,
                       const ParamStore<double>& store, double decay) {
  if (static_cast<int>(shadow.size()) != store.size())
    throw config_error("ema_update: shadow does not match parameter store");
  for (int i = 0; i < store.size(); ++i) {
    const auto& val = store[i].value;
    auto& sh = shadow[i];
    if (sh.size() != val.size())
      throw config_error("ema_update: shadow does not match parameter store");
    for (size_t j = 0; j < val.size(); ++j)
      sh[j] = decay * sh[j] + (1.0 - decay) * val[j];
  }
}

// Uniform batch draw with replacement; one uniform per slot.
inline std::vector<int> draw_batch_indices(int dataset_size, int batch_size,
                                           Rng& rng) {
  if (dataset_size < 1) throw config_error("batch draw: empty dataset");
  std::vector<int> idx(batch_size);
  for (auto& i : idx)
    i = std::min(dataset_size - 1, static_cast<int>(rng.uniform() * dataset_size));
  return idx;
}

inline int draw_timestep(int timesteps, Rng& rng) {
  return 1 + std::min(timesteps - 1, static_cast<int>(rng.uniform() * timesteps));
}

template <class Model>
class Trainer {
 public:
  Trainer(Model& model, TrainConfig cfg)
      : model_(model),
        cfg_(std::move(cfg)),
        opt_(make_adam_state(model.params())),
        ema_(make_ema_shadow(model.params())) {
    cfg_.validate();
  }

  const TrainConfig& cfg() const { return cfg_; }
  Model& model() { return model_; }
  long step() const { return step_; }
  double last_grad_norm() const { return last_grad_norm_; }
  const std::vector<std::vector<double>>& ema() const { return ema_; }
  const AdamState& opt_state() const { return opt_; }

  // One optimizer step on a batch of clean pairs. Per example, in order:
  // draw t uniform in [1, T], then the example's noise (and dropout) from
  // the same stream. Gradients are averaged over the batch, clipped at the
  // configured global norm, applied, and only then folded into the EMA.
  double train_step(const std::vector<const MediaPair*>& batch, Rng& rng) {
    if (batch.empty()) throw config_error("train_step: empty batch");
    LossConfig lc;
    lc.lambda_t = [lam = cfg_.loss_lambda](int) { return lam; };
    const int T = model_.schedule().T;
    std::vector<int> ts;
    ts.reserve(batch.size());
    model_.params().zero_grad();
    double loss_sum = 0;
    for (const MediaPair* p : batch) {
      const int t = draw_timestep(T, rng);
      ts.push_back(t);
      try {
        loss_sum += model_.loss_and_grad(*p, t, rng, lc);
      } catch (const runtime_fault& e) {
        throw runtime_fault(std::string(e.what()) + diagnostics(ts));
      }
    }
    const double loss = loss_sum / static_cast<double>(batch.size());
    scale_grads(model_.params(), 1.0 / static_cast<double>(batch.size()));
    last_grad_norm_ = clip_global_norm(model_.params(), cfg_.grad_clip);
    if (!std::isfinite(loss) || !std::isfinite(last_grad_norm_))
      throw runtime_fault("train step diverged (non-finite loss or gradient)" +
                          diagnostics(ts));
    AdamConfig ac;
    ac.lr = cfg_.lr;
    ac.weight_decay = cfg_.weight_decay;
    adam_step(model_.params(), opt_, ac);
    ema_update(ema_, model_.params(), cfg_.ema_decay);
    step_ += 1;
    return loss;
  }

  double train_step(const std::vector<MediaPair>& dataset,
                    const std::vector<int>& idx, Rng& rng) {
    std::vector<const MediaPair*> batch;
    batch.reserve(idx.size());
    for (int i : idx) {
      if (i < 0 || i >= static_cast<int>(dataset.size()))
        throw config_error("train_step: batch index out of range");
      batch.push_back(&dataset[i]);
    }
    return train_step(batch, rng);
  }

  void save(const std::string& path) const {
    save_checkpoint(path, model_.config(), model_.params(), ema_, step_);
  }

  // Restores parameters, EMA shadow, and step count; optimizer moments are
  // not part of the archive and restart from zero.
  void resume(const Checkpoint& ck) {
    restore_model(model_, ck, /*use_ema=*/false);
    if (ck.ema.size() != ema_.size())
      throw runtime_fault("checkpoint EMA does not match parameter store");
    ema_ = ck.ema;
    step_ = ck.step;
    opt_ = make_adam_state(model_.params());
  }

 private:
  std::string diagnostics(const std::vector<int>& ts) const {
    std::ostringstream os;
    os << "; t drawn = [";
    for (size_t i = 0; i < ts.size(); ++i) os << (i ? " " : "") << ts[i];
    os << "]; param norm = " << std::sqrt(param_sq_norm())
       << "; grad norm = " << std::sqrt(model_.params().grad_sq_norm());
    return os.str();
  }

  double param_sq_norm() const {
    double s = 0;
    for (int i = 0; i < model_.params().size(); ++i)
      for (double x : model_.params()[i].value) s += x * x;
    return s;
  }

  Model& model_;
  TrainConfig cfg_;
  AdamState opt_;
  std::vector<std::vector<double>> ema_;
  long step_ = 0;
  double last_grad_norm_ = 0;
};

// Swaps the EMA weights into the model for sampling; restores the training
// weights on destruction. Gradients never flow through the shadow.
template <class Model>
class EmaScope {
 public:
  EmaScope(Model& model, const std::vector<std::vector<double>>& ema)
      : model_(model), saved_(make_ema_shadow(model.params())) {
    load(ema);
  }
  ~EmaScope() { load(saved_); }
  EmaScope(const EmaScope&) = delete;
  EmaScope& operator=(const EmaScope&) = delete;

 private:
  void load(const std::vector<std::vector<double>>& src) {
    auto& store = model_.params();
    if (static_cast<int>(src.size()) != store.size())
      throw runtime_fault("EMA shadow does not match parameter store");
    for (int i = 0; i < store.size(); ++i) store[i].value = src[i];
  }

  Model& model_;
  std::vector<std::vector<double>> saved_;
};

// One log line per step: "step N loss L grad_norm G wall S".
inline std::string train_log_line(long step, double loss, double grad_norm,
                                  double wall_sec) {
  std::ostringstream os;
  os.precision(10);
  os << "step " << step << " loss " << loss << " grad_norm " << grad_norm
     << " wall " << wall_sec;
  return os.str();
}

// Runs `steps` optimizer steps; cb(step, loss, grad_norm, wall_sec) after
// each. Batch indices are drawn from the same stream as the step bodies.
template <class Model, class Cb>
void run_training(Trainer<Model>& tr, const std::vector<MediaPair>& dataset,
                  int steps, Rng& rng, Cb&& cb) {
  const auto start = std::chrono::steady_clock::now();
  for (int s = 0; s < steps; ++s) {
    auto idx = draw_batch_indices(static_cast<int>(dataset.size()),
                                  tr.cfg().batch_size, rng);
    double loss = tr.train_step(dataset, idx, rng);
    std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
    cb(tr.step(), loss, tr.last_grad_norm(), wall.count());
  }
}

}  // namespace mmdiff
