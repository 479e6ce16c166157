// Optimizer math, EMA shadow behavior, timestep uniformity, training-state
// checkpointing, and loss descent on a tiny dataset.
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "mmdiff/synth.hpp"
#include "mmdiff/trainer.hpp"
#include "mmdiff/unet.hpp"

using namespace mmdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DataConfig micro_ranges() {
  DataConfig dc;  // micro runs at sr=64: keep tones under Nyquist
  dc.tone_freq_min = 5.0;
  dc.tone_freq_max = 20.0;
  return dc;
}

std::vector<MediaPair> micro_data(int n, uint64_t seed) {
  Rng rng(seed);
  return make_dataset(n, ModelConfig::micro(), micro_ranges(), rng);
}

ParamStore<double> two_entry_store() {
  ParamStore<double> s;
  s.add("a", {1});
  s.add("b", {2});
  return s;
}

bool stores_equal(const ParamStore<double>& a, const ParamStore<double>& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (a[i].value != b[i].value) return false;
  return true;
}

std::filesystem::path fresh_path(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / "mmdiff_trainer_tests" / name;
  std::filesystem::create_directories(p.parent_path());
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("adam steps match the hand calculation", "[trainer]") {
  ParamStore<double> s;
  s.add("w", {1});
  s[0].value[0] = 1.0;
  AdamState st = make_adam_state(s);
  AdamConfig c;
  c.lr = 0.1;

  s[0].grad[0] = 2.0;
  adam_step(s, st, c);
  CHECK_THAT(s[0].value[0], WithinRel(0.9000000005, 1e-15));
  CHECK_THAT(st.m[0][0], WithinRel(0.19999999999999996, 1e-15));
  CHECK_THAT(st.v[0][0], WithinRel(0.0040000000000000036, 1e-15));
  CHECK(st.t == 1);

  s[0].grad[0] = -1.0;
  adam_step(s, st, c);
  CHECK_THAT(s[0].value[0], WithinRel(0.8733662967024315, 1e-14));

  // Decoupled weight decay shrinks theta before the adaptive step.
  ParamStore<double> s2;
  s2.add("w", {1});
  s2[0].value[0] = 1.0;
  s2[0].grad[0] = 2.0;
  AdamState st2 = make_adam_state(s2);
  AdamConfig c2;
  c2.lr = 0.1;
  c2.weight_decay = 0.5;
  adam_step(s2, st2, c2);
  CHECK_THAT(s2[0].value[0], WithinRel(0.8500000004999999, 1e-15));

  AdamState wrong;  // empty state against a non-empty store
  CHECK_THROWS_AS(adam_step(s, wrong, c), config_error);
}

TEST_CASE("global-norm clipping", "[trainer]") {
  ParamStore<double> s = two_entry_store();
  s[0].grad[0] = 3.0;
  s[1].grad[0] = 0.0;
  s[1].grad[1] = 4.0;  // norm 5
  CHECK_THAT(clip_global_norm(s, 10.0), WithinRel(5.0, 1e-12));
  CHECK(s[0].grad[0] == 3.0);  // below the bound: untouched

  CHECK_THAT(clip_global_norm(s, 1.0), WithinRel(5.0, 1e-12));
  CHECK_THAT(std::sqrt(s.grad_sq_norm()), WithinRel(1.0, 1e-12));
  CHECK_THAT(s[0].grad[0], WithinRel(0.6, 1e-12));

  s[0].grad[0] = 7.0;  // clipped grads left behind: 0, 0.8
  CHECK_THAT(clip_global_norm(s, 0.0), WithinRel(std::sqrt(49.0 + 0.64), 1e-12));
  CHECK(s[0].grad[0] == 7.0);  // 0 disables clipping
}

TEST_CASE("timestep draws are uniform on [1, T]", "[trainer]") {
  const int T = 1000, n = 200000, bins = 20;
  Rng rng(17);
  std::vector<int> hist(bins, 0);
  int lo = T, hi = 0;
  for (int i = 0; i < n; ++i) {
    int t = draw_timestep(T, rng);
    REQUIRE(t >= 1);
    REQUIRE(t <= T);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
    hist[(t - 1) * bins / T] += 1;
  }
  CHECK(lo == 1);
  CHECK(hi == T);
  const double expect = double(n) / bins;
  double chi2 = 0;
  for (int b = 0; b < bins; ++b)
    chi2 += (hist[b] - expect) * (hist[b] - expect) / expect;
  INFO("chi2 = " << chi2);
  CHECK(chi2 < 43.82);  // 0.999 quantile, 19 dof
}

TEST_CASE("lr=0 leaves parameters unchanged with finite loss", "[trainer]") {
  CoupledUnet<double> model(ModelConfig::micro(), 3);
  auto data = micro_data(4, 21);
  TrainConfig tc;
  tc.lr = 0.0;
  tc.batch_size = 2;
  Trainer<CoupledUnet<double>> tr(model, tc);
  auto before = make_ema_shadow(model.params());
  Rng rng(5);
  double loss = tr.train_step(data, {0, 1}, rng);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0);
  for (int i = 0; i < model.params().size(); ++i)
    REQUIRE(model.params()[i].value == before[i]);
  CHECK(tr.ema() == before);  // shadow of unchanged params stays put
  CHECK(tr.step() == 1);
}

TEST_CASE("ema_decay=0 makes the shadow equal the parameters", "[trainer]") {
  CoupledUnet<double> model(ModelConfig::micro(), 3);
  auto data = micro_data(4, 21);
  TrainConfig tc;
  tc.ema_decay = 0.0;
  tc.batch_size = 2;
  Trainer<CoupledUnet<double>> tr(model, tc);
  Rng rng(5);
  tr.train_step(data, {0, 1}, rng);
  for (int i = 0; i < model.params().size(); ++i)
    REQUIRE(tr.ema()[i] == model.params()[i].value);
}

TEST_CASE("train_step is deterministic and moves parameters", "[trainer]") {
  auto data = micro_data(6, 9);
  auto run = [&](uint64_t model_seed) {
    CoupledUnet<double> model(ModelConfig::micro(), model_seed);
    Trainer<CoupledUnet<double>> tr(model, TrainConfig{});
    Rng rng(71);
    std::vector<double> losses;
    run_training(tr, data, 3, rng, [&](long, double l, double g, double w) {
      losses.push_back(l);
      CHECK(g > 0);
      CHECK(w >= 0);
    });
    return std::pair{losses, make_ema_shadow(model.params())};
  };
  auto [la, pa] = run(13);
  auto [lb, pb] = run(13);
  REQUIRE(la == lb);
  REQUIRE(pa == pb);

  CoupledUnet<double> model(ModelConfig::micro(), 13);
  auto init = make_ema_shadow(model.params());
  CHECK(pa != init);  // three steps changed the weights

  Trainer<CoupledUnet<double>> tr(model, TrainConfig{});
  Rng rng(1);
  CHECK_THROWS_AS(tr.train_step(std::vector<const MediaPair*>{}, rng), config_error);
  CHECK_THROWS_AS(tr.train_step(data, {99}, rng), config_error);
}

TEST_CASE("clip bound applies to the stored gradients", "[trainer]") {
  CoupledUnet<double> model(ModelConfig::micro(), 3);
  auto data = micro_data(4, 21);
  TrainConfig tc;
  tc.grad_clip = 1e-3;
  tc.batch_size = 2;
  Trainer<CoupledUnet<double>> tr(model, tc);
  Rng rng(5);
  tr.train_step(data, {0, 1}, rng);
  CHECK(tr.last_grad_norm() > 1e-3);  // reported norm is pre-clip
  CHECK_THAT(std::sqrt(model.params().grad_sq_norm()), WithinRel(1e-3, 1e-9));
}

TEST_CASE("checkpoint resume restores training state", "[trainer]") {
  auto data = micro_data(6, 9);
  CoupledUnet<double> model(ModelConfig::micro(), 13);
  Trainer<CoupledUnet<double>> tr(model, TrainConfig{});
  Rng rng(33);
  run_training(tr, data, 3, rng, [](long, double, double, double) {});
  auto path = fresh_path("resume.ckpt");
  tr.save(path.string());

  CoupledUnet<double> fresh(ModelConfig::micro(), 99);
  Trainer<CoupledUnet<double>> tr2(fresh, TrainConfig{});
  REQUIRE(!stores_equal(fresh.params(), model.params()));
  tr2.resume(load_checkpoint(path));
  CHECK(tr2.step() == 3);
  REQUIRE(stores_equal(fresh.params(), model.params()));
  REQUIRE(tr2.ema() == tr.ema());

  // Step numbering continues from the restored count.
  Rng rng2(44);
  tr2.train_step(data, {0, 1, 2, 3, 4, 5, 0, 1}, rng2);
  CHECK(tr2.step() == 4);

  CoupledUnet<double> other(ModelConfig::desk(), 1);
  Trainer<CoupledUnet<double>> tr3(other, TrainConfig{});
  CHECK_THROWS_AS(tr3.resume(load_checkpoint(path)), config_error);
}

TEST_CASE("sampling from a reloaded EMA model reproduces output", "[trainer]") {
  auto data = micro_data(6, 9);
  CoupledUnet<double> model(ModelConfig::micro(), 13);
  Trainer<CoupledUnet<double>> tr(model, TrainConfig{});
  Rng rng(33);
  run_training(tr, data, 2, rng, [](long, double, double, double) {});
  REQUIRE(tr.ema() != make_ema_shadow(model.params()));  // shadow lags

  const ModelConfig& mc = model.config();
  MediaPair a;
  {
    EmaScope<CoupledUnet<double>> ema(model, tr.ema());
    Rng srng(555);
    a = sample_joint<double>(model, model.schedule(), srng, 10, mc.fps, mc.sample_rate);
  }
  // The scope restored the raw training weights on exit.
  REQUIRE(tr.ema() != make_ema_shadow(model.params()));

  auto path = fresh_path("ema.ckpt");
  tr.save(path.string());
  CoupledUnet<double> fresh(ModelConfig::micro(), 99);
  restore_model(fresh, load_checkpoint(path), /*use_ema=*/true);
  Rng srng(555);
  MediaPair b = sample_joint<double>(fresh, fresh.schedule(), srng, 10, mc.fps, mc.sample_rate);
  REQUIRE(a.video.v == b.video.v);
  REQUIRE(a.audio.v == b.audio.v);
}

TEST_CASE("training halves the smoothed loss on a tiny dataset", "[trainer][slow]") {
  auto data = micro_data(32, 11);
  CoupledUnet<double> model(ModelConfig::micro(), 7);
  Trainer<CoupledUnet<double>> tr(model, TrainConfig{});  // lr 2e-4, batch 8
  Rng rng(123);
  std::vector<double> losses;
  run_training(tr, data, 2000, rng, [&](long, double l, double, double) {
    losses.push_back(l);
  });
  auto window = [&](int lo, int hi) {  // mean of steps lo..hi, 1-based
    double s = 0;
    for (int i = lo; i <= hi; ++i) s += losses[i - 1];
    return s / (hi - lo + 1);
  };
  double early = window(51, 150), late = window(1901, 2000);
  INFO("smoothed@100 = " << early << " smoothed@2000 = " << late);
  CHECK(std::isfinite(late));
  CHECK(late < 0.5 * early);
  for (double l : losses) REQUIRE(std::isfinite(l));
}

TEST_CASE("log line carries step, loss, grad norm, and wall time", "[trainer]") {
  std::string line = train_log_line(42, 0.125, 1.5, 3.25);
  CHECK(line == "step 42 loss 0.125 grad_norm 1.5 wall 3.25");
}
