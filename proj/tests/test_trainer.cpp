#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "daaim/synthgen.hpp"
#include "daaim/trainer.hpp"
#include "test_util.hpp"

using namespace daaim;
using namespace daaim::testutil;

namespace {

Benchmark tiny_benchmark(uint64_t seed = 5) {
  BenchmarkConfig cfg;
  cfg.clips_per_domain = 16;
  cfg.height = 32;
  cfg.width = 32;
  cfg.frames = 4;
  cfg.instances_min = 1;
  cfg.instances_max = 3;
  cfg.instance_size_min = 13;
  cfg.instance_size_max = 18;
  cfg.shift_blotch_sigma = 0.0;  // keep the tiny fixture easy to fit
  cfg.shift_pattern_degrees = 0.0;
  cfg.tint_spread = 1.0;
  cfg.seed = seed;
  return gen_benchmark(cfg);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.hidden_dim = 16;
  cfg.pool_grid = 4;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("pseudo_label argmax semantics") {
  Rng rng(1);
  ModelParams teacher = ModelParams::init(4, 3, 8, 4, rng);
  std::fill(teacher.w1.begin(), teacher.w1.end(), 0.0);
  std::fill(teacher.w2.begin(), teacher.w2.end(), 0.0);

  Clip clip = Clip::make(3, 16, 16, 3);
  std::fill(clip.data.begin(), clip.data.end(), 100);

  // uniform teacher: ties break toward class 0, confidence 1/K
  auto out = pseudo_label(teacher, clip, {Box{2, 2, 10, 10}, Box{4, 4, 12, 12}});
  REQUIRE(out.size() == 2);
  for (const PseudoLabel& p : out) {
    CHECK(p.label == 0);
    CHECK(p.confidence == doctest::Approx(0.25));
  }

  // biased teacher follows its argmax, re-derived independently per box
  teacher.b2 = {0.0, 2.0, 0.5, 0.1};
  out = pseudo_label(teacher, clip, {Box{2, 2, 10, 10}});
  std::vector<double> probs = forward(teacher, extract_features(clip, Box{2, 2, 10, 10}, 4));
  int expect = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  CHECK(out[0].label == expect);
  CHECK(out[0].confidence == doctest::Approx(probs[expect]));

  CHECK(pseudo_label(teacher, clip, {}).empty());
}

TEST_CASE("compute_lambda") {
  CHECK(compute_lambda({0.95, 0.80, 0.99, 0.50}, 0.9) == doctest::Approx(0.5));
  CHECK(compute_lambda({}, 0.9) == 1.0);
  CHECK(compute_lambda({0.1, 0.2}, 0.0) == 1.0);
  CHECK_THROWS(compute_lambda({0.5}, 1.5));

  // monotone non-increasing in the threshold
  std::vector<double> confs = {0.1, 0.35, 0.5, 0.6, 0.77, 0.92};
  double prev = 2.0;
  for (double thr = 0.0; thr <= 1.0; thr += 0.05) {
    double lam = compute_lambda(confs, thr);
    CHECK(lam <= prev + 1e-12);
    CHECK(lam >= 0.0);
    CHECK(lam <= 1.0);
    prev = lam;
  }
}

TEST_CASE("lr_at schedule") {
  TrainConfig cfg;
  cfg.epochs = 10;
  long spe = 50;

  CHECK(lr_at(0, spe, cfg) == doctest::Approx(cfg.lr_base / 10.0));
  // first post-warm-up step is the base lr; the warm-up side approaches it
  CHECK(lr_at(50, spe, cfg) == doctest::Approx(cfg.lr_base));
  CHECK(lr_at(49, spe, cfg) == doctest::Approx(cfg.lr_base).epsilon(0.02));
  // last step reaches base * final_ratio
  CHECK(lr_at(499, spe, cfg) == doctest::Approx(cfg.lr_base * 0.01).epsilon(1e-9));
  // monotone decrease after warm-up
  double prev = 1e9;
  for (long s = 50; s < 500; ++s) {
    double lr = lr_at(s, spe, cfg);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
}

TEST_CASE("sgd_update") {
  Rng rng(3);
  TrainConfig cfg;
  ModelParams p = ModelParams::init(2, 3, 3, 2, rng);
  ModelParams g = p, v = p;
  std::fill(g.w1.begin(), g.w1.end(), 1.0);
  std::fill(g.b1.begin(), g.b1.end(), 1.0);
  std::fill(g.w2.begin(), g.w2.end(), 1.0);
  std::fill(g.b2.begin(), g.b2.end(), 1.0);
  std::fill(v.w1.begin(), v.w1.end(), 0.0);
  std::fill(v.b1.begin(), v.b1.end(), 0.0);
  std::fill(v.w2.begin(), v.w2.end(), 0.0);
  std::fill(v.b2.begin(), v.b2.end(), 0.0);

  SUBCASE("vanilla sgd") {
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.nesterov = false;
    ModelParams before = p;
    sgd_update(p, g, v, 0.1, cfg);
    CHECK(p.w1[0] == doctest::Approx(before.w1[0] - 0.1));
  }

  SUBCASE("zero grads leave params unchanged") {
    cfg.weight_decay = 0.0;
    ModelParams zero = g;
    std::fill(zero.w1.begin(), zero.w1.end(), 0.0);
    std::fill(zero.b1.begin(), zero.b1.end(), 0.0);
    std::fill(zero.w2.begin(), zero.w2.end(), 0.0);
    std::fill(zero.b2.begin(), zero.b2.end(), 0.0);
    ModelParams before = p;
    sgd_update(p, zero, v, 0.1, cfg);
    CHECK(p.w1 == before.w1);
  }

  SUBCASE("one nesterov step") {
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;
    cfg.nesterov = true;
    ModelParams before = p;
    sgd_update(p, g, v, 0.1, cfg);
    CHECK(p.w1[0] == doctest::Approx(before.w1[0] - 0.19));
  }

  SUBCASE("non-finite gradient aborts") {
    g.w1[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS(sgd_update(p, g, v, 0.1, cfg));
  }
}

TEST_CASE("train_step EMA timing and lambda gating") {
  Benchmark bench = tiny_benchmark();
  TrainConfig cfg = tiny_config();

  Rng root(cfg.seed);
  TrainState state;
  Rng init_rng = root.split("init");
  state.student = ModelParams::init(cfg.pool_grid, 3, cfg.hidden_dim, 6, init_rng);
  state.teacher = state.student;
  state.momentum_buffers = state.student;
  std::fill(state.momentum_buffers.w1.begin(), state.momentum_buffers.w1.end(), 0.0);
  std::fill(state.momentum_buffers.b1.begin(), state.momentum_buffers.b1.end(), 0.0);
  std::fill(state.momentum_buffers.w2.begin(), state.momentum_buffers.w2.end(), 0.0);
  std::fill(state.momentum_buffers.b2.begin(), state.momentum_buffers.b2.end(), 0.0);
  state.rng = root.split("steps");

  std::vector<const Sample*> sbatch, tbatch;
  for (int i = 0; i < 4; ++i) {
    sbatch.push_back(&bench.source.samples[i]);
    tbatch.push_back(&bench.target_train.samples[i]);
  }

  SUBCASE("teacher after the step is the EMA of student after the step") {
    ModelParams teacher_before = state.teacher;
    StepMetrics m = train_step(state, sbatch, tbatch, 4, cfg);
    CHECK(m.lr == doctest::Approx(lr_at(0, 4, cfg)));
    for (size_t i = 0; i < state.teacher.w1.size(); ++i)
      CHECK(state.teacher.w1[i] ==
            doctest::Approx(cfg.ema_alpha * teacher_before.w1[i] +
                            (1 - cfg.ema_alpha) * state.student.w1[i])
                .epsilon(1e-12));
    CHECK(state.step == 1);
  }

  SUBCASE("conf_threshold 1 leaves only the empty-list fallback lambdas") {
    // no softmax confidence reaches 1.0, so each clip weight is 0 unless the
    // clip kept no target boxes at all (empty list defaults to 1)
    TrainConfig strict = cfg;
    strict.conf_threshold = 1.0;
    StepMetrics m = train_step(state, sbatch, tbatch, 4, strict);
    REQUIRE_FALSE(state.lambda_history.empty());
    double lambda_sum = 0.0;
    for (double lam : state.lambda_history) {
      CHECK((lam == 0.0 || lam == 1.0));
      lambda_sum += lam;
    }
    CHECK(m.mean_lambda == doctest::Approx(lambda_sum / state.lambda_history.size()));
    CHECK(m.loss == doctest::Approx(m.loss_source + m.loss_mixed));
  }

  SUBCASE("all adaptation off matches source-only loss") {
    TrainConfig off = cfg;
    off.enable_mix = off.enable_pseudo = off.enable_resize = false;
    StepMetrics m = train_step(state, sbatch, tbatch, 4, off);
    CHECK(m.loss == doctest::Approx(m.loss_source).epsilon(1e-12));
    CHECK(m.kept_targets == 0);
  }

  SUBCASE("empty batch throws") {
    CHECK_THROWS(train_step(state, {}, tbatch, 4, cfg));
  }
}

TEST_CASE("train epochs=0 returns the initialization") {
  Benchmark bench = tiny_benchmark();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  TrainResult r = train(cfg, bench.source, std::nullopt, bench.target_train, std::nullopt);
  Rng root(cfg.seed);
  Rng init_rng = root.split("init");
  ModelParams expect = ModelParams::init(cfg.pool_grid, 3, cfg.hidden_dim, 6, init_rng);
  CHECK(r.student.w1 == expect.w1);
  CHECK(r.teacher.w1 == expect.w1);
  CHECK(r.metrics_lines.empty());
}

TEST_CASE("train is deterministic and lambda history stays in range") {
  Benchmark bench = tiny_benchmark();
  TrainConfig cfg = tiny_config();
  TrainResult a = train(cfg, bench.source, std::nullopt, bench.target_train, std::nullopt);
  TrainResult b = train(cfg, bench.source, std::nullopt, bench.target_train, std::nullopt);
  CHECK(a.student.w1 == b.student.w1);
  CHECK(a.teacher.w2 == b.teacher.w2);
  CHECK(a.metrics_lines == b.metrics_lines);
}

TEST_CASE("train rejects inconsistent inputs") {
  Benchmark bench = tiny_benchmark();
  TrainConfig cfg = tiny_config();

  DatasetIndex empty;
  empty.num_classes = 6;
  CHECK_THROWS(train(cfg, empty, std::nullopt, bench.target_train, std::nullopt));

  DatasetIndex wrong = bench.target_train;
  wrong.num_classes = 3;
  wrong.class_names.resize(3);
  CHECK_THROWS(train(cfg, bench.source, std::nullopt, wrong, std::nullopt));

  TrainConfig bad = cfg;
  bad.lr_base = -1;
  CHECK_THROWS(train(bad, bench.source, std::nullopt, bench.target_train, std::nullopt));
}

TEST_CASE("config file parsing") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "daaim_cfg_test.cfg";
  {
    std::ofstream f(path);
    f << "# comment\n";
    f << "lr_base = 0.02\n";
    f << "epochs=3\n";
    f << "enable_mix = false\n";
    f << "num_classes = 4\n";
    f << "seed = 99\n";
  }
  TrainConfig tc;
  BenchmarkConfig bc;
  load_config_file(path, tc, bc);
  CHECK(tc.lr_base == doctest::Approx(0.02));
  CHECK(tc.epochs == 3);
  CHECK_FALSE(tc.enable_mix);
  CHECK(bc.num_classes == 4);
  CHECK(tc.seed == 99);
  CHECK(bc.seed == 99);

  {
    std::ofstream f(path);
    f << "not_a_key = 1\n";
  }
  CHECK_THROWS(load_config_file(path, tc, bc));
  {
    std::ofstream f(path);
    f << "lr_base = banana\n";
  }
  CHECK_THROWS(load_config_file(path, tc, bc));
  fs::remove(path);
}

TEST_CASE("evaluate_dataset perfect model scores mAP 1") {
  Benchmark bench = tiny_benchmark();
  // oracle-ish: train directly on labeled val split, evaluate on itself
  TrainConfig cfg = tiny_config();
  cfg.epochs = 60;
  cfg.enable_mix = cfg.enable_pseudo = false;
  TrainResult r = train(cfg, bench.target_val, std::nullopt, bench.target_val, std::nullopt);
  EvalResult ev = evaluate_dataset(r.student, bench.target_val, 0.5);
  CHECK(ev.map > 0.9);
}
