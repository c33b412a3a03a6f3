#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "pinit/errors.hpp"
#include "pinit/nn.hpp"
#include "pinit/rng.hpp"
#include "pinit/tensor.hpp"

using namespace pinit;
using namespace pinit::nn;

namespace {

// Single scalar parameter wrapped in the ParamSet shape sgd_step expects.
ParamSet scalar_params(double w) {
  ParamSet p;
  p.layers.resize(1);
  p.layers[0].weight = Tensor({1}, w);
  p.layers[0].bias = Tensor({1}, 0.0);
  return p;
}

GradSet scalar_grads(double g) {
  GradSet gs = scalar_params(g);
  gs.layers[0].bias.fill(0.0);
  return gs;
}

// 20-point, 2-class, linearly separable toy set in two dimensions.
TrainingSet separable_toy() {
  TrainingSet data;
  data.images = Tensor({20, 2, 1, 1});
  Rng rng(2024);
  for (size_t i = 0; i < 20; ++i) {
    const int label = i < 10 ? 0 : 1;
    const double off = label == 0 ? -1.25 : 1.25;
    data.images.at(i, 0, 0, 0) = off + rng.uniform(-0.5, 0.5);
    data.images.at(i, 1, 0, 0) = off + rng.uniform(-0.5, 0.5);
    data.labels.push_back(label);
  }
  return data;
}

NetworkSpec toy_mlp() {
  return NetworkSpec::build(
      2, 1, 1,
      {LayerSpec::flatten(), LayerSpec::dense(8), LayerSpec::relu(),
       LayerSpec::dense(2), LayerSpec::softmax_xent(2)});
}

}  // namespace

TEST_CASE("plain sgd step on a scalar") {
  ParamSet p = scalar_params(1.0);
  GradSet g = scalar_grads(2.0);
  GradSet v = scalar_grads(0.0);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.0;
  sgd_step(p, g, v, cfg, 0);
  CHECK(p.layers[0].weight[0] == 0.8);
  CHECK(v.layers[0].weight[0] == -0.2);
}

TEST_CASE("zero gradients leave params still and decay velocity") {
  TrainConfig cfg;
  cfg.momentum = 0.9;

  ParamSet p = scalar_params(3.0);
  GradSet g = scalar_grads(0.0);
  GradSet v = scalar_grads(0.0);
  sgd_step(p, g, v, cfg, 0);
  CHECK(p.layers[0].weight[0] == 3.0);
  CHECK(v.layers[0].weight[0] == 0.0);

  GradSet rolling = scalar_grads(0.4);
  sgd_step(p, g, rolling, cfg, 0);
  CHECK(rolling.layers[0].weight[0] == doctest::Approx(0.36).epsilon(1e-15));
  CHECK(p.layers[0].weight[0] == doctest::Approx(3.36).epsilon(1e-15));
}

TEST_CASE("momentum sgd converges on the scalar quadratic") {
  // f(w) = w^2 with lr 0.1, momentum 0.9. The recurrence's spectral radius
  // is sqrt(momentum) per step independent of lr, so the envelope decays
  // like 0.9^(t/2): about 2.9e-3 at step 100 and 5.7e-9 at step 350.
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.9;

  ParamSet p = scalar_params(1.0);
  GradSet v = scalar_grads(0.0);
  double w_sim = 1.0;
  double v_sim = 0.0;
  for (int t = 1; t <= 350; ++t) {
    GradSet g = scalar_grads(2.0 * p.layers[0].weight[0]);
    sgd_step(p, g, v, cfg, 0);
    // Independent scalar recurrence, same update law.
    v_sim = cfg.momentum * v_sim - cfg.learning_rate * (2.0 * w_sim);
    w_sim += v_sim;
    CHECK(p.layers[0].weight[0] == w_sim);
    if (t == 100) {
      CHECK(std::fabs(p.layers[0].weight[0]) < 5e-3);
    }
  }
  CHECK(std::fabs(p.layers[0].weight[0]) < 1e-6);
}

TEST_CASE("sgd_step rejects mismatched shapes") {
  ParamSet p = scalar_params(1.0);
  GradSet g = scalar_grads(1.0);
  g.layers[0].weight = Tensor({2}, 1.0);
  GradSet v = scalar_grads(0.0);
  TrainConfig cfg;
  CHECK_THROWS_AS(sgd_step(p, g, v, cfg, 0), ShapeError);
}

TEST_CASE("decay schedule defaults and lr_at") {
  CHECK(default_decay_epochs(20) == std::vector<int>{10, 15});
  CHECK(default_decay_epochs(30) == std::vector<int>{15, 22});
  CHECK(default_decay_epochs(2) == std::vector<int>{1});
  CHECK(default_decay_epochs(1) == std::vector<int>{});

  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.decay_epochs = {10, 15};
  cfg.decay_factor = 0.1;
  CHECK(lr_at(cfg, 0) == doctest::Approx(0.01));
  CHECK(lr_at(cfg, 9) == doctest::Approx(0.01));
  CHECK(lr_at(cfg, 10) == doctest::Approx(0.001));
  CHECK(lr_at(cfg, 14) == doctest::Approx(0.001));
  CHECK(lr_at(cfg, 15) == doctest::Approx(0.0001));
  CHECK(lr_at(cfg, 19) == doctest::Approx(0.0001));
}

TEST_CASE("train config invariants") {
  TrainConfig good;
  validate(good);

  TrainConfig bad = good;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = good;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = good;
  bad.momentum = -0.1;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = good;
  bad.batch_size = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = good;
  bad.decay_factor = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("a small MLP overfits the separable toy set") {
  NetworkSpec spec = toy_mlp();
  ParamSet params = init_params(spec, InitScheme::he(5));
  TrainingSet data = separable_toy();
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.batch_size = 4;
  cfg.epochs = 50;
  cfg.shuffle_seed = 9;

  std::vector<EpochMetrics> history = train(spec, params, data, cfg);
  CHECK(history.size() == 50);
  EpochMetrics final = evaluate(spec, params, data);
  CHECK(final.accuracy == 1.0);
  CHECK(history.back().loss < history.front().loss);
}

TEST_CASE("training is bitwise deterministic") {
  NetworkSpec spec = toy_mlp();
  TrainingSet data = separable_toy();
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.shuffle_seed = 77;

  ParamSet a = init_params(spec, InitScheme::he(13));
  ParamSet b = init_params(spec, InitScheme::he(13));
  std::vector<EpochMetrics> ha = train(spec, a, data, cfg);
  std::vector<EpochMetrics> hb = train(spec, b, data, cfg);
  for (size_t li : {size_t(1), size_t(3)}) {
    CHECK(a.layers[li].weight.values() == b.layers[li].weight.values());
    CHECK(a.layers[li].bias.values() == b.layers[li].bias.values());
  }
  for (size_t e = 0; e < 5; ++e) {
    CHECK(ha[e].loss == hb[e].loss);
    CHECK(ha[e].accuracy == hb[e].accuracy);
  }

  // A different shuffle seed must actually change the trajectory.
  ParamSet c = init_params(spec, InitScheme::he(13));
  TrainConfig cfg2 = cfg;
  cfg2.shuffle_seed = 78;
  train(spec, c, data, cfg2);
  CHECK(a.layers[1].weight.values() != c.layers[1].weight.values());
}

TEST_CASE("train rejects bad datasets") {
  NetworkSpec spec = toy_mlp();
  ParamSet params = init_params(spec, InitScheme::he(1));
  TrainConfig cfg;
  cfg.epochs = 1;

  TrainingSet empty;
  CHECK_THROWS_AS(train(spec, params, empty, cfg), ConfigError);

  TrainingSet bad = separable_toy();
  bad.labels[3] = 2;  // only 2 classes
  CHECK_THROWS_AS(train(spec, params, bad, cfg), ConfigError);
}

TEST_CASE("the epoch hook sees every epoch in order") {
  NetworkSpec spec = toy_mlp();
  ParamSet params = init_params(spec, InitScheme::he(2));
  TrainingSet data = separable_toy();
  TrainConfig cfg;
  cfg.epochs = 4;

  std::vector<int> seen;
  train(spec, params, data, cfg,
        [&](int epoch, const ParamSet&, const EpochMetrics&) {
          seen.push_back(epoch);
        });
  CHECK(seen == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("evaluation is independent of sample order and batch size") {
  NetworkSpec spec = toy_mlp();
  ParamSet params = init_params(spec, InitScheme::he(3));
  TrainingSet data = separable_toy();

  EpochMetrics base = evaluate(spec, params, data, 64);
  EpochMetrics tiny = evaluate(spec, params, data, 3);
  CHECK(base.accuracy == tiny.accuracy);
  CHECK(base.loss == doctest::Approx(tiny.loss).epsilon(1e-12));

  // Reverse the samples.
  TrainingSet reversed;
  reversed.images = Tensor(data.images.shape());
  const size_t sample = data.images.size() / 20;
  for (size_t i = 0; i < 20; ++i) {
    for (size_t j = 0; j < sample; ++j) {
      reversed.images[(19 - i) * sample + j] = data.images[i * sample + j];
    }
    reversed.labels.insert(reversed.labels.begin(), data.labels[i]);
  }
  EpochMetrics rev = evaluate(spec, params, reversed, 7);
  CHECK(rev.accuracy == base.accuracy);
  CHECK(rev.loss == doctest::Approx(base.loss).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate(spec, params, data, 0), ConfigError);
}

TEST_CASE("zero epochs mean no work and no history") {
  NetworkSpec spec = toy_mlp();
  ParamSet params = init_params(spec, InitScheme::he(4));
  ParamSet before = params;
  TrainingSet data = separable_toy();
  TrainConfig cfg;
  cfg.epochs = 0;
  std::vector<EpochMetrics> history = train(spec, params, data, cfg);
  CHECK(history.empty());
  CHECK(params.layers[1].weight.values() == before.layers[1].weight.values());
}
