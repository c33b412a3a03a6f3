#include "pinit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <utility>

#include "pinit/errors.hpp"
#include "pinit/io.hpp"
#include "pinit/rng.hpp"

namespace pinit::pipeline {

namespace {

nn::InitScheme scheme_with_seed(const std::string& name, uint64_t seed) {
  nn::InitScheme s;
  s.kind = nn::parse_scheme(name);
  s.seed = seed;
  return s;
}

// Number of parallel workers, from the PINIT_WORKERS environment variable.
size_t worker_count(size_t run_count) {
  const char* env = std::getenv("PINIT_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) {
    throw ConfigError("PINIT_WORKERS must be a positive integer, got \"" +
                      std::string(env) + "\"");
  }
  return std::min({static_cast<size_t>(v), run_count, size_t{64}});
}

}  // namespace

Checkpoint pretrain(const perlin::DatasetConfig& dataset_cfg,
                    const nn::NetworkSpec& spec,
                    const nn::TrainConfig& train_cfg, uint64_t init_seed,
                    const nn::EpochHook& hook) {
  return pretrain_on_dataset(perlin::build_dataset(dataset_cfg), spec,
                             train_cfg, init_seed, hook);
}

Checkpoint pretrain_on_dataset(const perlin::NoiseDataset& dataset,
                               const nn::NetworkSpec& spec,
                               const nn::TrainConfig& train_cfg,
                               uint64_t init_seed, const nn::EpochHook& hook) {
  perlin::validate(dataset.config);
  const int categories = dataset.config.categories();
  if (spec.num_classes() != categories) {
    throw ConfigError("network has " + std::to_string(spec.num_classes()) +
                      " classes but the noise dataset has " +
                      std::to_string(categories) + " categories");
  }
  nn::TrainingSet training = io::to_training_set(dataset);

  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.params = nn::init_params(spec, nn::InitScheme::he(init_seed));
  ckpt.init_scheme = "he";
  ckpt.history = nn::train(spec, ckpt.params, training, train_cfg, hook);
  ckpt.dataset_fingerprint = perlin::fingerprint(dataset.config);
  return ckpt;
}

nn::NetworkSpec with_num_classes(const nn::NetworkSpec& spec, int classes,
                                 int width, int height, int channels) {
  std::vector<nn::LayerSpec> layers = spec.layers();
  int last_dense = -1;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == nn::LayerSpec::Kind::Dense) {
      last_dense = static_cast<int>(i);
    }
  }
  if (last_dense < 0) {
    throw ConfigError("architecture has no dense head to resize");
  }
  layers[static_cast<size_t>(last_dense)].units = classes;
  for (auto& layer : layers) {
    if (layer.kind == nn::LayerSpec::Kind::SoftmaxXent) {
      layer.classes = classes;
    }
  }
  return nn::NetworkSpec::build(width, height, channels, std::move(layers));
}

nn::NetworkSpec with_num_classes(const nn::NetworkSpec& spec, int classes) {
  return with_num_classes(spec, classes, spec.input_width(),
                          spec.input_height(), spec.input_channels());
}

nn::ParamSet transfer_into(const Checkpoint& ckpt,
                           const nn::NetworkSpec& target, uint64_t head_seed) {
  const nn::NetworkSpec& src = ckpt.spec;
  if (src.layer_count() != target.layer_count()) {
    throw TransferError("checkpoint architecture has " +
                        std::to_string(src.layer_count()) +
                        " layers, target has " +
                        std::to_string(target.layer_count()));
  }
  if (ckpt.params.layers.size() != src.layer_count()) {
    throw TransferError("checkpoint parameters do not match its "
                        "architecture");
  }
  int final_dense = -1;
  for (size_t i = 0; i < target.layer_count(); ++i) {
    if (src.layers()[i].kind != target.layers()[i].kind) {
      throw TransferError(
          "layer " + std::to_string(i) + " is " +
          nn::kind_name(src.layers()[i].kind) + " in the checkpoint but " +
          nn::kind_name(target.layers()[i].kind) + " in the target");
    }
    if (target.layers()[i].kind == nn::LayerSpec::Kind::Dense) {
      final_dense = static_cast<int>(i);
    }
  }
  if (final_dense < 0) {
    throw TransferError("target network has no dense layer to "
                        "re-initialize");
  }

  // A full He draw at the target's shapes provides both the fresh head and
  // the authoritative shape of every layer.
  nn::ParamSet fresh =
      nn::init_params(target, nn::InitScheme::he(head_seed));
  nn::ParamSet out;
  out.layers.resize(target.layer_count());
  for (size_t i = 0; i < target.layer_count(); ++i) {
    if (!target.layer_has_params(i)) continue;
    if (static_cast<int>(i) == final_dense) {
      out.layers[i] = std::move(fresh.layers[i]);
      continue;
    }
    const nn::LayerParams& sp = ckpt.params.layers[i];
    if (!sp.weight.same_shape(fresh.layers[i].weight) ||
        !sp.bias.same_shape(fresh.layers[i].bias)) {
      throw TransferError("layer " + target.layer_name(i) +
                          ": checkpoint weights " +
                          shape_string(sp.weight.shape()) +
                          " do not fit the target, which wants " +
                          shape_string(fresh.layers[i].weight.shape()));
    }
    out.layers[i].weight = sp.weight;
    out.layers[i].bias = sp.bias;
    out.layers[i].init_tag = "pretrained";
  }
  return out;
}

TransferResult transfer(const Checkpoint& ckpt, int downstream_classes,
                        uint64_t head_seed) {
  TransferResult result;
  result.spec = with_num_classes(ckpt.spec, downstream_classes);
  result.params = transfer_into(ckpt, result.spec, head_seed);
  return result;
}

namespace {

struct RunKey {
  std::string scheme;
  uint64_t seed;
};

RunReport execute_run(const RunKey& key, const nn::NetworkSpec& arch,
                      const DownstreamData& data, const ComparisonPlan& plan,
                      const Checkpoint* perlin_ckpt) {
  nn::ParamSet params =
      key.scheme == "perlin"
          ? transfer_into(*perlin_ckpt, arch,
                          derive_seed(key.seed, kHeadDomain))
          : nn::init_params(arch, scheme_with_seed(
                                      key.scheme,
                                      derive_seed(key.seed, kInitDomain)));

  RunReport report;
  report.scheme = key.scheme;
  report.seed = key.seed;

  nn::EpochMetrics before = nn::evaluate(arch, params, data.test);
  report.epoch0_val_loss = before.loss;
  report.epoch0_val_accuracy = before.accuracy;

  nn::TrainConfig cfg = plan.train;
  cfg.shuffle_seed = derive_seed(key.seed, kShuffleDomain);
  nn::train(arch, params, data.train, cfg,
            [&](int epoch, const nn::ParamSet& p,
                const nn::EpochMetrics& train_metrics) {
              nn::EpochMetrics val = nn::evaluate(arch, p, data.test);
              report.history.push_back(
                  {epoch + 1, train_metrics.loss, val.accuracy});
            });
  report.final_test_accuracy = report.history.empty()
                                   ? before.accuracy
                                   : report.history.back().val_accuracy;
  return report;
}

}  // namespace

ComparisonReport run_comparison(const ComparisonPlan& plan,
                                const nn::NetworkSpec& arch,
                                const DownstreamData& data,
                                const Checkpoint* perlin_ckpt) {
  if (plan.schemes.empty()) {
    throw ConfigError("comparison plan lists no schemes");
  }
  if (plan.seeds.empty()) {
    throw ConfigError("comparison plan lists no seeds");
  }
  for (size_t i = 0; i < plan.schemes.size(); ++i) {
    const std::string& s = plan.schemes[i];
    if (s != "perlin") {
      nn::parse_scheme(s);  // throws ConfigError for unknown names
    } else if (perlin_ckpt == nullptr) {
      throw ConfigError("scheme \"perlin\" needs a pretraining checkpoint");
    }
    for (size_t j = i + 1; j < plan.schemes.size(); ++j) {
      if (plan.schemes[j] == s) {
        throw ConfigError("scheme \"" + s + "\" is listed twice");
      }
    }
  }
  for (size_t i = 0; i < plan.seeds.size(); ++i) {
    for (size_t j = i + 1; j < plan.seeds.size(); ++j) {
      if (plan.seeds[i] == plan.seeds[j]) {
        throw ConfigError("seed " + std::to_string(plan.seeds[i]) +
                          " is listed twice");
      }
    }
  }
  nn::validate(plan.train);
  if (data.num_classes != arch.num_classes()) {
    throw ConfigError("downstream data declares " +
                      std::to_string(data.num_classes) +
                      " classes but the architecture has " +
                      std::to_string(arch.num_classes()));
  }

  std::vector<RunKey> keys;
  keys.reserve(plan.schemes.size() * plan.seeds.size());
  for (const auto& scheme : plan.schemes) {
    for (uint64_t seed : plan.seeds) {
      keys.push_back({scheme, seed});
    }
  }
  std::sort(keys.begin(), keys.end(), [](const RunKey& a, const RunKey& b) {
    if (a.scheme != b.scheme) return a.scheme < b.scheme;
    return a.seed < b.seed;
  });

  ComparisonReport report;
  report.runs.resize(keys.size());
  const size_t workers = worker_count(keys.size());
  if (workers <= 1) {
    for (size_t i = 0; i < keys.size(); ++i) {
      report.runs[i] = execute_run(keys[i], arch, data, plan, perlin_ckpt);
    }
    return report;
  }

  // Runs are independent; hand out indices atomically and keep the first
  // failure, if any, to rethrow after all workers have stopped.
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= keys.size() || failed.load()) return;
        try {
          report.runs[i] =
              execute_run(keys[i], arch, data, plan, perlin_ckpt);
        } catch (...) {
          if (!failed.exchange(true)) {
            failure = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) {
    std::rethrow_exception(failure);
  }
  return report;
}

std::vector<Tensor> conv1_filter_planes(const nn::NetworkSpec& spec,
                                        const nn::ParamSet& params) {
  int first = -1;
  for (size_t i = 0; i < spec.layer_count(); ++i) {
    if (spec.layer_has_params(i)) {
      first = static_cast<int>(i);
      break;
    }
  }
  if (first < 0) {
    throw ConfigError("network has no parameterized layers");
  }
  if (spec.layers()[static_cast<size_t>(first)].kind !=
      nn::LayerSpec::Kind::Conv) {
    throw ConfigError("first parameterized layer is " +
                      spec.layer_name(static_cast<size_t>(first)) +
                      ", not a convolution");
  }
  if (params.layers.size() != spec.layer_count()) {
    throw ShapeError("parameter set does not match the network");
  }
  const Tensor& w = params.layers[static_cast<size_t>(first)].weight;
  const size_t oc = w.dim(0);
  const size_t ic = w.dim(1);
  const size_t k = w.dim(2);

  std::vector<Tensor> planes;
  planes.reserve(oc);
  for (size_t f = 0; f < oc; ++f) {
    Tensor plane({k, k});
    for (size_t ky = 0; ky < k; ++ky) {
      for (size_t kx = 0; kx < k; ++kx) {
        double sum = 0.0;
        for (size_t c = 0; c < ic; ++c) {
          sum += w.at(f, c, ky, kx);
        }
        plane.at(kx, ky) = sum / static_cast<double>(ic);
      }
    }
    const double lo = plane.min();
    const double hi = plane.max();
    if (hi == lo) {
      plane.fill(0.5);
    } else {
      for (size_t i = 0; i < plane.size(); ++i) {
        plane.data()[i] = (plane.data()[i] - lo) / (hi - lo);
      }
    }
    planes.push_back(std::move(plane));
  }
  return planes;
}

std::string curves_csv(const ComparisonReport& report) {
  std::string out = "scheme,seed,epoch,train_loss,val_accuracy\n";
  for (const auto& run : report.runs) {
    for (const auto& e : run.history) {
      out += run.scheme + "," + std::to_string(run.seed) + "," +
             std::to_string(e.epoch) + "," + io::format_double(e.train_loss) +
             "," + io::format_double(e.val_accuracy) + "\n";
    }
  }
  return out;
}

std::string results_csv(const ComparisonReport& report) {
  std::string out = "scheme,seed,final_test_accuracy,epoch0_val_accuracy\n";
  for (const auto& run : report.runs) {
    out += run.scheme + "," + std::to_string(run.seed) + "," +
           io::format_double(run.final_test_accuracy) + "," +
           io::format_double(run.epoch0_val_accuracy) + "\n";
  }
  return out;
}

}  // namespace pinit::pipeline
