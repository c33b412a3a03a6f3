#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pinit/tensor.hpp"

namespace pinit::nn {

// One layer of a feed-forward network. A plain tagged struct keeps the
// definition serializable and simple to match on; use the factory helpers
// rather than filling fields by hand.
struct LayerSpec {
  enum class Kind { Conv, Relu, MaxPool, Flatten, Dense, SoftmaxXent };

  Kind kind = Kind::Relu;
  int out_channels = 0;  // Conv
  int kernel = 0;        // Conv
  int stride = 1;        // Conv, MaxPool
  int pad = 0;           // Conv
  int size = 0;          // MaxPool window
  int units = 0;         // Dense
  int classes = 0;       // SoftmaxXent

  static LayerSpec conv(int out_channels, int kernel, int stride = 1,
                        int pad = 0);
  static LayerSpec relu();
  static LayerSpec maxpool(int size, int stride = 0);  // stride 0 -> size
  static LayerSpec flatten();
  static LayerSpec dense(int units);
  static LayerSpec softmax_xent(int classes);
};

const char* kind_name(LayerSpec::Kind kind);

// A validated architecture: input shape plus a chained layer list ending in
// exactly one loss layer. Construction computes every intermediate shape.
class NetworkSpec {
 public:
  // Input is a width x height x channels image batch. Throws ConfigError
  // when the layers do not chain or the loss layer is missing/misplaced.
  static NetworkSpec build(int width, int height, int channels,
                           std::vector<LayerSpec> layers);

  // Conv(16,3x3,pad 1) -> ReLU -> MaxPool(2) -> Conv(32,3x3,pad 1) -> ReLU
  // -> MaxPool(2) -> Flatten -> Dense(classes) -> SoftmaxXent(classes).
  static NetworkSpec minicnn(int width, int height, int channels,
                             int classes);

  int input_width() const { return width_; }
  int input_height() const { return height_; }
  int input_channels() const { return channels_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  size_t layer_count() const { return layers_.size(); }

  // Output shape of layer i, as a {W, H, C} or {D} dim list (per sample).
  const std::vector<size_t>& out_shape(size_t i) const {
    return out_shapes_[i];
  }
  // Stable name like "conv1", "pool2", "dense1"; unique per layer.
  const std::string& layer_name(size_t i) const { return names_[i]; }

  int num_classes() const;
  bool layer_has_params(size_t i) const;
  // fan_in/fan_out of a parameterized layer (receptive-field convention
  // for conv layers).
  size_t fan_in(size_t i) const;
  size_t fan_out(size_t i) const;

  // Content hash of the architecture; binds caches and checkpoints to the
  // spec that produced them.
  uint64_t digest() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<std::vector<size_t>> out_shapes_;
  std::vector<std::string> names_;
};

// Per-layer parameter pair plus the name of the scheme that produced it.
// Layers without parameters hold empty tensors and an empty tag.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  std::string init_tag;
};

struct ParamSet {
  std::vector<LayerParams> layers;
};

// Gradients and velocities are parameter-shaped.
using GradSet = ParamSet;

struct InitScheme {
  enum class Kind { He, Xavier, Sparse, Normal, Zero };

  Kind kind = Kind::He;
  uint64_t seed = 0;
  int sparse_k = 15;  // nonzeros per output unit under Sparse

  static InitScheme he(uint64_t seed);
  static InitScheme xavier(uint64_t seed);
  static InitScheme sparse(uint64_t seed, int k = 15);
  static InitScheme normal(uint64_t seed);
  static InitScheme zero(uint64_t seed);

  // "he", "xavier", "sparse", "normal", "zero".
  std::string name() const;
};

// Parses one of the scheme names above; throws ConfigError otherwise.
InitScheme::Kind parse_scheme(const std::string& name);

// Draws every weight tensor from the scheme (layer i uses
// substream(scheme.seed, i)); biases are always zero. Throws ConfigError
// when Sparse k is outside [1, fan_in].
ParamSet init_params(const NetworkSpec& spec, const InitScheme& scheme);

// Zero-filled parameter-shaped tensors (velocity buffers, grad accumulators).
GradSet zero_like(const NetworkSpec& spec);

// Activations and bookkeeping captured by forward() for backward().
struct ForwardCache {
  uint64_t spec_digest = 0;
  size_t batch = 0;
  // acts[0] is the input batch; acts[i + 1] is layer i's output. The loss
  // layer's "output" is the softmax probability matrix.
  std::vector<Tensor> acts;
  // Flat input index of each pooling winner, per max-pool layer position.
  std::vector<std::vector<size_t>> pool_argmax;
  std::vector<int> labels;
};

struct ForwardResult {
  double loss = 0.0;
  Tensor logits;  // {B, classes}
  ForwardCache cache;
};

// Runs the network on a {B, W, H, C} batch. labels.size() must equal B and
// each label must lie in [0, classes). Loss is the mean cross-entropy over
// the batch. Throws ShapeError on a mismatched batch, ConfigError on a bad
// label, NumericError (naming the layer) if any activation goes non-finite.
ForwardResult forward(const NetworkSpec& spec, const ParamSet& params,
                      const Tensor& batch, const std::vector<int>& labels);

// Gradients of the mean-batch loss with respect to every parameter.
// Throws ContractError when the cache did not come from a forward() over
// this spec.
GradSet backward(const NetworkSpec& spec, const ParamSet& params,
                 const ForwardCache& cache);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 20;
  std::vector<int> decay_epochs;  // 0-based epochs where lr steps down
  double decay_factor = 0.1;
  uint64_t shuffle_seed = 0;
};

// {epochs/2, 3*epochs/4}, dropping epoch 0 and duplicates.
std::vector<int> default_decay_epochs(int epochs);

// Learning rate in effect at a 0-based epoch (every passed decay epoch
// applies one factor).
double lr_at(const TrainConfig& cfg, int epoch);

// Throws ConfigError when a TrainConfig invariant is violated.
void validate(const TrainConfig& cfg);

// velocity <- momentum * velocity - lr(epoch) * grad; params += velocity.
void sgd_step(ParamSet& params, const GradSet& grads, GradSet& velocity,
              const TrainConfig& cfg, int epoch);

// A labeled image set ready for training: images {B, W, H, C}, labels
// 0-based in [0, classes).
struct TrainingSet {
  Tensor images;
  std::vector<int> labels;

  size_t count() const { return labels.size(); }
};

struct EpochMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Called after each epoch's parameter updates.
using EpochHook =
    std::function<void(int epoch, const ParamSet& params,
                       const EpochMetrics& train_metrics)>;

// Shuffled mini-batch SGD for cfg.epochs epochs. Metrics are running
// averages over the epoch's batches (loss) and samples (accuracy).
// Deterministic given (params, data, cfg). Throws ConfigError on an empty
// dataset or out-of-range labels.
std::vector<EpochMetrics> train(const NetworkSpec& spec, ParamSet& params,
                                const TrainingSet& data,
                                const TrainConfig& cfg,
                                const EpochHook& hook = {});

// Mean loss and accuracy of fixed params over a dataset, evaluated in
// batches in the given order. Argmax ties break to the lowest class index.
EpochMetrics evaluate(const NetworkSpec& spec, const ParamSet& params,
                      const TrainingSet& data, int batch_size = 64);

}  // namespace pinit::nn
