#pragma once

// Experiment pipeline: pretraining on procedural noise, feature transfer
// into a downstream task, and paired initialization comparisons with CSV
// reporting.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pinit/nn.hpp"
#include "pinit/perlin.hpp"

namespace pinit::pipeline {

// A trained network snapshot with enough context to reuse its features.
struct Checkpoint {
  nn::NetworkSpec spec;
  nn::ParamSet params;
  std::string init_scheme;                // how the weights started out
  std::vector<nn::EpochMetrics> history;  // per-epoch training metrics
  // Content hash of the noise generation config, when the checkpoint came
  // out of pretraining on generated data.
  std::optional<uint64_t> dataset_fingerprint;
};

// Seed domains. One experiment seed fans out into independent streams for
// weight initialization, head re-initialization, and data shuffling, so
// every scheme under a given seed sees exactly the same batch order.
inline constexpr uint64_t kInitDomain = 1;
inline constexpr uint64_t kHeadDomain = 2;
inline constexpr uint64_t kShuffleDomain = 3;

// Trains spec from a fresh He initialization (substreams of init_seed) on
// the categorized noise dataset. spec's class count must equal the
// dataset's category count. The returned checkpoint carries the dataset
// fingerprint. The hook, when given, fires after every epoch (progress
// reporting); it does not affect the result.
Checkpoint pretrain(const perlin::DatasetConfig& dataset_cfg,
                    const nn::NetworkSpec& spec,
                    const nn::TrainConfig& train_cfg, uint64_t init_seed = 0,
                    const nn::EpochHook& hook = {});

// Same, on an already materialized dataset (for example one read back from
// an archive).
Checkpoint pretrain_on_dataset(const perlin::NoiseDataset& dataset,
                               const nn::NetworkSpec& spec,
                               const nn::TrainConfig& train_cfg,
                               uint64_t init_seed = 0,
                               const nn::EpochHook& hook = {});

// Rebuilds an architecture with a new class count (and optionally new
// input geometry): the feature stack is kept, the final dense layer and
// the loss layer are resized.
nn::NetworkSpec with_num_classes(const nn::NetworkSpec& spec, int classes);
nn::NetworkSpec with_num_classes(const nn::NetworkSpec& spec, int classes,
                                 int width, int height, int channels);

// Copies every parameterized layer except the final dense layer bitwise
// from the checkpoint into parameters for `target`; the final dense layer
// always gets a fresh He draw from substream(head_seed, layer index), even
// when the class counts happen to agree. Throws TransferError when the
// layer stacks or copied shapes are incompatible.
nn::ParamSet transfer_into(const Checkpoint& ckpt,
                           const nn::NetworkSpec& target, uint64_t head_seed);

struct TransferResult {
  nn::NetworkSpec spec;
  nn::ParamSet params;
};

// Convenience form keeping the checkpoint's input geometry.
TransferResult transfer(const Checkpoint& ckpt, int downstream_classes,
                        uint64_t head_seed);

// A downstream task: train split, held-out split, class count. The held-out
// split doubles as the per-epoch validation set and the final test set.
struct DownstreamData {
  nn::TrainingSet train;
  nn::TrainingSet test;
  int num_classes = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based fine-tuning epoch
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

// One (scheme, seed) fine-tuning run.
struct RunReport {
  std::string scheme;
  uint64_t seed = 0;
  double epoch0_val_loss = 0.0;      // before any fine-tuning step
  double epoch0_val_accuracy = 0.0;  // ditto
  std::vector<EpochStats> history;
  double final_test_accuracy = 0.0;
};

struct ComparisonReport {
  std::vector<RunReport> runs;  // sorted by scheme name, then seed
};

// Initialization schemes to race: the five fresh schemes by name ("he",
// "xavier", "sparse", "normal", "zero") plus "perlin" for transfer from a
// pretraining checkpoint.
struct ComparisonPlan {
  std::vector<std::string> schemes = {"he", "perlin"};
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  nn::TrainConfig train;  // shuffle_seed is overridden per run
};

// Runs every (scheme, seed) pair of the plan on `data` with architecture
// `arch` (already built at the downstream geometry and class count). For a
// fixed seed all schemes share one shuffle stream, so they consume the
// batches in the same order; only the starting weights differ. "perlin"
// runs start from transfer_into(*perlin_ckpt, arch, ...) and require
// perlin_ckpt. Runs execute in parallel when the PINIT_WORKERS environment
// variable asks for more than one worker; the report is always assembled
// in deterministic order.
ComparisonReport run_comparison(const ComparisonPlan& plan,
                                const nn::NetworkSpec& arch,
                                const DownstreamData& data,
                                const Checkpoint* perlin_ckpt = nullptr);

// First-layer convolution filters as per-filter min-max normalized planes
// (a constant filter maps to mid-gray). Multi-channel inputs are averaged
// over input channels. Throws ConfigError when the first parameterized
// layer is not a convolution.
std::vector<Tensor> conv1_filter_planes(const nn::NetworkSpec& spec,
                                        const nn::ParamSet& params);

// Long-format learning curves: header scheme,seed,epoch,train_loss,
// val_accuracy, one row per run and fine-tuning epoch (epoch starts at 1).
std::string curves_csv(const ComparisonReport& report);

// One row per run: scheme,seed,final_test_accuracy,epoch0_val_accuracy.
std::string results_csv(const ComparisonReport& report);

}  // namespace pinit::pipeline
