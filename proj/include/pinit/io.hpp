#pragma once

// Dataset containers and on-disk formats: the binary noise-sample archive,
// IDX image/label loading, the synthetic shapes benchmark, PGM image grids,
// and small CSV helpers.
//
// Noise archive layout (version 1, all multi-byte fields little-endian):
//
//   offset  size  field
//   0       8     magic "PNDSET01"
//   8       2     u16 format version (= 1)
//   10      4     u32 N            (grid-exponent range for width)
//   14      4     u32 M            (grid-exponent range for height)
//   18      4     u32 K            (samples per category)
//   22      4     u32 width
//   26      4     u32 height
//   30      4     u32 channels
//   34      8     u64 master seed
//   42      4     u32 sample count (= N*M*K)
//   46      ...   sample records, each:
//                   u32 label, u32 n, u32 m, u32 k, u64 seed,
//                   width*height*channels f64 values (row-major {W,H,C})
//
// Doubles are stored as raw IEEE-754 bit patterns, so a write/read round
// trip is bit-exact.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pinit/nn.hpp"
#include "pinit/perlin.hpp"
#include "pinit/tensor.hpp"

namespace pinit::io {

// A labeled image collection with uniform geometry. Each image is a
// {width, height, channels} tensor with values in [0, 1]; labels are
// 0-based class indices.
struct LabeledImageSet {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<Tensor> images;
  std::vector<int> labels;

  size_t count() const { return images.size(); }
};

// Packs a set into the {B, W, H, C} batch layout used by the network.
nn::TrainingSet to_training_set(const LabeledImageSet& set);

// Noise samples carry 1-based category labels; they come out 0-based here.
nn::TrainingSet to_training_set(const perlin::NoiseDataset& dataset);

// Noise archive. Readers reject malformed input with a diagnostic that
// includes the byte offset of the problem.
std::vector<uint8_t> encode_noise_dataset(const perlin::NoiseDataset& dataset);
perlin::NoiseDataset decode_noise_dataset(const std::vector<uint8_t>& bytes,
                                          const std::string& source = "noise archive");
void write_noise_dataset(const perlin::NoiseDataset& dataset,
                         const std::string& path);
perlin::NoiseDataset read_noise_dataset(const std::string& path);

// IDX (big-endian) image/label files. Supports unsigned-byte (scaled to
// [0, 1]) and float32 payloads; images must be rank 3 {count, rows, cols},
// labels rank 1. Both files must agree on the record count.
LabeledImageSet load_idx(const std::string& images_path,
                         const std::string& labels_path);

// Synthetic shapes benchmark.
enum class ShapeClass { Disk, Square, Cross, Ring, Triangle };

const char* shape_name(ShapeClass c);
std::vector<ShapeClass> all_shape_classes();

struct ShapesTask {
  std::vector<ShapeClass> classes = all_shape_classes();
  int image_size = 32;
  int train_per_class = 50;
  int test_per_class = 100;
  double position_jitter = 3.0;  // max center offset, pixels
  double scale_jitter = 0.15;    // max relative size change
  double rotation_jitter = 0.4;  // max rotation, radians
  double noise_level = 0.1;      // additive Gaussian sigma
  uint64_t seed = 0;
};

// Builds {train, test}. Labels are positions in task.classes. Every
// sample is drawn from its own random substream keyed by (split, class,
// instance), so the two splits are disjoint and each is reproducible.
std::pair<LabeledImageSet, LabeledImageSet> make_shapes_dataset(
    const ShapesTask& task);

// Image grids. Lays rank-2 planes out row-major on a near-square grid,
// one pixel of black border between and around tiles; values are clamped
// to [0, 1] and quantized to 8-bit grayscale with round-half-up.
Tensor render_image_grid(const std::vector<Tensor>& planes);
std::vector<uint8_t> encode_pgm(const Tensor& plane);
void write_image_grid(const std::vector<Tensor>& planes,
                      const std::string& path);

// Text helpers used by the reporting paths. format_double keeps full
// precision (round-trips through strtod). parse_csv handles the plain
// comma/LF files this project writes; no quoting.
std::string format_double(double v);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace pinit::io
