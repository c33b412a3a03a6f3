#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pinit/tensor.hpp"

namespace pinit::perlin {

// A 2^n x 2^m cell grid over a width x height pixel canvas. Lattice points
// sit at pixel coordinates (p * width / 2^n, q * height / 2^m).
struct GridSpec {
  int n = 1;
  int m = 1;
  int width = 0;
  int height = 0;

  int cells_x() const { return 1 << n; }
  int cells_y() const { return 1 << m; }
  int points_x() const { return cells_x() + 1; }
  int points_y() const { return cells_y() + 1; }
  double lattice_x(int p) const {
    return static_cast<double>(p) * width / cells_x();
  }
  double lattice_y(int q) const {
    return static_cast<double>(q) * height / cells_y();
  }
};

// Validates n, m >= 1 and that every cell spans at least one pixel
// (2^n <= width, 2^m <= height). Throws ConfigError otherwise.
GridSpec make_grid(int n, int m, int width, int height);

// Gradient magnitude cap: R = 0.01 * max(width, height).
double magnitude_cap_for(int width, int height);

// One random gradient vector per lattice point. Vector (p, q) is drawn from
// substream(seed, q * points_x + p), so the field is reproducible and
// independent of evaluation order: magnitude ~ U[0, R), angle ~ U[0, 2pi).
struct GradientField {
  GridSpec grid;
  double magnitude_cap = 0.0;
  uint64_t seed = 0;
  std::vector<double> gx;
  std::vector<double> gy;

  size_t point_index(int p, int q) const {
    return static_cast<size_t>(q) * grid.points_x() + p;
  }
};

GradientField sample_gradient_field(const GridSpec& grid, uint64_t seed);

// Plain bilinear interpolation of four corner values at fractional
// position (fu, fv) in the unit cell.
double bilerp(double d00, double d10, double d01, double d11, double fu,
              double fv);

// Noise value at continuous grid coordinates (u, v), u in [0, 2^n] and
// v in [0, 2^m]. The top/right boundary is clamped into the last cell
// (fractional part 1), so the function is total on the closed domain.
// Corner offsets are measured in cell-local unit-square coordinates.
// Throws DomainError outside the domain.
double eval_noise(const GradientField& field, double u, double v);

// Raw width x height noise plane. Pixel (x, y) samples the continuous
// point ((x + 0.5) * 2^n / width, (y + 0.5) * 2^m / height).
Tensor render_noise(const GradientField& field);

// Affine min-max map onto [0, 1]; a constant plane maps to all 0.5.
Tensor normalize_plane(const Tensor& plane);

// Mean absolute forward difference along x plus along y; the desk-scale
// complexity statistic (coarse noise scores low, fine noise high).
double mean_gradient_energy(const Tensor& plane);

// Category label y = (n - 1) * M + m, in {1, ..., N*M}.
// Throws ConfigError when m is outside [1, M] or n < 1.
int noise_label(int n, int m, int M);

// Inverse of noise_label: y -> (n, m) with n = ceil(y / M).
std::pair<int, int> label_to_params(int y, int M);

struct DatasetConfig {
  int N = 3;  // n ranges over 1..N
  int M = 3;  // m ranges over 1..M
  int K = 100;  // instances per category
  int width = 32;
  int height = 32;
  int channels = 1;
  uint64_t master_seed = 0;

  int categories() const { return N * M; }
  int total_samples() const { return N * M * K; }
};

// Throws ConfigError when hyperparameters or grid bounds are invalid.
void validate(const DatasetConfig& cfg);

// Stable content hash of the generation config (used as the checkpoint
// provenance fingerprint).
uint64_t fingerprint(const DatasetConfig& cfg);

// A rendered, normalized noise sample. values has shape
// {width, height, channels}; all channel planes are identical copies of
// the grayscale plane.
struct NoiseSample {
  Tensor values;
  int label = 0;
  int n = 0;
  int m = 0;
  int k = 0;  // 1-based instance index within the category
  uint64_t seed = 0;
};

struct NoiseDataset {
  DatasetConfig config;
  std::vector<NoiseSample> samples;  // category-major, K per category
};

// Sample k (1-based) of category (n, m): gradient field seeded with
// substream(master_seed, (y - 1) * K + k), rendered, min-max normalized,
// replicated across channels. A pure function of (cfg, n, m, k).
NoiseSample make_sample(const DatasetConfig& cfg, int n, int m, int k);

// All T = N*M*K samples in category-major order.
NoiseDataset build_dataset(const DatasetConfig& cfg);

}  // namespace pinit::perlin
