#include "pinit/perlin.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "pinit/errors.hpp"
#include "pinit/rng.hpp"

namespace pinit::perlin {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

GridSpec make_grid(int n, int m, int width, int height) {
  if (n < 1 || m < 1) {
    throw ConfigError("grid exponents must be >= 1, got n=" +
                      std::to_string(n) + " m=" + std::to_string(m));
  }
  if (n >= 31 || m >= 31) {
    throw ConfigError("grid exponents must be < 31, got n=" +
                      std::to_string(n) + " m=" + std::to_string(m));
  }
  if (width < 1 || height < 1) {
    throw ConfigError("canvas must be at least 1x1, got " +
                      std::to_string(width) + "x" + std::to_string(height));
  }
  GridSpec grid{n, m, width, height};
  if (grid.cells_x() > width || grid.cells_y() > height) {
    throw ConfigError("grid " + std::to_string(grid.cells_x()) + "x" +
                      std::to_string(grid.cells_y()) +
                      " is finer than the canvas " + std::to_string(width) +
                      "x" + std::to_string(height));
  }
  return grid;
}

double magnitude_cap_for(int width, int height) {
  return 0.01 * std::max(width, height);
}

GradientField sample_gradient_field(const GridSpec& grid, uint64_t seed) {
  GradientField field;
  field.grid = grid;
  field.magnitude_cap = magnitude_cap_for(grid.width, grid.height);
  field.seed = seed;
  const size_t count =
      static_cast<size_t>(grid.points_x()) * grid.points_y();
  field.gx.resize(count);
  field.gy.resize(count);
  for (int q = 0; q < grid.points_y(); ++q) {
    for (int p = 0; p < grid.points_x(); ++p) {
      const size_t idx = field.point_index(p, q);
      Rng rng = Rng::substream(seed, idx);
      const double mag = rng.uniform(0.0, field.magnitude_cap);
      const double angle = rng.uniform(0.0, kTwoPi);
      field.gx[idx] = mag * std::cos(angle);
      field.gy[idx] = mag * std::sin(angle);
    }
  }
  return field;
}

double bilerp(double d00, double d10, double d01, double d11, double fu,
              double fv) {
  const double top = d00 + fu * (d10 - d00);
  const double bottom = d01 + fu * (d11 - d01);
  return top + fv * (bottom - top);
}

double eval_noise(const GradientField& field, double u, double v) {
  const GridSpec& grid = field.grid;
  const double cx = grid.cells_x();
  const double cy = grid.cells_y();
  if (!(u >= 0.0 && u <= cx) || !(v >= 0.0 && v <= cy)) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "noise point (%g, %g) outside grid domain [0,%g]x[0,%g]", u,
                  v, cx, cy);
    throw DomainError(buf);
  }
  // Clamp the top/right boundary into the last cell so the closed domain is
  // covered; there the fractional part comes out as exactly 1.
  int i0 = std::min(static_cast<int>(std::floor(u)), grid.cells_x() - 1);
  int j0 = std::min(static_cast<int>(std::floor(v)), grid.cells_y() - 1);
  const double fu = u - i0;
  const double fv = v - j0;

  const size_t i00 = field.point_index(i0, j0);
  const size_t i10 = field.point_index(i0 + 1, j0);
  const size_t i01 = field.point_index(i0, j0 + 1);
  const size_t i11 = field.point_index(i0 + 1, j0 + 1);

  // Dot product of each corner gradient with the offset from that corner to
  // the sample point, in cell-local unit-square coordinates.
  const double d00 = field.gx[i00] * fu + field.gy[i00] * fv;
  const double d10 = field.gx[i10] * (fu - 1.0) + field.gy[i10] * fv;
  const double d01 = field.gx[i01] * fu + field.gy[i01] * (fv - 1.0);
  const double d11 = field.gx[i11] * (fu - 1.0) + field.gy[i11] * (fv - 1.0);

  return bilerp(d00, d10, d01, d11, fu, fv);
}

Tensor render_noise(const GradientField& field) {
  const GridSpec& grid = field.grid;
  Tensor plane({static_cast<size_t>(grid.width),
                static_cast<size_t>(grid.height)});
  const double su = static_cast<double>(grid.cells_x()) / grid.width;
  const double sv = static_cast<double>(grid.cells_y()) / grid.height;
  for (int y = 0; y < grid.height; ++y) {
    const double v = (y + 0.5) * sv;
    for (int x = 0; x < grid.width; ++x) {
      const double u = (x + 0.5) * su;
      plane.at(static_cast<size_t>(x), static_cast<size_t>(y)) =
          eval_noise(field, u, v);
    }
  }
  return plane;
}

Tensor normalize_plane(const Tensor& plane) {
  if (plane.size() == 0) {
    throw ShapeError("cannot normalize an empty plane");
  }
  const double lo = plane.min();
  const double hi = plane.max();
  Tensor out(plane.shape());
  if (hi == lo) {
    out.fill(0.5);
    return out;
  }
  const double scale = 1.0 / (hi - lo);
  for (size_t i = 0; i < plane.size(); ++i) {
    out[i] = (plane[i] - lo) * scale;
  }
  return out;
}

double mean_gradient_energy(const Tensor& plane) {
  if (plane.rank() != 2) {
    throw ShapeError("mean_gradient_energy expects a rank-2 plane, got " +
                     shape_string(plane.shape()));
  }
  const size_t w = plane.dim(0);
  const size_t h = plane.dim(1);
  double total = 0.0;
  size_t terms = 0;
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x + 1 < w; ++x) {
      total += std::fabs(plane.at(x + 1, y) - plane.at(x, y));
      ++terms;
    }
  }
  for (size_t y = 0; y + 1 < h; ++y) {
    for (size_t x = 0; x < w; ++x) {
      total += std::fabs(plane.at(x, y + 1) - plane.at(x, y));
      ++terms;
    }
  }
  if (terms == 0) return 0.0;
  return total / static_cast<double>(terms);
}

int noise_label(int n, int m, int M) {
  if (M < 1) {
    throw ConfigError("M must be >= 1, got " + std::to_string(M));
  }
  if (n < 1) {
    throw ConfigError("n must be >= 1, got " + std::to_string(n));
  }
  if (m < 1 || m > M) {
    throw ConfigError("m=" + std::to_string(m) + " outside [1, " +
                      std::to_string(M) + "]");
  }
  return (n - 1) * M + m;
}

std::pair<int, int> label_to_params(int y, int M) {
  if (M < 1) {
    throw ConfigError("M must be >= 1, got " + std::to_string(M));
  }
  if (y < 1) {
    throw ConfigError("label must be >= 1, got " + std::to_string(y));
  }
  const int n = (y + M - 1) / M;
  const int m = y - (n - 1) * M;
  return {n, m};
}

void validate(const DatasetConfig& cfg) {
  if (cfg.N < 1 || cfg.M < 1) {
    throw ConfigError("N and M must be >= 1, got N=" + std::to_string(cfg.N) +
                      " M=" + std::to_string(cfg.M));
  }
  if (cfg.K < 1) {
    throw ConfigError("K must be >= 1, got " + std::to_string(cfg.K));
  }
  if (cfg.channels < 1) {
    throw ConfigError("channels must be >= 1, got " +
                      std::to_string(cfg.channels));
  }
  // The finest grid the dataset uses must still fit on the canvas.
  make_grid(cfg.N, cfg.M, cfg.width, cfg.height);
}

uint64_t fingerprint(const DatasetConfig& cfg) {
  // FNV-1a over the canonical little-endian field encoding.
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      h ^= (value >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<uint64_t>(cfg.N), 4);
  mix(static_cast<uint64_t>(cfg.M), 4);
  mix(static_cast<uint64_t>(cfg.K), 4);
  mix(static_cast<uint64_t>(cfg.width), 4);
  mix(static_cast<uint64_t>(cfg.height), 4);
  mix(static_cast<uint64_t>(cfg.channels), 4);
  mix(cfg.master_seed, 8);
  return h;
}

NoiseSample make_sample(const DatasetConfig& cfg, int n, int m, int k) {
  validate(cfg);
  if (n < 1 || n > cfg.N || m < 1 || m > cfg.M) {
    throw ConfigError("category (n=" + std::to_string(n) +
                      ", m=" + std::to_string(m) + ") outside [1," +
                      std::to_string(cfg.N) + "]x[1," + std::to_string(cfg.M) +
                      "]");
  }
  if (k < 1 || k > cfg.K) {
    throw ConfigError("instance index k=" + std::to_string(k) +
                      " outside [1, " + std::to_string(cfg.K) + "]");
  }
  NoiseSample sample;
  sample.n = n;
  sample.m = m;
  sample.k = k;
  sample.label = noise_label(n, m, cfg.M);
  const uint64_t stream =
      static_cast<uint64_t>(sample.label - 1) * cfg.K + k;
  sample.seed = derive_seed(cfg.master_seed, stream);

  const GridSpec grid = make_grid(n, m, cfg.width, cfg.height);
  const GradientField field = sample_gradient_field(grid, sample.seed);
  const Tensor plane = normalize_plane(render_noise(field));

  sample.values = Tensor({static_cast<size_t>(cfg.width),
                          static_cast<size_t>(cfg.height),
                          static_cast<size_t>(cfg.channels)});
  for (size_t y = 0; y < static_cast<size_t>(cfg.height); ++y) {
    for (size_t x = 0; x < static_cast<size_t>(cfg.width); ++x) {
      const double value = plane.at(x, y);
      for (size_t c = 0; c < static_cast<size_t>(cfg.channels); ++c) {
        sample.values.at(x, y, c) = value;
      }
    }
  }
  return sample;
}

NoiseDataset build_dataset(const DatasetConfig& cfg) {
  validate(cfg);
  NoiseDataset dataset;
  dataset.config = cfg;
  dataset.samples.reserve(static_cast<size_t>(cfg.total_samples()));
  for (int n = 1; n <= cfg.N; ++n) {
    for (int m = 1; m <= cfg.M; ++m) {
      for (int k = 1; k <= cfg.K; ++k) {
        dataset.samples.push_back(make_sample(cfg, n, m, k));
      }
    }
  }
  return dataset;
}

}  // namespace pinit::perlin
