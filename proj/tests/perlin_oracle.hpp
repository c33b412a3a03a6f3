#pragma once

// Brute-force reference for the noise renderer, kept deliberately separate
// from the library internals: gradients come straight from substream draws
// and the mixing uses the four-weights form of bilinear interpolation
// instead of nested lerps.

#include <cmath>
#include <cstdint>

#include "pinit/rng.hpp"

namespace oracle {

struct Vec2 {
  double x;
  double y;
};

inline Vec2 gradient_at(uint64_t seed, int p, int q, int points_x,
                        double cap) {
  pinit::Rng rng =
      pinit::Rng::substream(seed, static_cast<uint64_t>(q) * points_x + p);
  const double mag = rng.uniform(0.0, cap);
  const double ang = rng.uniform(0.0, 2.0 * M_PI);
  return {mag * std::cos(ang), mag * std::sin(ang)};
}

// Noise at pixel (x, y) of a width x height canvas under a 2^n x 2^m grid.
inline double noise_at_pixel(uint64_t seed, int n, int m, int width,
                             int height, int x, int y) {
  const int cx = 1 << n;
  const int cy = 1 << m;
  const int points_x = cx + 1;
  const double cap = 0.01 * std::max(width, height);

  const double u = (x + 0.5) * cx / width;
  const double v = (y + 0.5) * cy / height;

  int i0 = static_cast<int>(std::floor(u));
  int j0 = static_cast<int>(std::floor(v));
  if (i0 > cx - 1) i0 = cx - 1;
  if (j0 > cy - 1) j0 = cy - 1;
  const double fu = u - i0;
  const double fv = v - j0;

  const Vec2 g00 = gradient_at(seed, i0, j0, points_x, cap);
  const Vec2 g10 = gradient_at(seed, i0 + 1, j0, points_x, cap);
  const Vec2 g01 = gradient_at(seed, i0, j0 + 1, points_x, cap);
  const Vec2 g11 = gradient_at(seed, i0 + 1, j0 + 1, points_x, cap);

  const double d00 = g00.x * fu + g00.y * fv;
  const double d10 = g10.x * (fu - 1.0) + g10.y * fv;
  const double d01 = g01.x * fu + g01.y * (fv - 1.0);
  const double d11 = g11.x * (fu - 1.0) + g11.y * (fv - 1.0);

  const double w00 = (1.0 - fu) * (1.0 - fv);
  const double w10 = fu * (1.0 - fv);
  const double w01 = (1.0 - fu) * fv;
  const double w11 = fu * fv;
  return w00 * d00 + w10 * d10 + w01 * d01 + w11 * d11;
}

}  // namespace oracle
