// Synthetic shapes benchmark: five geometric classes rendered from signed
// distance functions with per-sample jitter and additive pixel noise.

#include <algorithm>
#include <cmath>
#include <string>

#include "pinit/errors.hpp"
#include "pinit/io.hpp"
#include "pinit/rng.hpp"

namespace pinit::io {

namespace {

struct Vec2 {
  double x;
  double y;
};

// Signed distance to an axis-aligned box with half-extents (hx, hy).
double sd_box(Vec2 p, double hx, double hy) {
  double qx = std::abs(p.x) - hx;
  double qy = std::abs(p.y) - hy;
  double ox = std::max(qx, 0.0);
  double oy = std::max(qy, 0.0);
  return std::hypot(ox, oy) + std::min(std::max(qx, qy), 0.0);
}

double sd_disk(Vec2 p, double r) { return std::hypot(p.x, p.y) - r; }

// Annulus with outer radius r and inner radius 0.55 r.
double sd_ring(Vec2 p, double r) {
  return std::abs(std::hypot(p.x, p.y) - 0.775 * r) - 0.225 * r;
}

// Union of a wide and a tall bar, both reaching radius r.
double sd_cross(Vec2 p, double r) {
  return std::min(sd_box(p, r, 0.35 * r), sd_box(p, 0.35 * r, r));
}

// Equilateral triangle with circumradius r, via the classic half-plane
// folding construction (fold into one sextant, measure against one edge).
double sd_triangle(Vec2 p, double r) {
  const double k = std::sqrt(3.0);
  const double s = r * k / 2.0;
  double x = std::abs(p.x) - s;
  double y = p.y + s / k;
  if (x + k * y > 0.0) {
    double nx = (x - k * y) / 2.0;
    double ny = (-k * x - y) / 2.0;
    x = nx;
    y = ny;
  }
  x -= std::clamp(x, -2.0 * s, 0.0);
  double len = std::hypot(x, y);
  return y > 0.0 ? -len : len;
}

double shape_distance(ShapeClass cls, Vec2 p, double r) {
  switch (cls) {
    case ShapeClass::Disk:
      return sd_disk(p, r);
    case ShapeClass::Square:
      return sd_box(p, 0.75 * r, 0.75 * r);
    case ShapeClass::Cross:
      return sd_cross(p, r);
    case ShapeClass::Ring:
      return sd_ring(p, r);
    case ShapeClass::Triangle:
      return sd_triangle(p, r);
  }
  throw ContractError("unhandled shape class");
}

// Maps a unit draw to [-1, 1]. Unlike Rng::uniform this accepts a zero
// half-width, so jitter settings of 0 are legal.
double signed_unit(Rng& rng) { return 2.0 * rng.next_double() - 1.0; }

Tensor render_shape(ShapeClass cls, const ShapesTask& task, Rng& rng) {
  const int size = task.image_size;
  const double dx = signed_unit(rng) * task.position_jitter;
  const double dy = signed_unit(rng) * task.position_jitter;
  const double ds = signed_unit(rng) * task.scale_jitter;
  const double dt = signed_unit(rng) * task.rotation_jitter;

  const double cx = size / 2.0 + dx;
  const double cy = size / 2.0 + dy;
  const double radius = 0.30 * size * (1.0 + ds);
  const double cos_t = std::cos(dt);
  const double sin_t = std::sin(dt);

  Tensor img({static_cast<size_t>(size), static_cast<size_t>(size), 1});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = (x + 0.5) - cx;
      const double py = (y + 0.5) - cy;
      // Rotate the pixel into the shape's frame.
      const Vec2 q{cos_t * px + sin_t * py, -sin_t * px + cos_t * py};
      const double d = shape_distance(cls, q, radius);
      // One-pixel antialiasing band around the zero level set.
      double v = std::clamp(0.5 - d, 0.0, 1.0);
      v += task.noise_level * rng.normal(0.0, 1.0);
      img.at(static_cast<size_t>(x), static_cast<size_t>(y), 0) =
          std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

void validate_task(const ShapesTask& task) {
  if (task.classes.empty()) {
    throw ConfigError("shapes task needs at least one class");
  }
  for (size_t i = 0; i < task.classes.size(); ++i) {
    for (size_t j = i + 1; j < task.classes.size(); ++j) {
      if (task.classes[i] == task.classes[j]) {
        throw ConfigError(std::string("shapes task lists class ") +
                          shape_name(task.classes[i]) + " twice");
      }
    }
  }
  if (task.image_size < 4) {
    throw ConfigError("shapes image size must be at least 4, got " +
                      std::to_string(task.image_size));
  }
  if (task.train_per_class < 1 || task.test_per_class < 1) {
    throw ConfigError("shapes task needs at least one sample per class "
                      "in each split");
  }
  if (task.position_jitter < 0.0 || task.scale_jitter < 0.0 ||
      task.rotation_jitter < 0.0 || task.noise_level < 0.0) {
    throw ConfigError("shapes jitter and noise settings must be >= 0");
  }
  if (task.scale_jitter >= 1.0) {
    throw ConfigError("shapes scale jitter must be below 1");
  }
}

LabeledImageSet build_split(const ShapesTask& task, uint64_t split_tag,
                            int per_class) {
  const uint64_t split_seed = derive_seed(task.seed, split_tag);
  LabeledImageSet set;
  set.width = task.image_size;
  set.height = task.image_size;
  set.channels = 1;
  for (size_t ci = 0; ci < task.classes.size(); ++ci) {
    for (int i = 0; i < per_class; ++i) {
      const uint64_t index =
          ci * static_cast<uint64_t>(per_class) + static_cast<uint64_t>(i);
      Rng rng = Rng::substream(split_seed, index);
      set.images.push_back(render_shape(task.classes[ci], task, rng));
      set.labels.push_back(static_cast<int>(ci));
    }
  }
  return set;
}

}  // namespace

const char* shape_name(ShapeClass c) {
  switch (c) {
    case ShapeClass::Disk:
      return "disk";
    case ShapeClass::Square:
      return "square";
    case ShapeClass::Cross:
      return "cross";
    case ShapeClass::Ring:
      return "ring";
    case ShapeClass::Triangle:
      return "triangle";
  }
  throw ContractError("unhandled shape class");
}

std::vector<ShapeClass> all_shape_classes() {
  return {ShapeClass::Disk, ShapeClass::Square, ShapeClass::Cross,
          ShapeClass::Ring, ShapeClass::Triangle};
}

std::pair<LabeledImageSet, LabeledImageSet> make_shapes_dataset(
    const ShapesTask& task) {
  validate_task(task);
  return {build_split(task, 0, task.train_per_class),
          build_split(task, 1, task.test_per_class)};
}

}  // namespace pinit::io
