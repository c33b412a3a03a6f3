#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "perlin_oracle.hpp"
#include "pinit/errors.hpp"
#include "pinit/perlin.hpp"
#include "pinit/rng.hpp"

using namespace pinit;
using namespace pinit::perlin;

TEST_CASE("grid geometry and validation") {
  GridSpec g = make_grid(3, 2, 32, 16);
  CHECK(g.cells_x() == 8);
  CHECK(g.cells_y() == 4);
  CHECK(g.points_x() == 9);
  CHECK(g.points_y() == 5);
  CHECK(g.lattice_x(0) == 0.0);
  CHECK(g.lattice_x(8) == 32.0);
  CHECK(g.lattice_x(2) == doctest::Approx(8.0));
  CHECK(g.lattice_y(4) == 16.0);

  CHECK_THROWS_AS(make_grid(0, 1, 32, 32), ConfigError);
  CHECK_THROWS_AS(make_grid(1, 0, 32, 32), ConfigError);
  CHECK_THROWS_AS(make_grid(6, 1, 32, 32), ConfigError);  // 64 cells on 32 px
  CHECK_THROWS_AS(make_grid(1, 6, 32, 32), ConfigError);
  CHECK_THROWS_AS(make_grid(1, 1, 0, 32), ConfigError);
}

TEST_CASE("magnitude cap follows the larger canvas side") {
  CHECK(magnitude_cap_for(32, 32) == doctest::Approx(0.32));
  CHECK(magnitude_cap_for(224, 100) == doctest::Approx(2.24));
  CHECK(magnitude_cap_for(100, 224) == doctest::Approx(2.24));
}

TEST_CASE("gradient field is reproducible and respects the cap") {
  GridSpec g = make_grid(2, 2, 32, 32);
  GradientField a = sample_gradient_field(g, 99);
  GradientField b = sample_gradient_field(g, 99);
  CHECK(a.gx == b.gx);
  CHECK(a.gy == b.gy);
  CHECK(a.gx.size() == 25);
  for (size_t i = 0; i < a.gx.size(); ++i) {
    CHECK(std::hypot(a.gx[i], a.gy[i]) < a.magnitude_cap);
  }
  GradientField c = sample_gradient_field(g, 100);
  CHECK(a.gx != c.gx);
}

TEST_CASE("each lattice vector depends only on seed and point index") {
  GridSpec g = make_grid(3, 1, 64, 16);
  GradientField field = sample_gradient_field(g, 7);
  for (int q = 0; q < g.points_y(); ++q) {
    for (int p = 0; p < g.points_x(); ++p) {
      oracle::Vec2 expect = oracle::gradient_at(7, p, q, g.points_x(),
                                                field.magnitude_cap);
      CHECK(field.gx[field.point_index(p, q)] == expect.x);
      CHECK(field.gy[field.point_index(p, q)] == expect.y);
    }
  }
}

TEST_CASE("bilerp reproduces corners and known midpoints") {
  CHECK(bilerp(1.0, 2.0, 3.0, 4.0, 0.0, 0.0) == 1.0);
  CHECK(bilerp(1.0, 2.0, 3.0, 4.0, 1.0, 0.0) == 2.0);
  CHECK(bilerp(1.0, 2.0, 3.0, 4.0, 0.0, 1.0) == 3.0);
  CHECK(bilerp(1.0, 2.0, 3.0, 4.0, 1.0, 1.0) == 4.0);
  CHECK(bilerp(1.0, 2.0, 3.0, 4.0, 0.5, 0.5) == doctest::Approx(2.5));
  CHECK(bilerp(0.0, 0.0, 0.0, 0.0, 0.3, 0.7) == 0.0);
}

TEST_CASE("bilerp is affine along every edge") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    double d00 = rng.uniform(-1.0, 1.0);
    double d10 = rng.uniform(-1.0, 1.0);
    double d01 = rng.uniform(-1.0, 1.0);
    double d11 = rng.uniform(-1.0, 1.0);
    double t1 = rng.next_double();
    double t2 = rng.next_double();
    double t3 = rng.next_double();
    // Three points on a line are collinear iff the middle one matches the
    // chord through the outer two.
    auto collinear = [&](double a, double fa, double b, double fb, double c,
                         double fc) {
      if (std::fabs(a - c) < 1e-6) return;
      double chord = fa + (b - a) / (c - a) * (fc - fa);
      CHECK(fb == doctest::Approx(chord).epsilon(1e-12));
    };
    auto along_bottom = [&](double t) { return bilerp(d00, d10, d01, d11, t, 0.0); };
    auto along_top = [&](double t) { return bilerp(d00, d10, d01, d11, t, 1.0); };
    auto along_left = [&](double t) { return bilerp(d00, d10, d01, d11, 0.0, t); };
    auto along_right = [&](double t) { return bilerp(d00, d10, d01, d11, 1.0, t); };
    collinear(t1, along_bottom(t1), t2, along_bottom(t2), t3, along_bottom(t3));
    collinear(t1, along_top(t1), t2, along_top(t2), t3, along_top(t3));
    collinear(t1, along_left(t1), t2, along_left(t2), t3, along_left(t3));
    collinear(t1, along_right(t1), t2, along_right(t2), t3, along_right(t3));
  }
}

TEST_CASE("noise vanishes exactly at every lattice point") {
  GridSpec g = make_grid(2, 3, 32, 32);
  GradientField field = sample_gradient_field(g, 5);
  for (int q = 0; q <= g.cells_y(); ++q) {
    for (int p = 0; p <= g.cells_x(); ++p) {
      CHECK(eval_noise(field, double(p), double(q)) == 0.0);
    }
  }
}

TEST_CASE("noise along a lattice edge follows the two-corner closed form") {
  // Along a horizontal lattice line the interpolation collapses to
  // fu * (1 - fu) * (gx_left - gx_right); vertical lines are symmetric.
  Rng picks(43);
  for (int trial = 0; trial < 50; ++trial) {
    GridSpec g = make_grid(2, 2, 40, 40);
    GradientField field = sample_gradient_field(g, 1000 + trial);
    int j = int(picks.below(g.cells_y() + 1));
    int i0 = int(picks.below(g.cells_x()));
    double fu = picks.next_double();
    // Works on the top boundary row too: clamping lands on the same lattice
    // points with fv = 1, which collapses to the same two-corner form.
    double got = eval_noise(field, i0 + fu, double(j));
    double gxl = field.gx[field.point_index(i0, j)];
    double gxr = field.gx[field.point_index(i0 + 1, j)];
    double expect = fu * (1.0 - fu) * (gxl - gxr);
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));

    int i = int(picks.below(g.cells_x() + 1));
    int j0 = int(picks.below(g.cells_y()));
    double fv = picks.next_double();
    double got_v = eval_noise(field, double(i), j0 + fv);
    double gyt = field.gy[field.point_index(i, j0)];
    double gyb = field.gy[field.point_index(i, j0 + 1)];
    double expect_v = fv * (1.0 - fv) * (gyt - gyb);
    CHECK(got_v == doctest::Approx(expect_v).epsilon(1e-12));
  }
}

TEST_CASE("noise is continuous across interior cell boundaries") {
  GridSpec g = make_grid(3, 3, 64, 64);
  GradientField field = sample_gradient_field(g, 17);
  const double delta = 1e-9;
  for (int c = 1; c < g.cells_x(); ++c) {
    double lo = eval_noise(field, c - delta, 3.37);
    double hi = eval_noise(field, c + delta, 3.37);
    CHECK(std::fabs(hi - lo) < 1e-7);
  }
  for (int c = 1; c < g.cells_y(); ++c) {
    double lo = eval_noise(field, 2.61, c - delta);
    double hi = eval_noise(field, 2.61, c + delta);
    CHECK(std::fabs(hi - lo) < 1e-7);
  }
}

TEST_CASE("noise domain is closed and bounds are enforced") {
  GridSpec g = make_grid(2, 2, 20, 20);
  GradientField field = sample_gradient_field(g, 3);
  CHECK(eval_noise(field, 4.0, 4.0) == 0.0);  // far corner, clamped cell
  CHECK_THROWS_AS(eval_noise(field, -0.001, 1.0), DomainError);
  CHECK_THROWS_AS(eval_noise(field, 1.0, 4.001), DomainError);
  CHECK_THROWS_AS(eval_noise(field, std::nan(""), 1.0), DomainError);
}

TEST_CASE("rendered plane matches the brute-force oracle") {
  struct Config {
    int n, m, w, h;
  };
  const Config configs[] = {
      {1, 1, 8, 8}, {2, 3, 32, 32}, {3, 2, 48, 24}, {4, 1, 32, 16},
  };
  for (const Config& c : configs) {
    GridSpec g = make_grid(c.n, c.m, c.w, c.h);
    GradientField field = sample_gradient_field(g, 777);
    Tensor plane = render_noise(field);
    CHECK(plane.dim(0) == size_t(c.w));
    CHECK(plane.dim(1) == size_t(c.h));
    for (int y = 0; y < c.h; ++y) {
      for (int x = 0; x < c.w; ++x) {
        double expect =
            oracle::noise_at_pixel(777, c.n, c.m, c.w, c.h, x, y);
        CHECK(plane.at(size_t(x), size_t(y)) ==
              doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("normalize_plane maps onto the unit interval") {
  Tensor plane = Tensor::from_data({3, 1}, {-2.0, 0.0, 6.0});
  Tensor norm = normalize_plane(plane);
  CHECK(norm[0] == 0.0);
  CHECK(norm[1] == doctest::Approx(0.25));
  CHECK(norm[2] == 1.0);

  Tensor flat({4, 4}, 3.5);
  Tensor fnorm = normalize_plane(flat);
  for (size_t i = 0; i < fnorm.size(); ++i) {
    CHECK(fnorm[i] == 0.5);
  }
}

TEST_CASE("mean gradient energy on a hand-computed plane") {
  // Columns 0 and 1 hold 0 and 1: two x-steps of size 1, two y-steps of 0.
  Tensor plane({2, 2});
  plane.at(1, 0) = 1.0;
  plane.at(1, 1) = 1.0;
  CHECK(mean_gradient_energy(plane) == doctest::Approx(0.5));
  CHECK_THROWS_AS(mean_gradient_energy(Tensor({2, 2, 2})), ShapeError);
}

TEST_CASE("finer grids score higher complexity on average") {
  double coarse = 0.0;
  double fine = 0.0;
  for (uint64_t s = 0; s < 20; ++s) {
    GradientField c = sample_gradient_field(make_grid(1, 1, 32, 32), s);
    GradientField f = sample_gradient_field(make_grid(3, 3, 32, 32), s + 500);
    coarse += mean_gradient_energy(normalize_plane(render_noise(c)));
    fine += mean_gradient_energy(normalize_plane(render_noise(f)));
  }
  CHECK(fine > coarse);
}

TEST_CASE("label law matches the formula") {
  CHECK(noise_label(1, 1, 3) == 1);
  CHECK(noise_label(1, 3, 3) == 3);
  CHECK(noise_label(2, 1, 3) == 4);
  CHECK(noise_label(3, 3, 3) == 9);
  CHECK(noise_label(2, 2, 5) == 7);

  CHECK(label_to_params(1, 3) == std::pair<int, int>{1, 1});
  CHECK(label_to_params(4, 3) == std::pair<int, int>{2, 1});
  CHECK(label_to_params(9, 3) == std::pair<int, int>{3, 3});
}

TEST_CASE("label law round-trips") {
  const int N = 5, M = 5;
  for (int n = 1; n <= N; ++n) {
    for (int m = 1; m <= M; ++m) {
      auto [rn, rm] = label_to_params(noise_label(n, m, M), M);
      CHECK(rn == n);
      CHECK(rm == m);
    }
  }
}

TEST_CASE("label law rejects out-of-range arguments") {
  CHECK_THROWS_AS(noise_label(0, 1, 3), ConfigError);
  CHECK_THROWS_AS(noise_label(1, 0, 3), ConfigError);
  CHECK_THROWS_AS(noise_label(1, 4, 3), ConfigError);
  CHECK_THROWS_AS(noise_label(1, 1, 0), ConfigError);
  CHECK_THROWS_AS(label_to_params(0, 3), ConfigError);
  CHECK_THROWS_AS(label_to_params(1, 0), ConfigError);
}

TEST_CASE("dataset config validation") {
  DatasetConfig good;
  validate(good);

  DatasetConfig bad = good;
  bad.K = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = good;
  bad.N = 6;  // 2^6 = 64 cells on a 32-pixel canvas
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = good;
  bad.channels = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("fingerprint changes with any config field") {
  DatasetConfig base;
  base.master_seed = 1;
  const uint64_t fp = fingerprint(base);
  CHECK(fp == fingerprint(base));

  DatasetConfig other = base;
  other.K = base.K + 1;
  CHECK(fingerprint(other) != fp);
  other = base;
  other.master_seed = 2;
  CHECK(fingerprint(other) != fp);
  other = base;
  other.width = 64;
  other.height = 64;
  CHECK(fingerprint(other) != fp);
}

TEST_CASE("samples are pure functions of config and index") {
  DatasetConfig cfg;
  cfg.N = 2;
  cfg.M = 2;
  cfg.K = 3;
  cfg.width = 16;
  cfg.height = 16;
  cfg.master_seed = 31337;

  NoiseSample a = make_sample(cfg, 2, 1, 3);
  NoiseSample b = make_sample(cfg, 2, 1, 3);
  CHECK(a.values.values() == b.values.values());
  CHECK(a.label == 3);
  CHECK(a.seed == derive_seed(cfg.master_seed, (3 - 1) * cfg.K + 3));
  CHECK(a.values.min() >= 0.0);
  CHECK(a.values.max() <= 1.0);

  NoiseSample c = make_sample(cfg, 2, 1, 2);
  CHECK(a.values.values() != c.values.values());

  CHECK_THROWS_AS(make_sample(cfg, 3, 1, 1), ConfigError);
  CHECK_THROWS_AS(make_sample(cfg, 1, 1, 4), ConfigError);
  CHECK_THROWS_AS(make_sample(cfg, 1, 1, 0), ConfigError);
}

TEST_CASE("channel replication copies the grayscale plane") {
  DatasetConfig cfg;
  cfg.N = 1;
  cfg.M = 1;
  cfg.K = 1;
  cfg.width = 8;
  cfg.height = 8;
  cfg.channels = 3;
  NoiseSample s = make_sample(cfg, 1, 1, 1);
  CHECK(s.values.shape() == std::vector<size_t>{8, 8, 3});
  for (size_t y = 0; y < 8; ++y) {
    for (size_t x = 0; x < 8; ++x) {
      CHECK(s.values.at(x, y, 0) == s.values.at(x, y, 1));
      CHECK(s.values.at(x, y, 0) == s.values.at(x, y, 2));
    }
  }
}

TEST_CASE("dataset is category-major with K instances per label") {
  DatasetConfig cfg;
  cfg.N = 2;
  cfg.M = 2;
  cfg.K = 3;
  cfg.width = 8;
  cfg.height = 8;
  cfg.master_seed = 7;

  NoiseDataset ds = build_dataset(cfg);
  CHECK(ds.samples.size() == 12);
  std::vector<int> labels;
  for (const NoiseSample& s : ds.samples) labels.push_back(s.label);
  CHECK(labels == std::vector<int>{1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4});
  for (int i = 0; i < 12; ++i) {
    CHECK(ds.samples[i].k == i % 3 + 1);
    auto [n, m] = label_to_params(ds.samples[i].label, cfg.M);
    CHECK(ds.samples[i].n == n);
    CHECK(ds.samples[i].m == m);
  }
  // Two instances of one category must differ.
  CHECK(ds.samples[0].values.values() != ds.samples[1].values.values());

  NoiseDataset again = build_dataset(cfg);
  for (int i = 0; i < 12; ++i) {
    CHECK(ds.samples[i].values.values() == again.samples[i].values.values());
  }
}
