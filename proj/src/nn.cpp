#include "pinit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <utility>

#include "pinit/errors.hpp"
#include "pinit/rng.hpp"

namespace pinit::nn {

namespace {

// C{M,N} += A{M,K} * B{K,N}
void gemm_nn(const double* a, const double* b, double* c, size_t m, size_t k,
             size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      const double av = a[i * k + kk];
      const double* brow = b + kk * n;
      for (size_t j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

// C{M,N} += A{M,K} * B^T, with B stored {N,K}
void gemm_nt(const double* a, const double* b, double* c, size_t m, size_t k,
             size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double sum = 0.0;
      for (size_t kk = 0; kk < k; ++kk) {
        sum += arow[kk] * brow[kk];
      }
      crow[j] += sum;
    }
  }
}

// C{M,N} += A^T * B, with A stored {K,M} and B stored {K,N}
void gemm_tn(const double* a, const double* b, double* c, size_t m, size_t k,
             size_t n) {
  for (size_t kk = 0; kk < k; ++kk) {
    const double* arow = a + kk * m;
    const double* brow = b + kk * n;
    for (size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (size_t j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

struct ConvDims {
  int w_in, h_in, c_in;
  int w_out, h_out, c_out;
  int kernel, stride, pad;
  size_t patch_rows() const {
    return static_cast<size_t>(c_in) * kernel * kernel;
  }
  size_t pixels() const { return static_cast<size_t>(w_out) * h_out; }
};

// Gathers sample b's padded conv patches into a patch_rows x pixels matrix.
// Row d = (c*kernel + ky)*kernel + kx matches the row-major layout of a
// {out_c, in_c, kernel, kernel} weight tensor; column p = y_out*w_out + x_out.
void im2col(const Tensor& batch, size_t b, const ConvDims& d,
            double* patches) {
  const size_t p_count = d.pixels();
  for (int c = 0; c < d.c_in; ++c) {
    for (int ky = 0; ky < d.kernel; ++ky) {
      for (int kx = 0; kx < d.kernel; ++kx) {
        const size_t row =
            (static_cast<size_t>(c) * d.kernel + ky) * d.kernel + kx;
        double* out = patches + row * p_count;
        for (int yo = 0; yo < d.h_out; ++yo) {
          const int yi = yo * d.stride - d.pad + ky;
          const bool y_ok = yi >= 0 && yi < d.h_in;
          for (int xo = 0; xo < d.w_out; ++xo) {
            const int xi = xo * d.stride - d.pad + kx;
            const size_t p = static_cast<size_t>(yo) * d.w_out + xo;
            out[p] = (y_ok && xi >= 0 && xi < d.w_in)
                         ? batch.at(b, static_cast<size_t>(xi),
                                    static_cast<size_t>(yi),
                                    static_cast<size_t>(c))
                         : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add of a patch-gradient matrix back onto sample b of dst.
void col2im_add(Tensor& dst, size_t b, const ConvDims& d,
                const double* patches) {
  const size_t p_count = d.pixels();
  for (int c = 0; c < d.c_in; ++c) {
    for (int ky = 0; ky < d.kernel; ++ky) {
      for (int kx = 0; kx < d.kernel; ++kx) {
        const size_t row =
            (static_cast<size_t>(c) * d.kernel + ky) * d.kernel + kx;
        const double* src = patches + row * p_count;
        for (int yo = 0; yo < d.h_out; ++yo) {
          const int yi = yo * d.stride - d.pad + ky;
          if (yi < 0 || yi >= d.h_in) continue;
          for (int xo = 0; xo < d.w_out; ++xo) {
            const int xi = xo * d.stride - d.pad + kx;
            if (xi < 0 || xi >= d.w_in) continue;
            const size_t p = static_cast<size_t>(yo) * d.w_out + xo;
            dst.at(b, static_cast<size_t>(xi), static_cast<size_t>(yi),
                   static_cast<size_t>(c)) += src[p];
          }
        }
      }
    }
  }
}

ConvDims conv_dims(const LayerSpec& layer, const std::vector<size_t>& in,
                   const std::vector<size_t>& out) {
  ConvDims d;
  d.w_in = static_cast<int>(in[0]);
  d.h_in = static_cast<int>(in[1]);
  d.c_in = static_cast<int>(in[2]);
  d.w_out = static_cast<int>(out[0]);
  d.h_out = static_cast<int>(out[1]);
  d.c_out = static_cast<int>(out[2]);
  d.kernel = layer.kernel;
  d.stride = layer.stride;
  d.pad = layer.pad;
  return d;
}

std::vector<size_t> with_batch(size_t b, const std::vector<size_t>& per) {
  std::vector<size_t> s;
  s.reserve(per.size() + 1);
  s.push_back(b);
  s.insert(s.end(), per.begin(), per.end());
  return s;
}

void check_finite(const Tensor& t, const NetworkSpec& spec, size_t layer) {
  for (size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw NumericError("non-finite activation after " +
                         spec.layer_name(layer) + " (layer " +
                         std::to_string(layer) + ")");
    }
  }
}

void check_params(const NetworkSpec& spec, const ParamSet& params) {
  if (params.layers.size() != spec.layer_count()) {
    throw ShapeError("param set has " + std::to_string(params.layers.size()) +
                     " layers, spec has " +
                     std::to_string(spec.layer_count()));
  }
  for (size_t i = 0; i < spec.layer_count(); ++i) {
    if (!spec.layer_has_params(i)) continue;
    const LayerParams& lp = params.layers[i];
    if (lp.weight.empty() || lp.bias.empty()) {
      throw ShapeError("missing parameters for " + spec.layer_name(i));
    }
  }
}

size_t argmax_row(const Tensor& logits, size_t row) {
  const size_t n = logits.dim(1);
  size_t best = 0;
  double best_v = logits.at(row, 0);
  for (size_t j = 1; j < n; ++j) {
    const double v = logits.at(row, j);
    if (v > best_v) {
      best_v = v;
      best = j;
    }
  }
  return best;
}

std::pair<Tensor, std::vector<int>> gather(const TrainingSet& data,
                                           const std::vector<size_t>& order,
                                           size_t from, size_t to) {
  const size_t sample = data.images.size() / data.images.dim(0);
  std::vector<size_t> shape = data.images.shape();
  shape[0] = to - from;
  Tensor images(shape);
  std::vector<int> labels(to - from);
  for (size_t i = from; i < to; ++i) {
    std::memcpy(images.data() + (i - from) * sample,
                data.images.data() + order[i] * sample,
                sample * sizeof(double));
    labels[i - from] = data.labels[order[i]];
  }
  return {std::move(images), std::move(labels)};
}

void check_training_set(const NetworkSpec& spec, const TrainingSet& data) {
  if (data.count() == 0) {
    throw ConfigError("training set is empty");
  }
  if (data.images.rank() != 4 || data.images.dim(0) != data.count()) {
    throw ShapeError("training images must be {count, W, H, C}; got " +
                     shape_string(data.images.shape()) + " for " +
                     std::to_string(data.count()) + " labels");
  }
  const int classes = spec.num_classes();
  for (size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < 0 || data.labels[i] >= classes) {
      throw ConfigError("label " + std::to_string(data.labels[i]) +
                        " at sample " + std::to_string(i) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
}

}  // namespace

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride, int pad) {
  LayerSpec l;
  l.kind = Kind::Conv;
  l.out_channels = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.kind = Kind::Relu;
  return l;
}

LayerSpec LayerSpec::maxpool(int size, int stride) {
  LayerSpec l;
  l.kind = Kind::MaxPool;
  l.size = size;
  l.stride = stride == 0 ? size : stride;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = Kind::Flatten;
  return l;
}

LayerSpec LayerSpec::dense(int units) {
  LayerSpec l;
  l.kind = Kind::Dense;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::softmax_xent(int classes) {
  LayerSpec l;
  l.kind = Kind::SoftmaxXent;
  l.classes = classes;
  return l;
}

const char* kind_name(LayerSpec::Kind kind) {
  switch (kind) {
    case LayerSpec::Kind::Conv: return "conv";
    case LayerSpec::Kind::Relu: return "relu";
    case LayerSpec::Kind::MaxPool: return "pool";
    case LayerSpec::Kind::Flatten: return "flatten";
    case LayerSpec::Kind::Dense: return "dense";
    case LayerSpec::Kind::SoftmaxXent: return "loss";
  }
  return "?";
}

NetworkSpec NetworkSpec::build(int width, int height, int channels,
                               std::vector<LayerSpec> layers) {
  if (width < 1 || height < 1 || channels < 1) {
    throw ConfigError("input shape must be positive, got " +
                      std::to_string(width) + "x" + std::to_string(height) +
                      "x" + std::to_string(channels));
  }
  if (layers.empty()) {
    throw ConfigError("network needs at least a loss layer");
  }
  for (size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].kind == LayerSpec::Kind::SoftmaxXent) {
      throw ConfigError("loss layer must be last (found at layer " +
                        std::to_string(i) + ")");
    }
  }
  if (layers.back().kind != LayerSpec::Kind::SoftmaxXent) {
    throw ConfigError("network must end in a softmax cross-entropy layer");
  }

  NetworkSpec spec;
  spec.width_ = width;
  spec.height_ = height;
  spec.channels_ = channels;
  spec.layers_ = std::move(layers);
  spec.out_shapes_.reserve(spec.layers_.size());
  spec.names_.reserve(spec.layers_.size());

  std::vector<size_t> cur = {static_cast<size_t>(width),
                             static_cast<size_t>(height),
                             static_cast<size_t>(channels)};
  int counters[6] = {0, 0, 0, 0, 0, 0};
  for (size_t i = 0; i < spec.layers_.size(); ++i) {
    const LayerSpec& l = spec.layers_[i];
    const std::string name =
        std::string(kind_name(l.kind)) +
        std::to_string(++counters[static_cast<int>(l.kind)]);
    auto fail = [&](const std::string& why) {
      throw ConfigError(name + " (layer " + std::to_string(i) + "): " + why +
                        "; input shape " + shape_string(cur));
    };
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        if (cur.size() != 3) fail("needs an image input");
        if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.pad < 0) {
          fail("invalid conv geometry");
        }
        const long wo =
            (static_cast<long>(cur[0]) + 2 * l.pad - l.kernel) / l.stride + 1;
        const long ho =
            (static_cast<long>(cur[1]) + 2 * l.pad - l.kernel) / l.stride + 1;
        if (static_cast<long>(cur[0]) + 2 * l.pad < l.kernel ||
            static_cast<long>(cur[1]) + 2 * l.pad < l.kernel || wo < 1 ||
            ho < 1) {
          fail("kernel does not fit the padded input");
        }
        cur = {static_cast<size_t>(wo), static_cast<size_t>(ho),
               static_cast<size_t>(l.out_channels)};
        break;
      }
      case LayerSpec::Kind::Relu:
        break;
      case LayerSpec::Kind::MaxPool: {
        if (cur.size() != 3) fail("needs an image input");
        if (l.size < 1 || l.stride < 1) fail("invalid pool geometry");
        if (static_cast<size_t>(l.size) > cur[0] ||
            static_cast<size_t>(l.size) > cur[1]) {
          fail("pool window larger than the input");
        }
        const size_t wo = (cur[0] - l.size) / l.stride + 1;
        const size_t ho = (cur[1] - l.size) / l.stride + 1;
        cur = {wo, ho, cur[2]};
        break;
      }
      case LayerSpec::Kind::Flatten: {
        if (cur.size() != 3) fail("needs an image input");
        cur = {cur[0] * cur[1] * cur[2]};
        break;
      }
      case LayerSpec::Kind::Dense: {
        if (cur.size() != 1) fail("needs a flattened input");
        if (l.units < 1) fail("invalid unit count");
        cur = {static_cast<size_t>(l.units)};
        break;
      }
      case LayerSpec::Kind::SoftmaxXent: {
        if (l.classes < 2) fail("needs at least 2 classes");
        if (cur.size() != 1 || cur[0] != static_cast<size_t>(l.classes)) {
          fail("expects " + std::to_string(l.classes) + " logits");
        }
        break;
      }
    }
    spec.out_shapes_.push_back(cur);
    spec.names_.push_back(name);
  }
  return spec;
}

NetworkSpec NetworkSpec::minicnn(int width, int height, int channels,
                                 int classes) {
  return build(width, height, channels,
               {LayerSpec::conv(16, 3, 1, 1), LayerSpec::relu(),
                LayerSpec::maxpool(2), LayerSpec::conv(32, 3, 1, 1),
                LayerSpec::relu(), LayerSpec::maxpool(2),
                LayerSpec::flatten(), LayerSpec::dense(classes),
                LayerSpec::softmax_xent(classes)});
}

int NetworkSpec::num_classes() const { return layers_.back().classes; }

bool NetworkSpec::layer_has_params(size_t i) const {
  const LayerSpec::Kind k = layers_[i].kind;
  return k == LayerSpec::Kind::Conv || k == LayerSpec::Kind::Dense;
}

size_t NetworkSpec::fan_in(size_t i) const {
  if (!layer_has_params(i)) {
    throw ContractError("fan_in of a parameterless layer " + names_[i]);
  }
  if (layers_[i].kind == LayerSpec::Kind::Conv) {
    const size_t in_c =
        i == 0 ? static_cast<size_t>(channels_) : out_shapes_[i - 1][2];
    return in_c * layers_[i].kernel * layers_[i].kernel;
  }
  // A dense layer always follows a flatten (the raw input is rank 3).
  return out_shapes_[i - 1][0];
}

size_t NetworkSpec::fan_out(size_t i) const {
  if (!layer_has_params(i)) {
    throw ContractError("fan_out of a parameterless layer " + names_[i]);
  }
  if (layers_[i].kind == LayerSpec::Kind::Conv) {
    return static_cast<size_t>(layers_[i].out_channels) * layers_[i].kernel *
           layers_[i].kernel;
  }
  return static_cast<size_t>(layers_[i].units);
}

uint64_t NetworkSpec::digest() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](uint64_t value) {
    for (int i = 0; i < 8; ++i) {
      h ^= (value >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<uint64_t>(width_));
  mix(static_cast<uint64_t>(height_));
  mix(static_cast<uint64_t>(channels_));
  for (const LayerSpec& l : layers_) {
    mix(static_cast<uint64_t>(l.kind));
    mix(static_cast<uint64_t>(l.out_channels));
    mix(static_cast<uint64_t>(l.kernel));
    mix(static_cast<uint64_t>(l.stride));
    mix(static_cast<uint64_t>(l.pad));
    mix(static_cast<uint64_t>(l.size));
    mix(static_cast<uint64_t>(l.units));
    mix(static_cast<uint64_t>(l.classes));
  }
  return h;
}

InitScheme InitScheme::he(uint64_t seed) { return {Kind::He, seed, 15}; }
InitScheme InitScheme::xavier(uint64_t seed) {
  return {Kind::Xavier, seed, 15};
}
InitScheme InitScheme::sparse(uint64_t seed, int k) {
  return {Kind::Sparse, seed, k};
}
InitScheme InitScheme::normal(uint64_t seed) {
  return {Kind::Normal, seed, 15};
}
InitScheme InitScheme::zero(uint64_t seed) { return {Kind::Zero, seed, 15}; }

std::string InitScheme::name() const {
  switch (kind) {
    case Kind::He: return "he";
    case Kind::Xavier: return "xavier";
    case Kind::Sparse: return "sparse";
    case Kind::Normal: return "normal";
    case Kind::Zero: return "zero";
  }
  return "?";
}

InitScheme::Kind parse_scheme(const std::string& name) {
  if (name == "he") return InitScheme::Kind::He;
  if (name == "xavier") return InitScheme::Kind::Xavier;
  if (name == "sparse") return InitScheme::Kind::Sparse;
  if (name == "normal") return InitScheme::Kind::Normal;
  if (name == "zero") return InitScheme::Kind::Zero;
  throw ConfigError("unknown init scheme \"" + name +
                    "\" (expected he, xavier, sparse, normal, or zero)");
}

ParamSet init_params(const NetworkSpec& spec, const InitScheme& scheme) {
  ParamSet params;
  params.layers.resize(spec.layer_count());
  for (size_t i = 0; i < spec.layer_count(); ++i) {
    if (!spec.layer_has_params(i)) continue;
    const LayerSpec& l = spec.layers()[i];
    const size_t fan_in = spec.fan_in(i);
    const size_t fan_out = spec.fan_out(i);

    std::vector<size_t> wshape;
    size_t out_units = 0;
    if (l.kind == LayerSpec::Kind::Conv) {
      const size_t in_c = fan_in / (l.kernel * l.kernel);
      out_units = static_cast<size_t>(l.out_channels);
      wshape = {out_units, in_c, static_cast<size_t>(l.kernel),
                static_cast<size_t>(l.kernel)};
    } else {
      out_units = static_cast<size_t>(l.units);
      wshape = {out_units, fan_in};
    }

    LayerParams& lp = params.layers[i];
    lp.weight = Tensor(wshape);
    lp.bias = Tensor({out_units});
    lp.init_tag = scheme.name();

    Rng rng = Rng::substream(scheme.seed, i);
    double* w = lp.weight.data();
    const size_t count = lp.weight.size();
    switch (scheme.kind) {
      case InitScheme::Kind::He: {
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (size_t j = 0; j < count; ++j) w[j] = rng.normal(0.0, stddev);
        break;
      }
      case InitScheme::Kind::Xavier: {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (size_t j = 0; j < count; ++j) w[j] = rng.uniform(-bound, bound);
        break;
      }
      case InitScheme::Kind::Sparse: {
        if (scheme.sparse_k < 1 ||
            static_cast<size_t>(scheme.sparse_k) > fan_in) {
          throw ConfigError("sparse init needs 1 <= k <= fan_in, got k=" +
                            std::to_string(scheme.sparse_k) + " with fan_in " +
                            std::to_string(fan_in) + " at " +
                            spec.layer_name(i));
        }
        const size_t k = static_cast<size_t>(scheme.sparse_k);
        std::vector<size_t> positions(fan_in);
        std::vector<size_t> chosen(k);
        for (size_t unit = 0; unit < out_units; ++unit) {
          std::iota(positions.begin(), positions.end(), size_t{0});
          for (size_t j = 0; j < k; ++j) {
            const size_t pick = j + rng.below(fan_in - j);
            std::swap(positions[j], positions[pick]);
            chosen[j] = positions[j];
          }
          std::sort(chosen.begin(), chosen.end());
          for (size_t j = 0; j < k; ++j) {
            w[unit * fan_in + chosen[j]] = rng.normal(0.0, 1.0);
          }
        }
        break;
      }
      case InitScheme::Kind::Normal: {
        for (size_t j = 0; j < count; ++j) w[j] = rng.normal(0.0, 1.0);
        break;
      }
      case InitScheme::Kind::Zero:
        break;
    }
  }
  return params;
}

GradSet zero_like(const NetworkSpec& spec) {
  GradSet grads;
  grads.layers.resize(spec.layer_count());
  for (size_t i = 0; i < spec.layer_count(); ++i) {
    if (!spec.layer_has_params(i)) continue;
    const LayerSpec& l = spec.layers()[i];
    if (l.kind == LayerSpec::Kind::Conv) {
      const size_t in_c = spec.fan_in(i) / (l.kernel * l.kernel);
      grads.layers[i].weight =
          Tensor({static_cast<size_t>(l.out_channels), in_c,
                  static_cast<size_t>(l.kernel),
                  static_cast<size_t>(l.kernel)});
      grads.layers[i].bias =
          Tensor({static_cast<size_t>(l.out_channels)});
    } else {
      grads.layers[i].weight =
          Tensor({static_cast<size_t>(l.units), spec.fan_in(i)});
      grads.layers[i].bias = Tensor({static_cast<size_t>(l.units)});
    }
  }
  return grads;
}

ForwardResult forward(const NetworkSpec& spec, const ParamSet& params,
                      const Tensor& batch, const std::vector<int>& labels) {
  check_params(spec, params);
  if (batch.rank() != 4 ||
      batch.dim(1) != static_cast<size_t>(spec.input_width()) ||
      batch.dim(2) != static_cast<size_t>(spec.input_height()) ||
      batch.dim(3) != static_cast<size_t>(spec.input_channels())) {
    throw ShapeError("batch shape " + shape_string(batch.shape()) +
                     " does not match network input " +
                     std::to_string(spec.input_width()) + "x" +
                     std::to_string(spec.input_height()) + "x" +
                     std::to_string(spec.input_channels()));
  }
  const size_t b_count = batch.dim(0);
  if (labels.size() != b_count) {
    throw ShapeError("batch has " + std::to_string(b_count) + " samples but " +
                     std::to_string(labels.size()) + " labels");
  }
  const int classes = spec.num_classes();
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " at sample " +
                        std::to_string(i) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.spec_digest = spec.digest();
  cache.batch = b_count;
  cache.labels = labels;
  cache.acts.reserve(spec.layer_count() + 1);
  cache.acts.push_back(batch);

  std::vector<double> patches;
  std::vector<double> mat;
  for (size_t li = 0; li < spec.layer_count(); ++li) {
    const LayerSpec& l = spec.layers()[li];
    const Tensor& in = cache.acts.back();
    Tensor out;
    if (l.kind != LayerSpec::Kind::Flatten) {
      out = Tensor(with_batch(b_count, spec.out_shape(li)));
    }
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        const ConvDims d = conv_dims(
            l, {in.dim(1), in.dim(2), in.dim(3)}, spec.out_shape(li));
        const size_t rows = d.patch_rows();
        const size_t pixels = d.pixels();
        patches.resize(rows * pixels);
        mat.resize(static_cast<size_t>(d.c_out) * pixels);
        const double* w = params.layers[li].weight.data();
        const double* bias = params.layers[li].bias.data();
        for (size_t b = 0; b < b_count; ++b) {
          im2col(in, b, d, patches.data());
          for (int o = 0; o < d.c_out; ++o) {
            std::fill(mat.begin() + o * pixels, mat.begin() + (o + 1) * pixels,
                      bias[o]);
          }
          gemm_nn(w, patches.data(), mat.data(),
                  static_cast<size_t>(d.c_out), rows, pixels);
          for (int o = 0; o < d.c_out; ++o) {
            const double* row = mat.data() + static_cast<size_t>(o) * pixels;
            for (int yo = 0; yo < d.h_out; ++yo) {
              for (int xo = 0; xo < d.w_out; ++xo) {
                out.at(b, static_cast<size_t>(xo), static_cast<size_t>(yo),
                       static_cast<size_t>(o)) =
                    row[static_cast<size_t>(yo) * d.w_out + xo];
              }
            }
          }
        }
        break;
      }
      case LayerSpec::Kind::Relu: {
        const double* src = in.data();
        double* dst = out.data();
        for (size_t j = 0; j < in.size(); ++j) {
          dst[j] = src[j] > 0.0 ? src[j] : 0.0;
        }
        break;
      }
      case LayerSpec::Kind::MaxPool: {
        const size_t wi = in.dim(1), hi = in.dim(2), ci = in.dim(3);
        const size_t wo = spec.out_shape(li)[0], ho = spec.out_shape(li)[1];
        std::vector<size_t> argmax(out.size());
        size_t flat = 0;
        for (size_t b = 0; b < b_count; ++b) {
          for (size_t xo = 0; xo < wo; ++xo) {
            for (size_t yo = 0; yo < ho; ++yo) {
              for (size_t c = 0; c < ci; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                size_t best_idx = 0;
                // Scan x then y so ties resolve to the lowest flat input
                // index; backward routes gradient to exactly that element.
                for (int dx = 0; dx < l.size; ++dx) {
                  const size_t xi = xo * l.stride + dx;
                  for (int dy = 0; dy < l.size; ++dy) {
                    const size_t yi = yo * l.stride + dy;
                    const size_t idx = ((b * wi + xi) * hi + yi) * ci + c;
                    const double v = in[idx];
                    if (v > best) {
                      best = v;
                      best_idx = idx;
                    }
                  }
                }
                out[flat] = best;
                argmax[flat] = best_idx;
                ++flat;
              }
            }
          }
        }
        cache.pool_argmax.push_back(std::move(argmax));
        break;
      }
      case LayerSpec::Kind::Flatten: {
        out = in.reshaped(with_batch(b_count, spec.out_shape(li)));
        break;
      }
      case LayerSpec::Kind::Dense: {
        const size_t din = in.dim(1);
        const size_t units = static_cast<size_t>(l.units);
        const double* w = params.layers[li].weight.data();
        const double* bias = params.layers[li].bias.data();
        double* o = out.data();
        for (size_t b = 0; b < b_count; ++b) {
          std::memcpy(o + b * units, bias, units * sizeof(double));
        }
        gemm_nt(in.data(), w, o, b_count, din, units);
        break;
      }
      case LayerSpec::Kind::SoftmaxXent: {
        const size_t n = static_cast<size_t>(l.classes);
        double total = 0.0;
        for (size_t b = 0; b < b_count; ++b) {
          const double* z = in.data() + b * n;
          double* p = out.data() + b * n;
          double mx = z[0];
          for (size_t j = 1; j < n; ++j) mx = std::max(mx, z[j]);
          double sum = 0.0;
          for (size_t j = 0; j < n; ++j) {
            p[j] = std::exp(z[j] - mx);
            sum += p[j];
          }
          for (size_t j = 0; j < n; ++j) p[j] /= sum;
          total += std::log(sum) - (z[labels[b]] - mx);
        }
        result.loss = total / static_cast<double>(b_count);
        if (!std::isfinite(result.loss)) {
          throw NumericError("non-finite loss at " + spec.layer_name(li) +
                             " (layer " + std::to_string(li) + ")");
        }
        result.logits = in;
        break;
      }
    }
    check_finite(out, spec, li);
    cache.acts.push_back(std::move(out));
  }
  return result;
}

GradSet backward(const NetworkSpec& spec, const ParamSet& params,
                 const ForwardCache& cache) {
  check_params(spec, params);
  if (cache.spec_digest != spec.digest()) {
    throw ContractError("forward cache was produced by a different network");
  }
  if (cache.acts.size() != spec.layer_count() + 1 ||
      cache.labels.size() != cache.batch) {
    throw ContractError("forward cache is incomplete");
  }

  const size_t b_count = cache.batch;
  GradSet grads = zero_like(spec);

  // Pool slot of each max-pool layer, in network order.
  std::vector<size_t> pool_slot(spec.layer_count(), 0);
  size_t pools = 0;
  for (size_t i = 0; i < spec.layer_count(); ++i) {
    if (spec.layers()[i].kind == LayerSpec::Kind::MaxPool) {
      pool_slot[i] = pools++;
    }
  }
  if (cache.pool_argmax.size() != pools) {
    throw ContractError("forward cache is incomplete");
  }

  const size_t last = spec.layer_count() - 1;
  const size_t classes = static_cast<size_t>(spec.num_classes());
  const Tensor& probs = cache.acts[last + 1];
  Tensor d({b_count, classes});
  const double inv_b = 1.0 / static_cast<double>(b_count);
  for (size_t b = 0; b < b_count; ++b) {
    for (size_t j = 0; j < classes; ++j) {
      const double onehot =
          j == static_cast<size_t>(cache.labels[b]) ? 1.0 : 0.0;
      d.at(b, j) = (probs.at(b, j) - onehot) * inv_b;
    }
  }

  std::vector<double> patches;
  std::vector<double> dmat;
  std::vector<double> dpatch;
  for (size_t li = last; li-- > 0;) {
    const LayerSpec& l = spec.layers()[li];
    const Tensor& in = cache.acts[li];
    Tensor din;
    if (l.kind != LayerSpec::Kind::Flatten) {
      din = Tensor(in.shape());
    }
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        const ConvDims dims = conv_dims(
            l, {in.dim(1), in.dim(2), in.dim(3)}, spec.out_shape(li));
        const size_t rows = dims.patch_rows();
        const size_t pixels = dims.pixels();
        patches.resize(rows * pixels);
        dmat.resize(static_cast<size_t>(dims.c_out) * pixels);
        dpatch.resize(rows * pixels);
        const double* w = params.layers[li].weight.data();
        double* dw = grads.layers[li].weight.data();
        double* db = grads.layers[li].bias.data();
        for (size_t b = 0; b < b_count; ++b) {
          im2col(in, b, dims, patches.data());
          for (int o = 0; o < dims.c_out; ++o) {
            double* row = dmat.data() + static_cast<size_t>(o) * pixels;
            double bias_sum = 0.0;
            for (int yo = 0; yo < dims.h_out; ++yo) {
              for (int xo = 0; xo < dims.w_out; ++xo) {
                const double g =
                    d.at(b, static_cast<size_t>(xo), static_cast<size_t>(yo),
                         static_cast<size_t>(o));
                row[static_cast<size_t>(yo) * dims.w_out + xo] = g;
                bias_sum += g;
              }
            }
            db[o] += bias_sum;
          }
          gemm_nt(dmat.data(), patches.data(), dw,
                  static_cast<size_t>(dims.c_out), pixels, rows);
          std::fill(dpatch.begin(), dpatch.end(), 0.0);
          gemm_tn(w, dmat.data(), dpatch.data(), rows,
                  static_cast<size_t>(dims.c_out), pixels);
          col2im_add(din, b, dims, dpatch.data());
        }
        break;
      }
      case LayerSpec::Kind::Relu: {
        const double* src = in.data();
        const double* dg = d.data();
        double* dst = din.data();
        for (size_t j = 0; j < in.size(); ++j) {
          dst[j] = src[j] > 0.0 ? dg[j] : 0.0;
        }
        break;
      }
      case LayerSpec::Kind::MaxPool: {
        const std::vector<size_t>& argmax = cache.pool_argmax[pool_slot[li]];
        const double* dg = d.data();
        double* dst = din.data();
        for (size_t j = 0; j < argmax.size(); ++j) {
          dst[argmax[j]] += dg[j];
        }
        break;
      }
      case LayerSpec::Kind::Flatten: {
        din = d.reshaped(in.shape());
        break;
      }
      case LayerSpec::Kind::Dense: {
        const size_t din_dim = in.dim(1);
        const size_t units = static_cast<size_t>(l.units);
        const double* w = params.layers[li].weight.data();
        double* dw = grads.layers[li].weight.data();
        double* db = grads.layers[li].bias.data();
        gemm_tn(d.data(), in.data(), dw, units, b_count, din_dim);
        for (size_t b = 0; b < b_count; ++b) {
          const double* drow = d.data() + b * units;
          for (size_t u = 0; u < units; ++u) db[u] += drow[u];
        }
        gemm_nn(d.data(), w, din.data(), b_count, units, din_dim);
        break;
      }
      case LayerSpec::Kind::SoftmaxXent:
        throw ContractError("loss layer cannot appear before the end");
    }
    d = std::move(din);
  }
  return grads;
}

std::vector<int> default_decay_epochs(int epochs) {
  std::vector<int> out;
  for (int e : {epochs / 2, 3 * epochs / 4}) {
    if (e >= 1 && (out.empty() || out.back() != e)) out.push_back(e);
  }
  return out;
}

double lr_at(const TrainConfig& cfg, int epoch) {
  double lr = cfg.learning_rate;
  for (int d : cfg.decay_epochs) {
    if (epoch >= d) lr *= cfg.decay_factor;
  }
  return lr;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ConfigError("momentum must be in [0, 1)");
  }
  if (cfg.batch_size < 1) {
    throw ConfigError("batch size must be >= 1");
  }
  if (cfg.epochs < 0) {
    throw ConfigError("epoch count must be >= 0");
  }
  if (!(cfg.decay_factor > 0.0)) {
    throw ConfigError("decay factor must be > 0");
  }
}

void sgd_step(ParamSet& params, const GradSet& grads, GradSet& velocity,
              const TrainConfig& cfg, int epoch) {
  if (params.layers.size() != grads.layers.size() ||
      params.layers.size() != velocity.layers.size()) {
    throw ShapeError("params, grads and velocity layer counts disagree");
  }
  const double lr = lr_at(cfg, epoch);
  for (size_t i = 0; i < params.layers.size(); ++i) {
    LayerParams& p = params.layers[i];
    const LayerParams& g = grads.layers[i];
    LayerParams& v = velocity.layers[i];
    if (p.weight.empty()) continue;
    if (!p.weight.same_shape(g.weight) || !p.weight.same_shape(v.weight) ||
        !p.bias.same_shape(g.bias) || !p.bias.same_shape(v.bias)) {
      throw ShapeError("params, grads and velocity shapes disagree at layer " +
                       std::to_string(i));
    }
    for (size_t j = 0; j < p.weight.size(); ++j) {
      v.weight[j] = cfg.momentum * v.weight[j] - lr * g.weight[j];
      p.weight[j] += v.weight[j];
    }
    for (size_t j = 0; j < p.bias.size(); ++j) {
      v.bias[j] = cfg.momentum * v.bias[j] - lr * g.bias[j];
      p.bias[j] += v.bias[j];
    }
  }
}

std::vector<EpochMetrics> train(const NetworkSpec& spec, ParamSet& params,
                                const TrainingSet& data,
                                const TrainConfig& cfg,
                                const EpochHook& hook) {
  validate(cfg);
  check_training_set(spec, data);
  check_params(spec, params);

  const size_t total = data.count();
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  GradSet velocity = zero_like(spec);
  std::vector<size_t> order(total);
  std::vector<EpochMetrics> history;
  history.reserve(static_cast<size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng = Rng::substream(cfg.shuffle_seed, static_cast<uint64_t>(epoch));
    shuffle(order, rng);

    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t from = 0; from < total; from += batch) {
      const size_t to = std::min(total, from + batch);
      auto [images, labels] = gather(data, order, from, to);
      ForwardResult fwd = forward(spec, params, images, labels);
      loss_sum += fwd.loss * static_cast<double>(to - from);
      for (size_t b = 0; b < labels.size(); ++b) {
        if (argmax_row(fwd.logits, b) == static_cast<size_t>(labels[b])) {
          ++correct;
        }
      }
      GradSet grads = backward(spec, params, fwd.cache);
      sgd_step(params, grads, velocity, cfg, epoch);
    }
    EpochMetrics metrics;
    metrics.loss = loss_sum / static_cast<double>(total);
    metrics.accuracy = static_cast<double>(correct) / total;
    history.push_back(metrics);
    if (hook) hook(epoch, params, metrics);
  }
  return history;
}

EpochMetrics evaluate(const NetworkSpec& spec, const ParamSet& params,
                      const TrainingSet& data, int batch_size) {
  if (batch_size < 1) {
    throw ConfigError("batch size must be >= 1");
  }
  check_training_set(spec, data);
  check_params(spec, params);

  const size_t total = data.count();
  std::vector<size_t> order(total);
  std::iota(order.begin(), order.end(), size_t{0});

  double loss_sum = 0.0;
  size_t correct = 0;
  for (size_t from = 0; from < total; from += batch_size) {
    const size_t to = std::min(total, from + static_cast<size_t>(batch_size));
    auto [images, labels] = gather(data, order, from, to);
    ForwardResult fwd = forward(spec, params, images, labels);
    loss_sum += fwd.loss * static_cast<double>(to - from);
    for (size_t b = 0; b < labels.size(); ++b) {
      if (argmax_row(fwd.logits, b) == static_cast<size_t>(labels[b])) {
        ++correct;
      }
    }
  }
  EpochMetrics metrics;
  metrics.loss = loss_sum / static_cast<double>(total);
  metrics.accuracy = static_cast<double>(correct) / total;
  return metrics;
}

}  // namespace pinit::nn
