#include "pinit/checkpoint_io.hpp"

#include <utility>

#include "pinit/errors.hpp"
#include "bytes.hpp"

namespace pinit::io {

namespace {

constexpr char kCheckpointMagic[] = "PNCKPT01";
constexpr uint16_t kCheckpointVersion = 1;
constexpr int kKindCount = 6;  // Conv..SoftmaxXent

void write_string(detail::ByteWriter& w, const std::string& s) {
  w.u32le(static_cast<uint32_t>(s.size()));
  w.raw(s.data(), s.size());
}

std::string read_string(detail::ByteReader& r, size_t max_len = 4096) {
  const size_t len_off = r.offset();
  uint32_t len = r.u32le();
  if (len > max_len) {
    throw FormatError("string length " + std::to_string(len) +
                          " is implausibly large",
                      len_off);
  }
  std::string s(len, '\0');
  r.raw(s.data(), len);
  return s;
}

void write_tensor(detail::ByteWriter& w, const std::string& name,
                  const Tensor& t) {
  write_string(w, name);
  w.u8(static_cast<uint8_t>(t.rank()));
  for (size_t d = 0; d < t.rank(); ++d) {
    w.u32le(static_cast<uint32_t>(t.dim(d)));
  }
  for (size_t i = 0; i < t.size(); ++i) {
    w.f64le(t.data()[i]);
  }
}

Tensor read_tensor_body(detail::ByteReader& r) {
  const size_t rank_off = r.offset();
  int rank = r.u8();
  if (rank < 1 || rank > 4) {
    throw FormatError("tensor rank " + std::to_string(rank) +
                          " is outside 1..4",
                      rank_off);
  }
  std::vector<size_t> dims;
  size_t numel = 1;
  for (int d = 0; d < rank; ++d) {
    const size_t dim_off = r.offset();
    uint32_t extent = r.u32le();
    if (extent == 0) {
      throw FormatError("tensor dimension " + std::to_string(d) + " is zero",
                        dim_off);
    }
    if (numel > (size_t{1} << 32) / extent) {
      throw FormatError("tensor is implausibly large", dim_off);
    }
    numel *= extent;
    dims.push_back(extent);
  }
  Tensor t(dims);
  for (size_t i = 0; i < numel; ++i) {
    t.data()[i] = r.f64le();
  }
  return t;
}

}  // namespace

std::vector<uint8_t> encode_checkpoint(const pipeline::Checkpoint& ckpt) {
  const nn::NetworkSpec& spec = ckpt.spec;
  if (ckpt.params.layers.size() != spec.layer_count()) {
    throw ConfigError("checkpoint parameters do not match its architecture");
  }

  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 8);
  w.u16le(kCheckpointVersion);
  w.u64le(spec.digest());

  w.u32le(static_cast<uint32_t>(spec.input_width()));
  w.u32le(static_cast<uint32_t>(spec.input_height()));
  w.u32le(static_cast<uint32_t>(spec.input_channels()));
  w.u32le(static_cast<uint32_t>(spec.layer_count()));
  for (const auto& layer : spec.layers()) {
    w.u8(static_cast<uint8_t>(layer.kind));
    w.u32le(static_cast<uint32_t>(layer.out_channels));
    w.u32le(static_cast<uint32_t>(layer.kernel));
    w.u32le(static_cast<uint32_t>(layer.stride));
    w.u32le(static_cast<uint32_t>(layer.pad));
    w.u32le(static_cast<uint32_t>(layer.size));
    w.u32le(static_cast<uint32_t>(layer.units));
    w.u32le(static_cast<uint32_t>(layer.classes));
  }

  write_string(w, ckpt.init_scheme);
  w.u32le(static_cast<uint32_t>(ckpt.history.size()));
  for (const auto& epoch : ckpt.history) {
    w.f64le(epoch.loss);
    w.f64le(epoch.accuracy);
  }
  w.u8(ckpt.dataset_fingerprint.has_value() ? 1 : 0);
  w.u64le(ckpt.dataset_fingerprint.value_or(0));

  uint32_t tensor_count = 0;
  for (size_t i = 0; i < spec.layer_count(); ++i) {
    if (spec.layer_has_params(i)) tensor_count += 2;
  }
  w.u32le(tensor_count);
  for (size_t i = 0; i < spec.layer_count(); ++i) {
    if (!spec.layer_has_params(i)) continue;
    write_tensor(w, spec.layer_name(i) + ".weight",
                 ckpt.params.layers[i].weight);
    write_tensor(w, spec.layer_name(i) + ".bias", ckpt.params.layers[i].bias);
  }
  return w.data();
}

pipeline::Checkpoint decode_checkpoint(const std::vector<uint8_t>& bytes,
                                       const std::string& source) {
  detail::ByteReader r(bytes, source);
  r.expect_magic(kCheckpointMagic, 8);

  const size_t version_off = r.offset();
  uint16_t version = r.u16le();
  if (version != kCheckpointVersion) {
    throw VersionError(source + ": unsupported format version " +
                           std::to_string(version) + ", this build reads " +
                           std::to_string(kCheckpointVersion),
                       version_off);
  }

  const size_t digest_off = r.offset();
  uint64_t stored_digest = r.u64le();

  const size_t spec_off = r.offset();
  int width = static_cast<int>(r.u32le());
  int height = static_cast<int>(r.u32le());
  int channels = static_cast<int>(r.u32le());
  const size_t count_off = r.offset();
  uint32_t layer_count = r.u32le();
  if (layer_count == 0 || layer_count > 256) {
    throw FormatError(source + ": layer count " +
                          std::to_string(layer_count) + " is outside 1..256",
                      count_off);
  }
  std::vector<nn::LayerSpec> layers;
  layers.reserve(layer_count);
  for (uint32_t i = 0; i < layer_count; ++i) {
    const size_t kind_off = r.offset();
    uint8_t kind = r.u8();
    if (kind >= kKindCount) {
      throw FormatError(source + ": layer " + std::to_string(i) +
                            " has unknown kind " + std::to_string(kind),
                        kind_off);
    }
    nn::LayerSpec layer;
    layer.kind = static_cast<nn::LayerSpec::Kind>(kind);
    layer.out_channels = static_cast<int>(r.u32le());
    layer.kernel = static_cast<int>(r.u32le());
    layer.stride = static_cast<int>(r.u32le());
    layer.pad = static_cast<int>(r.u32le());
    layer.size = static_cast<int>(r.u32le());
    layer.units = static_cast<int>(r.u32le());
    layer.classes = static_cast<int>(r.u32le());
    layers.push_back(layer);
  }

  pipeline::Checkpoint ckpt;
  try {
    ckpt.spec = nn::NetworkSpec::build(width, height, channels,
                                       std::move(layers));
  } catch (const Error& e) {
    throw FormatError(source + ": invalid architecture: " + e.what(),
                      spec_off);
  }
  if (ckpt.spec.digest() != stored_digest) {
    throw FormatError(source + ": architecture digest mismatch (stored vs "
                               "recomputed)",
                      digest_off);
  }

  ckpt.init_scheme = read_string(r, 64);
  const size_t history_off = r.offset();
  uint32_t epochs = r.u32le();
  if (epochs > 1000000) {
    throw FormatError(source + ": epoch count " + std::to_string(epochs) +
                          " is implausibly large",
                      history_off);
  }
  ckpt.history.reserve(epochs);
  for (uint32_t i = 0; i < epochs; ++i) {
    nn::EpochMetrics m;
    m.loss = r.f64le();
    m.accuracy = r.f64le();
    ckpt.history.push_back(m);
  }
  const size_t flag_off = r.offset();
  uint8_t has_fp = r.u8();
  if (has_fp > 1) {
    throw FormatError(source + ": fingerprint flag must be 0 or 1, got " +
                          std::to_string(has_fp),
                      flag_off);
  }
  uint64_t fp = r.u64le();
  if (has_fp == 1) {
    ckpt.dataset_fingerprint = fp;
  }

  // Parameters, matched to the architecture by layer name.
  const size_t tcount_off = r.offset();
  uint32_t tensor_count = r.u32le();
  uint32_t expected = 0;
  for (size_t i = 0; i < ckpt.spec.layer_count(); ++i) {
    if (ckpt.spec.layer_has_params(i)) expected += 2;
  }
  if (tensor_count != expected) {
    throw FormatError(source + ": " + std::to_string(tensor_count) +
                          " parameter tensors, architecture wants " +
                          std::to_string(expected),
                      tcount_off);
  }
  ckpt.params.layers.resize(ckpt.spec.layer_count());
  for (size_t i = 0; i < ckpt.spec.layer_count(); ++i) {
    if (!ckpt.spec.layer_has_params(i)) continue;
    for (int part = 0; part < 2; ++part) {
      const size_t name_off = r.offset();
      std::string name = read_string(r, 256);
      std::string want = ckpt.spec.layer_name(i) +
                         (part == 0 ? ".weight" : ".bias");
      if (name != want) {
        throw FormatError(source + ": tensor \"" + name + "\", expected \"" +
                              want + "\"",
                          name_off);
      }
      Tensor t = read_tensor_body(r);
      Tensor& slot = part == 0 ? ckpt.params.layers[i].weight
                               : ckpt.params.layers[i].bias;
      slot = std::move(t);
      ckpt.params.layers[i].init_tag = ckpt.init_scheme;
    }
  }
  r.expect_end();

  // Validate parameter shapes against what the architecture implies, using
  // a zero draw as the reference layout.
  nn::ParamSet reference = nn::zero_like(ckpt.spec);
  for (size_t i = 0; i < ckpt.spec.layer_count(); ++i) {
    if (!ckpt.spec.layer_has_params(i)) continue;
    if (!ckpt.params.layers[i].weight.same_shape(
            reference.layers[i].weight) ||
        !ckpt.params.layers[i].bias.same_shape(reference.layers[i].bias)) {
      throw FormatError(source + ": tensor shapes for " +
                            ckpt.spec.layer_name(i) +
                            " do not match the architecture",
                        tcount_off);
    }
  }
  return ckpt;
}

void write_checkpoint(const pipeline::Checkpoint& ckpt,
                      const std::string& path) {
  detail::write_file_bytes(path, encode_checkpoint(ckpt));
}

pipeline::Checkpoint read_checkpoint(const std::string& path) {
  return decode_checkpoint(detail::read_file_bytes(path), path);
}

}  // namespace pinit::io
