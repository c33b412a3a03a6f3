#include "pinit/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "pinit/errors.hpp"
#include "bytes.hpp"

namespace pinit {
namespace detail {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open file for reading: " + path);
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw Error("read failed: " + path);
  }
  return bytes;
}

void write_file_bytes(const std::string& path,
                      const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot open file for writing: " + path);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("write failed: " + path);
  }
}

}  // namespace detail

namespace io {

namespace {

constexpr char kNoiseMagic[] = "PNDSET01";
constexpr uint16_t kNoiseVersion = 1;

void check_image_geometry(const LabeledImageSet& set) {
  if (set.width < 1 || set.height < 1 || set.channels < 1) {
    throw ConfigError("image set has invalid geometry " +
                      std::to_string(set.width) + "x" +
                      std::to_string(set.height) + "x" +
                      std::to_string(set.channels));
  }
}

}  // namespace

nn::TrainingSet to_training_set(const LabeledImageSet& set) {
  check_image_geometry(set);
  if (set.images.empty()) {
    throw ConfigError("image set is empty");
  }
  if (set.labels.size() != set.images.size()) {
    throw ConfigError("image set has " + std::to_string(set.images.size()) +
                      " images but " + std::to_string(set.labels.size()) +
                      " labels");
  }
  const size_t w = static_cast<size_t>(set.width);
  const size_t h = static_cast<size_t>(set.height);
  const size_t c = static_cast<size_t>(set.channels);
  const size_t stride = w * h * c;

  nn::TrainingSet out;
  out.images = Tensor({set.images.size(), w, h, c});
  out.labels.reserve(set.labels.size());
  for (size_t i = 0; i < set.images.size(); ++i) {
    const Tensor& img = set.images[i];
    if (img.rank() != 3 || img.dim(0) != w || img.dim(1) != h ||
        img.dim(2) != c) {
      throw ShapeError("image " + std::to_string(i) + " has shape " +
                       shape_string(img.shape()) + ", expected " +
                       shape_string({w, h, c}));
    }
    if (set.labels[i] < 0) {
      throw ConfigError("image " + std::to_string(i) +
                        " has negative label " +
                        std::to_string(set.labels[i]));
    }
    std::memcpy(out.images.data() + i * stride, img.data(),
                stride * sizeof(double));
    out.labels.push_back(set.labels[i]);
  }
  return out;
}

nn::TrainingSet to_training_set(const perlin::NoiseDataset& dataset) {
  if (dataset.samples.empty()) {
    throw ConfigError("noise dataset is empty");
  }
  const auto& cfg = dataset.config;
  const size_t w = static_cast<size_t>(cfg.width);
  const size_t h = static_cast<size_t>(cfg.height);
  const size_t c = static_cast<size_t>(cfg.channels);
  const size_t stride = w * h * c;

  nn::TrainingSet out;
  out.images = Tensor({dataset.samples.size(), w, h, c});
  out.labels.reserve(dataset.samples.size());
  for (size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& sample = dataset.samples[i];
    if (sample.values.rank() != 3 || sample.values.dim(0) != w ||
        sample.values.dim(1) != h || sample.values.dim(2) != c) {
      throw ShapeError("noise sample " + std::to_string(i) + " has shape " +
                       shape_string(sample.values.shape()) + ", expected " +
                       shape_string({w, h, c}));
    }
    std::memcpy(out.images.data() + i * stride, sample.values.data(),
                stride * sizeof(double));
    out.labels.push_back(sample.label - 1);
  }
  return out;
}

std::vector<uint8_t> encode_noise_dataset(const perlin::NoiseDataset& dataset) {
  const auto& cfg = dataset.config;
  perlin::validate(cfg);
  if (dataset.samples.size() != static_cast<size_t>(cfg.total_samples())) {
    throw ConfigError("noise dataset holds " +
                      std::to_string(dataset.samples.size()) +
                      " samples, config expects " +
                      std::to_string(cfg.total_samples()));
  }

  detail::ByteWriter w;
  w.raw(kNoiseMagic, 8);
  w.u16le(kNoiseVersion);
  w.u32le(static_cast<uint32_t>(cfg.N));
  w.u32le(static_cast<uint32_t>(cfg.M));
  w.u32le(static_cast<uint32_t>(cfg.K));
  w.u32le(static_cast<uint32_t>(cfg.width));
  w.u32le(static_cast<uint32_t>(cfg.height));
  w.u32le(static_cast<uint32_t>(cfg.channels));
  w.u64le(cfg.master_seed);
  w.u32le(static_cast<uint32_t>(dataset.samples.size()));

  const size_t stride = static_cast<size_t>(cfg.width) *
                        static_cast<size_t>(cfg.height) *
                        static_cast<size_t>(cfg.channels);
  for (const auto& sample : dataset.samples) {
    if (sample.values.size() != stride) {
      throw ShapeError("noise sample has " +
                       std::to_string(sample.values.size()) +
                       " values, expected " + std::to_string(stride));
    }
    w.u32le(static_cast<uint32_t>(sample.label));
    w.u32le(static_cast<uint32_t>(sample.n));
    w.u32le(static_cast<uint32_t>(sample.m));
    w.u32le(static_cast<uint32_t>(sample.k));
    w.u64le(sample.seed);
    for (size_t i = 0; i < stride; ++i) {
      w.f64le(sample.values.data()[i]);
    }
  }
  return w.data();
}

perlin::NoiseDataset decode_noise_dataset(const std::vector<uint8_t>& bytes,
                                          const std::string& source) {
  detail::ByteReader r(bytes, source);
  r.expect_magic(kNoiseMagic, 8);

  const size_t version_off = r.offset();
  uint16_t version = r.u16le();
  if (version != kNoiseVersion) {
    throw VersionError(source + ": unsupported format version " +
                           std::to_string(version) + ", this build reads " +
                           std::to_string(kNoiseVersion),
                       version_off);
  }

  const size_t config_off = r.offset();
  perlin::DatasetConfig cfg;
  cfg.N = static_cast<int>(r.u32le());
  cfg.M = static_cast<int>(r.u32le());
  cfg.K = static_cast<int>(r.u32le());
  cfg.width = static_cast<int>(r.u32le());
  cfg.height = static_cast<int>(r.u32le());
  cfg.channels = static_cast<int>(r.u32le());
  cfg.master_seed = r.u64le();
  try {
    perlin::validate(cfg);
  } catch (const Error& e) {
    throw FormatError(source + ": invalid dataset configuration: " + e.what(),
                      config_off);
  }

  const size_t count_off = r.offset();
  uint32_t count = r.u32le();
  if (count != static_cast<uint32_t>(cfg.total_samples())) {
    throw FormatError(source + ": sample count " + std::to_string(count) +
                          " does not match configuration (" +
                          std::to_string(cfg.total_samples()) + " expected)",
                      count_off);
  }

  const size_t stride = static_cast<size_t>(cfg.width) *
                        static_cast<size_t>(cfg.height) *
                        static_cast<size_t>(cfg.channels);
  perlin::NoiseDataset ds;
  ds.config = cfg;
  ds.samples.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const size_t record_off = r.offset();
    perlin::NoiseSample s;
    s.label = static_cast<int>(r.u32le());
    s.n = static_cast<int>(r.u32le());
    s.m = static_cast<int>(r.u32le());
    s.k = static_cast<int>(r.u32le());
    s.seed = r.u64le();
    if (s.n < 1 || s.n > cfg.N || s.m < 1 || s.m > cfg.M || s.k < 1 ||
        s.k > cfg.K || s.label != perlin::noise_label(s.n, s.m, cfg.M)) {
      throw FormatError(source + ": sample " + std::to_string(i) +
                            " has inconsistent header fields",
                        record_off);
    }
    s.values = Tensor({static_cast<size_t>(cfg.width),
                       static_cast<size_t>(cfg.height),
                       static_cast<size_t>(cfg.channels)});
    for (size_t j = 0; j < stride; ++j) {
      s.values.data()[j] = r.f64le();
    }
    ds.samples.push_back(std::move(s));
  }
  r.expect_end();
  return ds;
}

void write_noise_dataset(const perlin::NoiseDataset& dataset,
                         const std::string& path) {
  detail::write_file_bytes(path, encode_noise_dataset(dataset));
}

perlin::NoiseDataset read_noise_dataset(const std::string& path) {
  return decode_noise_dataset(detail::read_file_bytes(path), path);
}

namespace {

// IDX header: two zero bytes, an element-type code, a rank byte, then
// rank big-endian u32 dimensions.
struct IdxHeader {
  uint8_t dtype = 0;
  std::vector<size_t> dims;
};

IdxHeader read_idx_header(detail::ByteReader& r, const std::string& source,
                          int expected_rank) {
  for (int i = 0; i < 2; ++i) {
    if (r.u8() != 0) {
      throw FormatError(source + ": IDX header byte " + std::to_string(i) +
                            " is not zero",
                        i);
    }
  }
  IdxHeader h;
  const size_t dtype_off = r.offset();
  h.dtype = r.u8();
  if (h.dtype != 0x08 && h.dtype != 0x0d) {
    char buf[80];
    std::snprintf(buf, sizeof(buf),
                  "unsupported IDX element type 0x%02X "
                  "(supported: 0x08 ubyte, 0x0D float32)",
                  h.dtype);
    throw FormatError(source + ": " + buf, dtype_off);
  }
  const size_t rank_off = r.offset();
  int rank = r.u8();
  if (rank != expected_rank) {
    throw FormatError(source + ": IDX rank " + std::to_string(rank) +
                          ", expected " + std::to_string(expected_rank),
                      rank_off);
  }
  for (int i = 0; i < rank; ++i) {
    const size_t dim_off = r.offset();
    uint32_t d = r.u32be();
    if (d == 0) {
      throw FormatError(source + ": IDX dimension " + std::to_string(i) +
                            " is zero",
                        dim_off);
    }
    h.dims.push_back(d);
  }
  return h;
}

double read_idx_element(detail::ByteReader& r, uint8_t dtype) {
  if (dtype == 0x08) {
    return r.u8() / 255.0;
  }
  return static_cast<double>(std::bit_cast<float>(r.u32be()));
}

}  // namespace

LabeledImageSet load_idx(const std::string& images_path,
                         const std::string& labels_path) {
  std::vector<uint8_t> image_bytes = detail::read_file_bytes(images_path);
  detail::ByteReader ir(image_bytes, images_path);
  IdxHeader ih = read_idx_header(ir, images_path, 3);
  const size_t count = ih.dims[0];
  const size_t rows = ih.dims[1];
  const size_t cols = ih.dims[2];

  LabeledImageSet set;
  set.width = static_cast<int>(cols);
  set.height = static_cast<int>(rows);
  set.channels = 1;
  set.images.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    Tensor img({cols, rows, 1});
    for (size_t row = 0; row < rows; ++row) {
      for (size_t col = 0; col < cols; ++col) {
        img.at(col, row, 0) = read_idx_element(ir, ih.dtype);
      }
    }
    set.images.push_back(std::move(img));
  }
  ir.expect_end();

  std::vector<uint8_t> label_bytes = detail::read_file_bytes(labels_path);
  detail::ByteReader lr(label_bytes, labels_path);
  IdxHeader lh = read_idx_header(lr, labels_path, 1);
  if (lh.dtype != 0x08) {
    throw FormatError(labels_path + ": labels must be unsigned bytes", 2);
  }
  if (lh.dims[0] != count) {
    throw FormatError(labels_path + ": " + std::to_string(lh.dims[0]) +
                          " labels for " + std::to_string(count) + " images",
                      4);
  }
  set.labels.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    set.labels.push_back(lr.u8());
  }
  lr.expect_end();
  return set;
}

Tensor render_image_grid(const std::vector<Tensor>& planes) {
  if (planes.empty()) {
    throw ConfigError("image grid needs at least one plane");
  }
  for (size_t i = 0; i < planes.size(); ++i) {
    if (planes[i].rank() != 2) {
      throw ShapeError("grid plane " + std::to_string(i) + " has shape " +
                       shape_string(planes[i].shape()) +
                       ", expected a rank-2 plane");
    }
    if (!planes[i].same_shape(planes[0])) {
      throw ShapeError("grid plane " + std::to_string(i) + " has shape " +
                       shape_string(planes[i].shape()) + ", plane 0 has " +
                       shape_string(planes[0].shape()));
    }
  }
  const size_t w = planes[0].dim(0);
  const size_t h = planes[0].dim(1);
  const size_t count = planes.size();
  size_t grid_cols = static_cast<size_t>(
      std::ceil(std::sqrt(static_cast<double>(count))));
  size_t grid_rows = (count + grid_cols - 1) / grid_cols;

  Tensor canvas({grid_cols * (w + 1) + 1, grid_rows * (h + 1) + 1});
  canvas.fill(0.0);
  for (size_t t = 0; t < count; ++t) {
    const size_t x0 = 1 + (t % grid_cols) * (w + 1);
    const size_t y0 = 1 + (t / grid_cols) * (h + 1);
    for (size_t y = 0; y < h; ++y) {
      for (size_t x = 0; x < w; ++x) {
        canvas.at(x0 + x, y0 + y) =
            std::clamp(planes[t].at(x, y), 0.0, 1.0);
      }
    }
  }
  return canvas;
}

std::vector<uint8_t> encode_pgm(const Tensor& plane) {
  if (plane.rank() != 2) {
    throw ShapeError("PGM wants a rank-2 plane, got " +
                     shape_string(plane.shape()));
  }
  const size_t w = plane.dim(0);
  const size_t h = plane.dim(1);
  std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) +
                       "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + w * h);
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x < w; ++x) {
      double v = std::clamp(plane.at(x, y), 0.0, 1.0);
      out.push_back(static_cast<uint8_t>(std::floor(v * 255.0 + 0.5)));
    }
  }
  return out;
}

void write_image_grid(const std::vector<Tensor>& planes,
                      const std::string& path) {
  detail::write_file_bytes(path, encode_pgm(render_image_grid(planes)));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::vector<uint8_t> bytes = detail::read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::vector<uint8_t> bytes(content.begin(), content.end());
  detail::write_file_bytes(path, bytes);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    size_t end = (eol == std::string::npos) ? text.size() : eol;
    std::vector<std::string> fields;
    size_t field_start = pos;
    for (size_t i = pos; i <= end; ++i) {
      if (i == end || text[i] == ',') {
        fields.emplace_back(text, field_start, i - field_start);
        field_start = i + 1;
      }
    }
    rows.push_back(std::move(fields));
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return rows;
}

}  // namespace io
}  // namespace pinit
