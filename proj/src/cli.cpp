#include "pinit/cli.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "pinit/checkpoint_io.hpp"
#include "pinit/errors.hpp"
#include "pinit/io.hpp"
#include "pinit/nn.hpp"
#include "pinit/perlin.hpp"
#include "pinit/pipeline.hpp"
#include "pinit/rng.hpp"
#include "pinit/tensor.hpp"

namespace pinit::cli {

namespace {

// "runs/exp.csv" -> "runs/exp"; paths without an extension are returned
// unchanged (a leading dot does not count as one).
std::string path_stem(const std::string& path) {
  const size_t slash = path.find_last_of("/\\");
  const size_t start = slash == std::string::npos ? 0 : slash + 1;
  const size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || dot <= start) return path;
  return path.substr(0, dot);
}

std::vector<std::string> split_commas(const std::string& text,
                                      const char* flag) {
  std::vector<std::string> parts;
  size_t pos = 0;
  while (true) {
    size_t comma = text.find(',', pos);
    std::string part = text.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (part.empty()) {
      throw ConfigError(std::string(flag) + ": empty entry in \"" + text +
                        "\"");
    }
    parts.push_back(std::move(part));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return parts;
}

uint64_t parse_u64(const std::string& text, const char* flag) {
  if (text.empty() || text[0] < '0' || text[0] > '9') {
    throw ConfigError(std::string(flag) + ": \"" + text +
                      "\" is not an unsigned integer");
  }
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || errno != 0) {
    throw ConfigError(std::string(flag) + ": \"" + text +
                      "\" is not an unsigned integer");
  }
  return v;
}

nn::NetworkSpec build_arch(const std::string& name, int width, int height,
                           int channels, int classes) {
  if (name == "minicnn") {
    return nn::NetworkSpec::minicnn(width, height, channels, classes);
  }
  throw ConfigError("--arch: unknown architecture \"" + name +
                    "\" (supported: minicnn)");
}

nn::TrainConfig make_train_config(double lr, double momentum, int batch,
                                  int epochs) {
  nn::TrainConfig cfg;
  cfg.learning_rate = lr;
  cfg.momentum = momentum;
  cfg.batch_size = batch;
  cfg.epochs = epochs;
  cfg.decay_epochs = nn::default_decay_epochs(epochs);
  return cfg;
}

// Channel 0 of a sample as a rank-2 plane.
Tensor sample_plane(const Tensor& values) {
  Tensor plane({values.dim(0), values.dim(1)});
  for (size_t y = 0; y < values.dim(1); ++y) {
    for (size_t x = 0; x < values.dim(0); ++x) {
      plane.at(x, y) = values.at(x, y, 0);
    }
  }
  return plane;
}

struct GenerateOpts {
  int N = 3, M = 3, K = 100;
  int W = 32, H = 32, C = 1;
  uint64_t seed = 0;
  std::string out;
  bool preview = false;
};

void run_generate(const GenerateOpts& o) {
  perlin::DatasetConfig cfg;
  cfg.N = o.N;
  cfg.M = o.M;
  cfg.K = o.K;
  cfg.width = o.W;
  cfg.height = o.H;
  cfg.channels = o.C;
  cfg.master_seed = o.seed;

  perlin::NoiseDataset ds = perlin::build_dataset(cfg);
  io::write_noise_dataset(ds, o.out);

  std::string preview_note;
  if (o.preview) {
    // One plane per category: the first instance of each.
    std::vector<Tensor> planes;
    planes.reserve(static_cast<size_t>(cfg.categories()));
    for (int cat = 0; cat < cfg.categories(); ++cat) {
      planes.push_back(sample_plane(
          ds.samples[static_cast<size_t>(cat) * cfg.K].values));
    }
    std::string preview_path = o.out + ".preview.pgm";
    io::write_image_grid(planes, preview_path);
    preview_note = " preview=" + preview_path;
  }
  std::cout << "generate: categories=" << cfg.categories()
            << " samples=" << ds.samples.size() << " archive=" << o.out
            << preview_note << "\n";
}

struct PretrainOpts {
  std::string archive;
  std::string arch = "minicnn";
  int epochs = 30;
  double lr = 0.01;
  double momentum = 0.9;
  int batch = 32;
  uint64_t seed = 0;
  std::string out;
};

void run_pretrain(const PretrainOpts& o) {
  perlin::NoiseDataset ds = io::read_noise_dataset(o.archive);
  nn::NetworkSpec spec =
      build_arch(o.arch, ds.config.width, ds.config.height,
                 ds.config.channels, ds.config.categories());
  nn::TrainConfig cfg =
      make_train_config(o.lr, o.momentum, o.batch, o.epochs);
  cfg.shuffle_seed = derive_seed(o.seed, pipeline::kShuffleDomain);

  pipeline::Checkpoint ckpt = pipeline::pretrain_on_dataset(
      ds, spec, cfg, derive_seed(o.seed, pipeline::kInitDomain),
      [&](int epoch, const nn::ParamSet&, const nn::EpochMetrics& m) {
        std::cout << "epoch=" << (epoch + 1) << "/" << o.epochs
                  << " train_loss=" << io::format_double(m.loss)
                  << " train_acc=" << io::format_double(m.accuracy) << "\n";
      });
  io::write_checkpoint(ckpt, o.out);

  std::string history_path = path_stem(o.out) + "_history.csv";
  std::string csv = "epoch,train_loss,train_accuracy\n";
  for (size_t i = 0; i < ckpt.history.size(); ++i) {
    csv += std::to_string(i + 1) + "," +
           io::format_double(ckpt.history[i].loss) + "," +
           io::format_double(ckpt.history[i].accuracy) + "\n";
  }
  io::write_text_file(history_path, csv);

  double final_acc =
      ckpt.history.empty() ? 0.0 : ckpt.history.back().accuracy;
  std::cout << "pretrain: epochs=" << ckpt.history.size()
            << " final_train_acc=" << io::format_double(final_acc)
            << " checkpoint=" << o.out << " history=" << history_path
            << "\n";
}

struct CompareOpts {
  bool shapes = false;
  std::string idx_images;
  std::string idx_labels;
  std::string schemes = "he,perlin";
  std::string seeds = "1,2,3,4,5";
  std::string perlin_ckpt;
  std::string arch = "minicnn";
  int epochs = 20;
  double lr = 0.01;
  double momentum = 0.9;
  int batch = 32;
  uint64_t seed = 0;
  std::string out;
};

pipeline::DownstreamData load_downstream(const CompareOpts& o) {
  const bool has_idx = !o.idx_images.empty() || !o.idx_labels.empty();
  if (o.shapes && has_idx) {
    throw ConfigError(
        "--shapes cannot be combined with --idx-images/--idx-labels");
  }
  if (!o.shapes && !has_idx) {
    throw ConfigError(
        "compare needs a data source: --shapes or --idx-images with "
        "--idx-labels");
  }

  pipeline::DownstreamData data;
  if (o.shapes) {
    io::ShapesTask task;  // the five-class 32x32 preset
    task.seed = o.seed;
    auto [train, test] = io::make_shapes_dataset(task);
    data.train = io::to_training_set(train);
    data.test = io::to_training_set(test);
    data.num_classes = static_cast<int>(task.classes.size());
    return data;
  }

  if (o.idx_images.empty() || o.idx_labels.empty()) {
    throw ConfigError("--idx-images and --idx-labels must be given together");
  }
  std::vector<std::string> images = split_commas(o.idx_images, "--idx-images");
  std::vector<std::string> labels = split_commas(o.idx_labels, "--idx-labels");
  if (images.size() != labels.size()) {
    throw ConfigError("--idx-images lists " + std::to_string(images.size()) +
                      " paths but --idx-labels lists " +
                      std::to_string(labels.size()));
  }
  if (images.size() > 2) {
    throw ConfigError("--idx-images: expected one file or a train,test pair,"
                      " got " + std::to_string(images.size()) + " paths");
  }

  io::LabeledImageSet train_set;
  io::LabeledImageSet test_set;
  if (images.size() == 2) {
    train_set = io::load_idx(images[0], labels[0]);
    test_set = io::load_idx(images[1], labels[1]);
    if (train_set.width != test_set.width ||
        train_set.height != test_set.height ||
        train_set.channels != test_set.channels) {
      throw ConfigError("train file " + images[0] + " and test file " +
                        images[1] + " have different image geometry");
    }
  } else {
    // A single file: hold out the last fifth as the test split.
    io::LabeledImageSet whole = io::load_idx(images[0], labels[0]);
    size_t test_count = whole.count() / 5;
    if (test_count == 0) {
      throw ConfigError("--idx-images: " + images[0] + " holds only " +
                        std::to_string(whole.count()) +
                        " samples, too few for an 80/20 split");
    }
    size_t train_count = whole.count() - test_count;
    train_set.width = test_set.width = whole.width;
    train_set.height = test_set.height = whole.height;
    train_set.channels = test_set.channels = whole.channels;
    for (size_t i = 0; i < whole.count(); ++i) {
      auto& dst = i < train_count ? train_set : test_set;
      dst.images.push_back(std::move(whole.images[i]));
      dst.labels.push_back(whole.labels[i]);
    }
  }

  int max_label = 0;
  for (int l : train_set.labels) max_label = std::max(max_label, l);
  for (int l : test_set.labels) max_label = std::max(max_label, l);
  if (max_label < 1) {
    throw ConfigError("--idx-labels: the data holds fewer than two classes");
  }
  data.train = io::to_training_set(train_set);
  data.test = io::to_training_set(test_set);
  data.num_classes = max_label + 1;
  return data;
}

void run_compare(const CompareOpts& o) {
  pipeline::DownstreamData data = load_downstream(o);
  const int width = static_cast<int>(data.train.images.dim(1));
  const int height = static_cast<int>(data.train.images.dim(2));
  const int channels = static_cast<int>(data.train.images.dim(3));

  std::optional<pipeline::Checkpoint> ckpt;
  if (!o.perlin_ckpt.empty()) {
    ckpt = io::read_checkpoint(o.perlin_ckpt);
  }

  pipeline::ComparisonPlan plan;
  plan.schemes = split_commas(o.schemes, "--schemes");
  plan.seeds.clear();
  for (const std::string& s : split_commas(o.seeds, "--seeds")) {
    plan.seeds.push_back(parse_u64(s, "--seeds"));
  }
  plan.train = make_train_config(o.lr, o.momentum, o.batch, o.epochs);

  nn::NetworkSpec spec =
      build_arch(o.arch, width, height, channels, data.num_classes);
  pipeline::ComparisonReport report = pipeline::run_comparison(
      plan, spec, data, ckpt.has_value() ? &*ckpt : nullptr);

  io::write_text_file(o.out, pipeline::results_csv(report));
  std::string curves_path = path_stem(o.out) + "_curves.csv";
  io::write_text_file(curves_path, pipeline::curves_csv(report));

  for (const auto& run : report.runs) {
    std::cout << "run scheme=" << run.scheme << " seed=" << run.seed
              << " epoch0_val_acc="
              << io::format_double(run.epoch0_val_accuracy)
              << " final_test_acc="
              << io::format_double(run.final_test_accuracy) << "\n";
  }
  std::cout << "compare: runs=" << report.runs.size() << " results=" << o.out
            << " curves=" << curves_path << "\n";
}

struct ExportFiltersOpts {
  std::string checkpoint;
  std::string out;
};

void run_export_filters(const ExportFiltersOpts& o) {
  pipeline::Checkpoint ckpt = io::read_checkpoint(o.checkpoint);
  std::vector<Tensor> planes =
      pipeline::conv1_filter_planes(ckpt.spec, ckpt.params);
  io::write_image_grid(planes, o.out);
  std::cout << "export-filters: filters=" << planes.size()
            << " image=" << o.out << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Procedural-noise pretraining for small image classifiers",
               "pinit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read option defaults from a key=value file "
                 "(command-line flags win)");
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  GenerateOpts gen;
  CLI::App* generate =
      app.add_subcommand("generate", "Render a categorized noise dataset "
                                     "and write it as a binary archive");
  generate->add_option("-N", gen.N, "Grid exponent range along x (n in 1..N)")
      ->capture_default_str();
  generate->add_option("-M", gen.M, "Grid exponent range along y (m in 1..M)")
      ->capture_default_str();
  generate->add_option("-K", gen.K, "Instances per category")
      ->capture_default_str();
  generate->add_option("-W", gen.W, "Image width in pixels")
      ->capture_default_str();
  generate->add_option("-H", gen.H, "Image height in pixels")
      ->capture_default_str();
  generate->add_option("-C", gen.C, "Channels per image")
      ->capture_default_str();
  generate->add_option("--seed", gen.seed, "Master seed for the dataset")
      ->capture_default_str();
  generate->add_option("--out", gen.out, "Archive path to write")->required();
  generate->add_flag("--preview", gen.preview,
                     "Also write a PGM grid with one sample per category "
                     "next to the archive");
  generate->callback([&gen]() { run_generate(gen); });

  PretrainOpts pre;
  CLI::App* pretrain =
      app.add_subcommand("pretrain", "Train a network on a noise archive "
                                     "and save the checkpoint");
  pretrain->add_option("archive", pre.archive, "Noise dataset archive")
      ->required();
  pretrain->add_option("--arch", pre.arch, "Network architecture")
      ->capture_default_str();
  pretrain->add_option("--epochs", pre.epochs, "Training epochs")
      ->capture_default_str();
  pretrain->add_option("--lr", pre.lr, "Initial learning rate")
      ->capture_default_str();
  pretrain->add_option("--momentum", pre.momentum, "SGD momentum")
      ->capture_default_str();
  pretrain->add_option("--batch", pre.batch, "Mini-batch size")
      ->capture_default_str();
  pretrain->add_option("--seed", pre.seed,
                       "Seed for initialization and shuffling")
      ->capture_default_str();
  pretrain->add_option("--out", pre.out, "Checkpoint path to write")
      ->required();
  pretrain->callback([&pre]() { run_pretrain(pre); });

  CompareOpts cmp;
  CLI::App* compare = app.add_subcommand(
      "compare", "Fine-tune several initialization schemes on a downstream "
                 "task and write result/curve CSVs");
  compare->add_flag("--shapes", cmp.shapes,
                    "Use the built-in five-class shapes task (50 train and "
                    "100 test samples per class at 32x32)");
  compare->add_option("--idx-images", cmp.idx_images,
                      "IDX image file, or train,test pair");
  compare->add_option("--idx-labels", cmp.idx_labels,
                      "IDX label file, or train,test pair");
  compare->add_option("--schemes", cmp.schemes,
                      "Comma list of initialization schemes (he, xavier, "
                      "sparse, normal, zero, perlin)")
      ->capture_default_str();
  compare->add_option("--seeds", cmp.seeds, "Comma list of experiment seeds")
      ->capture_default_str();
  compare->add_option("--perlin-ckpt", cmp.perlin_ckpt,
                      "Pretraining checkpoint backing the perlin scheme");
  compare->add_option("--arch", cmp.arch, "Network architecture")
      ->capture_default_str();
  compare->add_option("--epochs", cmp.epochs, "Fine-tuning epochs")
      ->capture_default_str();
  compare->add_option("--lr", cmp.lr, "Initial learning rate")
      ->capture_default_str();
  compare->add_option("--momentum", cmp.momentum, "SGD momentum")
      ->capture_default_str();
  compare->add_option("--batch", cmp.batch, "Mini-batch size")
      ->capture_default_str();
  compare->add_option("--seed", cmp.seed,
                      "Seed for generating the shapes task")
      ->capture_default_str();
  compare->add_option("--out", cmp.out, "Results CSV path to write")
      ->required();
  compare->callback([&cmp]() { run_compare(cmp); });

  ExportFiltersOpts exp;
  CLI::App* export_filters = app.add_subcommand(
      "export-filters", "Render a checkpoint's first-layer filters as a "
                        "PGM grid");
  export_filters->add_option("checkpoint", exp.checkpoint,
                             "Checkpoint to read")
      ->required();
  export_filters->add_option("--out", exp.out, "PGM path to write")
      ->required();
  export_filters->callback([&exp]() { run_export_filters(exp); });

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("pinit");
  for (const auto& a : args) argv_storage.push_back(a);
  std::vector<const char*> argv;
  argv.reserve(argv_storage.size());
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    // app.exit prints the help text or diagnostic; fold CLI11's error
    // numbering into the plain success/failure contract.
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace pinit::cli
