#include "panelvit/commands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "panelvit/error.hpp"
#include "panelvit/image_io.hpp"
#include "panelvit/keyvalue.hpp"

namespace panelvit::cli {

namespace fs = std::filesystem;

namespace {

std::vector<double> softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (auto& x : p) x /= s;
  return p;
}

std::string join_doubles(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::string join_names(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<Tensor> tensors_of(const ModelParams& params) {
  std::vector<Tensor> out;
  for (auto& nt : params.named()) out.push_back(nt.tensor);
  return out;
}

std::string format_manifest(const RunConfig& config, const Checkpoint& ck, std::size_t train_size,
                            std::size_t val_size) {
  std::ostringstream out;
  out << "# panelvit run manifest; usable as a config file\n";
  out << format_run_settings(config);
  out << "manifest.format_version=" << kManifestVersion << '\n'
      << "manifest.checkpoint_version=" << kCheckpointVersion << '\n'
      << "manifest.class_names=" << join_names(ck.class_names) << '\n'
      << "manifest.norm_mean=" << join_doubles(ck.norm.mean) << '\n'
      << "manifest.norm_std=" << join_doubles(ck.norm.stddev) << '\n'
      << "manifest.parameter_count=" << ck.params.parameter_count() << '\n'
      << "manifest.train_size=" << train_size << '\n'
      << "manifest.val_size=" << val_size << '\n'
      << "manifest.epochs_completed=" << ck.rng.epochs_completed << '\n';
  return out.str();
}

void print_config(const ModelConfig& c, std::ostream& out) {
  out << "image_size: " << c.image_size << '\n'
      << "channels: " << c.channels << '\n'
      << "patch_size: " << c.patch_size << " (" << c.num_patches() << " patches)\n"
      << "model_dim: " << c.model_dim << '\n'
      << "num_heads: " << c.num_heads << '\n'
      << "num_layers: " << c.num_layers << '\n'
      << "ffn_dim: " << c.ffn_dim << '\n'
      << "dropout: " << format_double(c.dropout_rate) << '\n'
      << "head_hidden:";
  for (const auto h : c.head_hidden) out << ' ' << h;
  out << '\n' << "num_classes: " << c.num_classes << '\n' << "ln_eps: " << format_double(c.ln_eps) << '\n';
}

}  // namespace

TrainResult cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();

  std::optional<Checkpoint> resumed;
  if (config.resume_from) resumed = load_checkpoint(*config.resume_from);

  LoadOptions load;
  load.resize_to = config.model.image_size;
  load.log = &log;
  Dataset ds = load_dataset(config.data_root, load);

  ModelConfig model = config.model;
  model.num_classes = ds.num_classes();
  model.validate();

  const auto parts = split(ds, config.train_fraction, config.resolved_split_seed());
  if (parts.train.size() == 0) throw DataError("training split is empty; add images or raise train_fraction");

  Checkpoint ck;
  ck.config = model;
  ck.class_names = ds.class_names;
  ck.train_fraction = config.train_fraction;
  ck.split_seed = config.resolved_split_seed();
  ck.rng = {config.seed, 0};

  std::vector<EpochRecord> curves;
  const fs::path curves_path = config.output_dir / "curves.csv";
  if (resumed) {
    if (!(resumed->config == model)) throw ConfigError("resume: checkpoint configuration differs from this run");
    if (resumed->class_names != ds.class_names) throw ConfigError("resume: checkpoint classes differ from dataset");
    if (!resumed->optimizer) throw ConfigError("resume: checkpoint carries no optimizer state");
    if (resumed->rng.seed != config.seed) throw ConfigError("resume: checkpoint seed differs from this run");
    ck.norm = resumed->norm;
    ck.params = resumed->params;
    ck.rng = resumed->rng;
    const fs::path previous = config.resume_from->parent_path() / "curves.csv";
    if (fs::exists(previous)) {
      curves = parse_curves_csv(read_text_file(previous));
      if (curves.size() > ck.rng.epochs_completed) curves.resize(ck.rng.epochs_completed);
    }
  } else {
    ck.norm = NormStats::compute(parts.train);
    ck.params = init_params(model, config.seed, config.head_init);
  }

  AdamW optimizer(tensors_of(ck.params), config.optimizer);
  if (resumed) optimizer.restore(resumed->optimizer->step, resumed->optimizer->m, resumed->optimizer->v);

  TrainOptions options;
  options.batch_size = config.batch_size;
  options.augment = config.augment;
  options.augment.seed = config.resolved_augment_seed();
  options.seed = config.seed;

  make_dir(config.output_dir);
  std::ostringstream train_log;
  auto note = [&](const std::string& line) {
    log << line << '\n';
    train_log << line << '\n';
  };
  note("classes: " + join_names(ds.class_names));
  note("train " + std::to_string(parts.train.size()) + ", val " + std::to_string(parts.val.size()) +
       ", parameters " + std::to_string(ck.params.parameter_count()));

  for (std::uint64_t epoch = ck.rng.epochs_completed; epoch < config.epochs; ++epoch) {
    const auto stats = train_epoch(ck.params, model, parts.train, optimizer, ck.norm, options, epoch);
    const auto val = evaluate(ck.params, model, parts.val, ck.norm, config.batch_size);
    curves.push_back({static_cast<std::size_t>(epoch + 1), stats.loss, stats.accuracy, val.loss, val.accuracy});
    ck.rng.epochs_completed = epoch + 1;
    note("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) + " train_loss " +
         format_double(stats.loss) + " train_acc " + format_double(stats.accuracy) + " val_loss " +
         format_double(val.loss) + " val_acc " + format_double(val.accuracy));
  }

  ck.optimizer = OptimizerState{optimizer.config(), optimizer.step_count(), optimizer.first_moments(),
                                optimizer.second_moments()};

  TrainResult result;
  result.curves = curves;
  result.checkpoint_path = config.output_dir / "checkpoint.bin";
  result.manifest_path = config.output_dir / "manifest.txt";
  result.curves_path = curves_path;
  result.parameter_count = ck.params.parameter_count();
  result.train_size = parts.train.size();
  result.val_size = parts.val.size();

  save_checkpoint(result.checkpoint_path, ck);
  write_text_file(result.manifest_path, format_manifest(config, ck, result.train_size, result.val_size));
  write_text_file(curves_path, format_curves_csv(curves));
  write_text_file(config.output_dir / "train_log.txt", train_log.str());
  return result;
}

EvalOutcome cmd_eval(const EvalConfig& config, std::ostream& log) {
  if (config.subset != "all" && config.subset != "val") {
    throw ConfigError("subset must be 'all' or 'val', got '" + config.subset + "'");
  }
  if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (config.data_root.empty()) throw ConfigError("a dataset root is required");

  const Checkpoint ck = load_checkpoint(config.checkpoint);
  LoadOptions load;
  load.resize_to = ck.config.image_size;
  load.log = &log;
  Dataset ds = load_dataset(config.data_root, load);
  if (ds.num_classes() != ck.config.num_classes) {
    throw ConfigError("dataset has " + std::to_string(ds.num_classes()) + " classes, checkpoint expects " +
                      std::to_string(ck.config.num_classes));
  }
  if (ds.class_names != ck.class_names) {
    log << "warning: dataset class names differ from the checkpoint's; labels follow directory order\n";
  }
  if (config.subset == "val") ds = split(ds, ck.train_fraction, ck.split_seed).val;

  EvalOutcome out;
  out.result = evaluate(ck.params, ck.config, ds, ck.norm, config.batch_size);
  std::vector<std::size_t> labels;
  for (const auto& li : ds.images) {
    labels.push_back(li.label);
    out.sources.push_back(li.source);
  }
  out.confusion = confusion(labels, out.result.predictions, ck.config.num_classes, ck.class_names);
  out.report = score(out.confusion);
  out.paths = render_report(out.report, out.confusion, config.output_dir);

  std::ostringstream csv;
  csv << "source,label,predicted";
  for (const auto& n : ck.class_names) csv << ",p_" << n;
  csv << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    csv << out.sources[i] << ',' << ck.class_names[labels[i]] << ','
        << ck.class_names[out.result.predictions[i]];
    for (const double p : softmax(out.result.logits[i])) csv << ',' << format_double(p);
    csv << '\n';
  }
  out.predictions_path = config.output_dir / "predictions.csv";
  write_text_file(out.predictions_path, csv.str());

  log << "evaluated " << labels.size() << " images\n"
      << "accuracy " << format_double(out.report.accuracy) << '\n'
      << "f1_macro " << format_double(out.report.f1_macro) << '\n'
      << "cohen_kappa " << format_double(out.report.cohen_kappa) << '\n'
      << "mcc " << format_double(out.report.mcc) << '\n';
  return out;
}

std::vector<Prediction> cmd_predict(const fs::path& checkpoint, const std::vector<fs::path>& images,
                                    std::ostream& out, std::ostream& err) {
  if (images.empty()) throw ConfigError("no images given");
  const Checkpoint ck = load_checkpoint(checkpoint);
  NoGradGuard no_grad;
  std::vector<Prediction> results;
  for (const auto& path : images) {
    Prediction pred;
    pred.path = path;
    try {
      const Image img = ck.norm.apply(resize(decode_image(path), ck.config.image_size));
      const Tensor logits = forward(std::span<const Image>(&img, 1), ck.params, ck.config, {});
      pred.probabilities = softmax(logits.data());
      pred.label = argmax(pred.probabilities);
      pred.ok = true;
    } catch (const Error& e) {
      pred.error = e.what();
      err << path.string() << ": " << e.what() << '\n';
      results.push_back(std::move(pred));
      continue;
    }
    std::vector<std::size_t> order(pred.probabilities.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pred.probabilities[a] > pred.probabilities[b]; });
    out << path.string() << '\t' << ck.class_names[pred.label] << '\t' << format_double(pred.probabilities[pred.label])
        << "\ttop3=";
    for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) {
      if (k) out << ',';
      out << ck.class_names[order[k]] << ':' << format_double(pred.probabilities[order[k]]);
    }
    out << "\tprobs=" << join_doubles(pred.probabilities) << '\n';
    results.push_back(std::move(pred));
  }
  return results;
}

void cmd_inspect(const fs::path& target, const InspectOptions& options, std::ostream& out) {
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  std::error_code ec;
  const auto status = fs::status(target, ec);
  if (ec || !fs::exists(status)) throw IoError("cannot read " + target.string());

  if (fs::is_directory(status)) {
    const auto index = scan_dataset(target);
    std::vector<std::size_t> counts;
    for (const auto& f : index.files) counts.push_back(f.size());
    const auto train = split_train_counts(counts, options.train_fraction);
    out << "dataset: " << target.string() << '\n'
        << "classes: " << index.class_names.size() << '\n'
        << "class,images,train,val\n";
    std::size_t train_total = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      out << index.class_names[c] << ',' << counts[c] << ',' << train[c] << ',' << counts[c] - train[c] << '\n';
      train_total += train[c];
    }
    out << "total," << index.total() << ',' << train_total << ',' << index.total() - train_total << '\n';
    return;
  }

  const Checkpoint ck = load_checkpoint(target);
  out << "checkpoint: " << target.string() << '\n' << "format_version: " << kCheckpointVersion << '\n';
  print_config(ck.config, out);
  out << "parameter_count: " << ck.params.parameter_count() << '\n'
      << "classes: " << join_names(ck.class_names) << '\n'
      << "norm_mean: " << join_doubles(ck.norm.mean) << '\n'
      << "norm_std: " << join_doubles(ck.norm.stddev) << '\n'
      << "train_fraction: " << format_double(ck.train_fraction) << '\n'
      << "split_seed: " << ck.split_seed << '\n'
      << "seed: " << ck.rng.seed << '\n'
      << "epochs_completed: " << ck.rng.epochs_completed << '\n'
      << "optimizer_steps: " << (ck.optimizer ? ck.optimizer->step : 0) << '\n';
}

}  // namespace panelvit::cli
