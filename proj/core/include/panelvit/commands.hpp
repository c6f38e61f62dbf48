#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "panelvit/checkpoint.hpp"
#include "panelvit/data.hpp"
#include "panelvit/metrics.hpp"
#include "panelvit/model.hpp"
#include "panelvit/optim.hpp"

namespace panelvit::cli {

/// Everything a training run needs. Defaults are the solar-panel setup:
/// 72×72 images, 8×8 patches, batch 32, 100 epochs, AdamW lr 0.001 with
/// decay 0.0001, dropout 0.5, 8 layers, 8 heads, width 64.
///
/// Layering: defaults < preset < config file < explicit overrides.
struct RunConfig {
  std::filesystem::path data_root;
  std::filesystem::path output_dir = "run";
  ModelConfig model;  // num_classes is taken from the dataset
  HeadInit head_init = HeadInit::glorot;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  AdamWConfig optimizer;
  AugmentConfig augment;
  double train_fraction = 0.75;
  std::uint64_t seed = 42;
  std::optional<std::uint64_t> split_seed;    // defaults to seed
  std::optional<std::uint64_t> augment_seed;  // defaults to seed
  std::optional<std::filesystem::path> resume_from;

  std::uint64_t resolved_split_seed() const { return split_seed.value_or(seed); }
  std::uint64_t resolved_augment_seed() const { return augment_seed.value_or(seed); }

  /// Checks every field; touches no files. Throws ConfigError.
  void validate() const;
};

struct SettingInfo {
  std::string key;
  std::string help;
};

/// Every key accepted by apply_setting, in manifest order.
const std::vector<SettingInfo>& setting_keys();

/// Applies a named preset ("solar": 72/8, "wind": 256/16).
void apply_preset(RunConfig& config, const std::string& name);

/// Sets one `key=value` field. Unknown keys are a ConfigError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Applies a config file's contents. `preset` is honoured first; keys under
/// `manifest.` are informational and ignored, so a run manifest is itself a
/// valid config file.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source);

/// Resolved settings of a run as `key=value` lines.
std::string format_run_settings(const RunConfig& config);

inline constexpr std::uint32_t kManifestVersion = 1;

struct TrainResult {
  std::vector<EpochRecord> curves;
  std::filesystem::path checkpoint_path;
  std::filesystem::path manifest_path;
  std::filesystem::path curves_path;
  std::size_t parameter_count = 0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

/// Load → resize → stratified split → train for `epochs` → write
/// checkpoint.bin, manifest.txt, curves.csv and train_log.txt into the
/// output directory. Nothing is written unless validation and loading succeed.
TrainResult cmd_train(const RunConfig& config, std::ostream& log);

struct EvalConfig {
  std::filesystem::path checkpoint;
  std::filesystem::path data_root;
  /// "all" evaluates every image; "val" rebuilds the training run's
  /// validation split from the seed and fraction stored in the checkpoint.
  std::string subset = "all";
  std::filesystem::path output_dir = "eval";
  std::size_t batch_size = 32;
};

struct EvalOutcome {
  MetricsReport report;
  ConfusionMatrix confusion;
  EvalResult result;
  std::vector<std::string> sources;
  ReportPaths paths;
  std::filesystem::path predictions_path;
};

/// Eval-mode pass writing scores.txt, per_class.csv, confusion.csv and
/// predictions.csv. A dataset whose class count differs from the
/// checkpoint's is a ConfigError.
EvalOutcome cmd_eval(const EvalConfig& config, std::ostream& log);

struct Prediction {
  std::filesystem::path path;
  bool ok = false;
  std::string error;
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// One line per image on `out`: path, label, probability, top-3 and the
/// full probability vector. Failures go to `err` and do not stop the rest.
std::vector<Prediction> cmd_predict(const std::filesystem::path& checkpoint,
                                    const std::vector<std::filesystem::path>& images, std::ostream& out,
                                    std::ostream& err);

struct InspectOptions {
  double train_fraction = 0.75;
};

/// Summarizes a checkpoint file (configuration, parameter count, classes)
/// or a dataset directory (per-class counts and a split preview).
void cmd_inspect(const std::filesystem::path& target, const InspectOptions& options, std::ostream& out);

}  // namespace panelvit::cli
