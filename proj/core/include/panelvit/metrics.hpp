#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace panelvit {

/// C×C counts; rows are ground truth, columns are predictions.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;  // row-major
  std::vector<std::string> class_names;

  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * num_classes + predicted]; }
  std::uint64_t total() const;
  std::uint64_t row_total(std::size_t c) const;
  std::uint64_t col_total(std::size_t c) const;
};

/// Tallies truth/prediction pairs. Class names default to "0", "1", ...
/// Throws DataError naming the first out-of-range index.
ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t num_classes, std::vector<std::string> class_names = {});

struct BinaryCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// One-vs-rest reduction for class `c`.
BinaryCounts binary_reduction(const ConfusionMatrix& cm, std::size_t c);

struct ClassScores {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

/// Aggregate precision/recall/F1 are unweighted means over classes.
/// Per-class scores with an empty denominator are 0. Kappa and MCC are
/// computed from the full matrix.
struct MetricsReport {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  double cohen_kappa = 0.0;
  double mcc = 0.0;
  std::vector<ClassScores> per_class;
};

/// Throws ContractError on an empty matrix.
MetricsReport score(const ConfusionMatrix& cm);

/// Two-class Matthews coefficient from one-vs-rest counts; 0 if any
/// marginal product vanishes.
double binary_mcc(const BinaryCounts& counts);

// ---------------------------------------------------------------------------
// Report artifacts

/// `key=value` lines: the six aggregate keys, then per_class.<name>.*.
std::string format_scores(const MetricsReport& report);
MetricsReport parse_scores(const std::string& text);

/// class,precision,recall,f1,support
std::string format_per_class_csv(const MetricsReport& report);
/// Header row and first column carry class names.
std::string format_confusion_csv(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_csv(const std::string& text);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

/// epoch,train_loss,train_acc,val_loss,val_acc; one row per epoch.
std::string format_curves_csv(std::span<const EpochRecord> curves);
std::vector<EpochRecord> parse_curves_csv(const std::string& text);

struct ReportPaths {
  std::filesystem::path scores;
  std::filesystem::path per_class;
  std::filesystem::path confusion;
};

/// Writes scores.txt, per_class.csv and confusion.csv into `dir`.
ReportPaths render_report(const MetricsReport& report, const ConfusionMatrix& cm, const std::filesystem::path& dir);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace panelvit
