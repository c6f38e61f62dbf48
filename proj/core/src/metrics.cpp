#include "panelvit/metrics.hpp"

#include <cmath>
#include <numeric>

#include "panelvit/error.hpp"

namespace panelvit {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_total(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < num_classes; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_total(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < num_classes; ++t) s += at(t, c);
  return s;
}

ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t num_classes, std::vector<std::string> class_names) {
  if (labels.size() != predictions.size()) {
    throw DataError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                    std::to_string(predictions.size()) + " predictions");
  }
  if (class_names.empty()) {
    for (std::size_t c = 0; c < num_classes; ++c) class_names.push_back(std::to_string(c));
  }
  if (class_names.size() != num_classes) throw DataError("confusion: class name count does not match num_classes");
  ConfusionMatrix cm{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0), std::move(class_names)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes) {
      throw DataError("confusion: sample " + std::to_string(i) + " has truth " + std::to_string(labels[i]) +
                      " / prediction " + std::to_string(predictions[i]) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
    ++cm.counts[labels[i] * num_classes + predictions[i]];
  }
  return cm;
}

BinaryCounts binary_reduction(const ConfusionMatrix& cm, std::size_t c) {
  BinaryCounts b;
  b.tp = cm.at(c, c);
  b.fp = cm.col_total(c) - b.tp;
  b.fn = cm.row_total(c) - b.tp;
  b.tn = cm.total() - b.tp - b.fp - b.fn;
  return b;
}

double binary_mcc(const BinaryCounts& k) {
  const double tp = static_cast<double>(k.tp), tn = static_cast<double>(k.tn);
  const double fp = static_cast<double>(k.fp), fn = static_cast<double>(k.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport score(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw ContractError("score: confusion matrix is empty");
  const std::size_t C = cm.num_classes;

  MetricsReport r;
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < C; ++c) trace += cm.at(c, c);
  r.accuracy = ratio(trace, total);

  for (std::size_t c = 0; c < C; ++c) {
    const auto b = binary_reduction(cm, c);
    ClassScores s;
    s.name = c < cm.class_names.size() ? cm.class_names[c] : std::to_string(c);
    s.precision = ratio(b.tp, b.tp + b.fp);
    s.recall = ratio(b.tp, b.tp + b.fn);
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.support = b.tp + b.fn;
    r.precision_macro += s.precision;
    r.recall_macro += s.recall;
    r.f1_macro += s.f1;
    r.per_class.push_back(std::move(s));
  }
  r.precision_macro /= static_cast<double>(C);
  r.recall_macro /= static_cast<double>(C);
  r.f1_macro /= static_cast<double>(C);

  // Chance agreement from the marginals.
  const double n = static_cast<double>(total);
  double expected = 0.0;
  double sum_pt = 0.0, sum_p2 = 0.0, sum_t2 = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double t = static_cast<double>(cm.row_total(c));
    const double p = static_cast<double>(cm.col_total(c));
    expected += t * p;
    sum_pt += t * p;
    sum_p2 += p * p;
    sum_t2 += t * t;
  }
  const double pe = expected / (n * n);
  // Marginals concentrated on one class agreeing with the truth: P_e = 1 = P_o.
  r.cohen_kappa = pe < 1.0 ? (r.accuracy - pe) / (1.0 - pe) : 1.0;

  const double tr = static_cast<double>(trace);
  const double cov = tr * n - sum_pt;
  const double denom = (n * n - sum_p2) * (n * n - sum_t2);
  r.mcc = denom > 0.0 ? cov / std::sqrt(denom) : 0.0;
  return r;
}

}  // namespace panelvit
