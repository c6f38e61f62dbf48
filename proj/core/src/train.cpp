#include <algorithm>
#include <numeric>

#include "panelvit/error.hpp"
#include "panelvit/optim.hpp"

namespace panelvit {

namespace {

// Substream tags; one per consumer of epoch randomness.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

}  // namespace

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::distance(values.begin(), std::max_element(values.begin(), values.end())));
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    out.emplace_back(begin, std::min(n, begin + batch_size));
  }
  return out;
}

EpochStats train_epoch(ModelParams& params, const ModelConfig& config, const Dataset& train, AdamW& optimizer,
                       const NormStats& norm, const TrainOptions& options, std::uint64_t epoch) {
  if (train.images.empty()) throw DataError("train_epoch: training split is empty");

  std::vector<std::size_t> order(train.images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng::substream(options.seed, {kShuffleStream, epoch}).shuffle(std::span<std::size_t>(order));

  double loss_sum = 0.0;
  std::size_t correct = 0;
  const auto batches = batch_ranges(order.size(), options.batch_size);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto [begin, end] = batches[b];
    std::vector<Image> images;
    std::vector<std::size_t> labels;
    images.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t idx = order[i];
      auto rng = Rng::substream(options.augment.seed, {kAugmentStream, epoch, idx});
      const LabeledImage aug = augment(train.images[idx], options.augment, rng);
      images.push_back(norm.apply(aug.image));
      labels.push_back(aug.label);
    }

    Rng dropout_rng = Rng::substream(options.seed, {kDropoutStream, epoch, b});
    const Tensor logits = forward(images, params, config, {Mode::train, &dropout_rng, nullptr});
    const Tensor loss = sparse_ce_loss(logits, labels);
    loss.backward();
    optimizer.step();
    optimizer.zero_grad();

    loss_sum += loss.item() * static_cast<double>(labels.size());
    const std::size_t C = logits.dim(1);
    const auto z = logits.data();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (argmax(z.subspan(i * C, C)) == labels[i]) ++correct;
    }
  }
  const auto n = static_cast<double>(order.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

EvalResult evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& dataset,
                    const NormStats& norm, std::size_t batch_size) {
  if (dataset.images.empty()) throw DataError("evaluate: dataset is empty");
  NoGradGuard no_grad;
  EvalResult result;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& [begin, end] : batch_ranges(dataset.images.size(), batch_size)) {
    std::vector<Image> images;
    std::vector<std::size_t> labels;
    for (std::size_t i = begin; i < end; ++i) {
      images.push_back(norm.apply(dataset.images[i].image));
      labels.push_back(dataset.images[i].label);
    }
    const Tensor logits = forward(images, params, config, {});
    loss_sum += sparse_ce_loss(logits, labels).item() * static_cast<double>(labels.size());
    const std::size_t C = logits.dim(1);
    const auto z = logits.data();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto row = z.subspan(i * C, C);
      result.logits.emplace_back(row.begin(), row.end());
      result.predictions.push_back(argmax(row));
      if (result.predictions.back() == labels[i]) ++correct;
    }
  }
  const auto n = static_cast<double>(dataset.images.size());
  result.loss = loss_sum / n;
  result.accuracy = static_cast<double>(correct) / n;
  return result;
}

}  // namespace panelvit
