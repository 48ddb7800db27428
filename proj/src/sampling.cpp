#include "depest/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "depest/errors.hpp"

namespace depest::sampling {

std::string_view to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::none:
      return "none";
    case SamplingMode::score:
      return "score";
    case SamplingMode::binary:
      return "binary";
    case SamplingMode::gender:
      return "gender";
  }
  return "unknown";
}

SamplingMode parse_sampling_mode(std::string_view name) {
  for (SamplingMode m : {SamplingMode::none, SamplingMode::score, SamplingMode::binary, SamplingMode::gender}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown sampling mode '" + std::string(name) + "'");
}

int class_of(const ClipLabel& label, SamplingMode mode) {
  switch (mode) {
    case SamplingMode::none:
      return 0;
    case SamplingMode::score:
      return std::accumulate(label.subscores.begin(), label.subscores.end(), 0);
    case SamplingMode::binary:
      return std::accumulate(label.subscores.begin(), label.subscores.end(), 0) >= 10 ? 1 : 0;
    case SamplingMode::gender:
      return label.gender == Gender::male ? 1 : 0;
  }
  return 0;
}

std::vector<double> compute_sampler_weights(std::span<const ClipLabel> labels, SamplingMode mode) {
  if (labels.empty()) throw EmptyInputError("compute_sampler_weights: no clips");
  std::map<int, std::size_t> counts;
  for (const auto& l : labels) ++counts[class_of(l, mode)];
  std::vector<double> w;
  w.reserve(labels.size());
  for (const auto& l : labels) w.push_back(1.0 / static_cast<double>(counts[class_of(l, mode)]));
  return w;
}

std::vector<std::size_t> weighted_draw(std::span<const double> weights, std::size_t count, nn::Rng& rng) {
  if (weights.empty()) throw EmptyInputError("weighted_draw: no weights");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("sampler weights must be positive and finite");
  }
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = dist(rng);
  return out;
}

ClassWeights dynamic_class_weights(std::span<const Subscores> batch) {
  if (batch.empty()) throw EmptyInputError("dynamic_class_weights: empty batch");
  ClassWeights cw;
  cw.per_class.assign(kNumSubscores, std::vector<double>(kSubscoreClasses, 0.0));
  cw.per_sample = nn::Tensor({kNumSubscores, batch.size()});
  for (std::size_t i = 0; i < kNumSubscores; ++i) {
    std::vector<std::size_t> counts(kSubscoreClasses, 0);
    for (const auto& s : batch) {
      validate_subscores(s);
      ++counts[static_cast<std::size_t>(s[i])];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      cw.per_class[i][c] = 1.0 / static_cast<double>(std::max<std::size_t>(1, counts[c]));
    }
    for (std::size_t n = 0; n < batch.size(); ++n) {
      cw.per_sample[i * batch.size() + n] = cw.per_class[i][static_cast<std::size_t>(batch[n][i])];
    }
  }
  return cw;
}

}  // namespace depest::sampling
