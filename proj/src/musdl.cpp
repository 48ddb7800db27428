#include "depest/musdl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depest/errors.hpp"

namespace depest::musdl {

void MusdlConfig::validate() const {
  if (n < 1 || m < 1) throw ConfigError("musdl: n and m must be positive");
  if (m_expanded < m || m_expanded % m != 0) throw ConfigError("musdl: m' must be a positive multiple of m");
  if (!(sigma > 0.0)) throw ConfigError("musdl: sigma must be positive");
}

double class_center(int s, const MusdlConfig& cfg) {
  return (static_cast<double>(s) + 0.5) * static_cast<double>(cfg.ratio()) - 0.5;
}

std::vector<double> soft_label_row(int s, const MusdlConfig& cfg) {
  cfg.validate();
  if (s < 0 || static_cast<std::size_t>(s) >= cfg.m) {
    throw DomainError("musdl: label " + std::to_string(s) + " outside [0, " + std::to_string(cfg.m) + ")");
  }
  const double mu = class_center(s, cfg);
  std::vector<double> row(cfg.m_expanded);
  double total = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double d = static_cast<double>(j) - mu;
    row[j] = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
    total += row[j];
  }
  for (double& v : row) v /= total;
  return row;
}

nn::Tensor transform_labels(std::span<const int> hard, const MusdlConfig& cfg) {
  if (hard.size() != cfg.n) {
    throw ShapeError("musdl: expected " + std::to_string(cfg.n) + " labels, got " + std::to_string(hard.size()));
  }
  nn::Tensor out({cfg.n, cfg.m_expanded});
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const auto row = soft_label_row(hard[i], cfg);
    std::copy(row.begin(), row.end(), out.data() + i * cfg.m_expanded);
  }
  return out;
}

double kl_loss(const nn::Tensor& target, const nn::Tensor& pred, double eps) {
  if (target.shape() != pred.shape()) {
    throw ShapeError("kl_loss: target " + nn::shape_string(target.shape()) + " vs prediction " +
                     nn::shape_string(pred.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target[i];
    if (t == 0.0) continue;
    total += t * std::log(t / std::max(pred[i], eps));
  }
  return total;
}

std::vector<int> decode_prediction(const nn::Tensor& pred, const MusdlConfig& cfg) {
  if (pred.rank() != 2 || pred.dim(1) != cfg.m_expanded) {
    throw ShapeError("decode_prediction: expected [n, " + std::to_string(cfg.m_expanded) + "], got " +
                     nn::shape_string(pred.shape()));
  }
  const std::size_t cols = pred.dim(1);
  std::vector<int> out(pred.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = pred.data() + i * cols;
    std::size_t best = 0;
    for (std::size_t j = 1; j < cols; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = static_cast<int>(best / cfg.ratio());
  }
  return out;
}

}  // namespace depest::musdl
