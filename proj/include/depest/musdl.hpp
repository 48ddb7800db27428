#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "depest/nn/tensor.hpp"

// Soft-label distribution learning: each hard subscore becomes a discrete
// Gaussian over an expanded class grid, the model is trained with KL
// divergence against it, and predictions decode back by integer division.

namespace depest::musdl {

struct MusdlConfig {
  std::size_t n = 8;             // subscores
  std::size_t m = 4;             // hard classes per subscore
  std::size_t m_expanded = 32;   // expanded classes
  double sigma = 5.0;            // in expanded-index units

  /// m_expanded / m; validate() guarantees it is an integer >= 1.
  std::size_t ratio() const { return m_expanded / m; }
  void validate() const;
};

inline constexpr double kKlEps = 1e-12;

/// Center of hard class s on the expanded grid: (s + 0.5) r - 0.5.
double class_center(int s, const MusdlConfig& cfg);

/// Normalized discrete Gaussian over the expanded grid for one hard label.
std::vector<double> soft_label_row(int s, const MusdlConfig& cfg);

/// [n, m_expanded] soft targets. Throws DomainError for a label outside
/// [0, m) and ShapeError when hard.size() != n.
nn::Tensor transform_labels(std::span<const int> hard, const MusdlConfig& cfg);

/// sum_i sum_j t_ij log(t_ij / max(p_ij, eps)); zero-target terms skipped.
double kl_loss(const nn::Tensor& target, const nn::Tensor& pred, double eps = kKlEps);

/// floor(argmax_j pred_ij / r) per row; ties go to the lowest index.
std::vector<int> decode_prediction(const nn::Tensor& pred, const MusdlConfig& cfg);

}  // namespace depest::musdl
