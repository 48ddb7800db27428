#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depest/types.hpp"

// PHQ-8 scoring, participant-level recombination of clip predictions, and
// evaluation metrics.

namespace depest::phq {

inline constexpr int kMaxScore = 24;
inline constexpr int kBinaryThreshold = 10;

enum class Severity { not_significant, mild, moderate, moderately_severe, severe };

std::string_view to_string(Severity s);
/// 0-4, 5-9, 10-14, 15-19, 20-24. Throws DomainError outside [0, 24].
Severity severity_for_score(int score);

struct PhqRecord {
  Subscores subscores{};
  int score = 0;
  int binary = 0;
  Severity severity = Severity::not_significant;
};

/// Throws DomainError for a subscore outside [0, 3].
PhqRecord derive_phq(const Subscores& subscores);

struct ParticipantResult {
  std::string participant_id;
  Gender gender = Gender::female;
  std::vector<PhqRecord> clips;
  double score = 0.0;  // mean clip score
  int binary = 0;      // 1 iff more than half the clips are depressed
  double depressed_fraction = 0.0;
};

/// Throws EmptyInputError when `clips` is empty.
ParticipantResult aggregate_participant(std::string participant_id, Gender gender, std::vector<PhqRecord> clips);

/// A score with its binary decision; the score may be a real-valued mean.
struct Outcome {
  double score = 0.0;
  int binary = 0;
};

struct Metrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  // Set when the metric's denominator was zero and 0 was reported instead.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Positive class = depressed (binary 1). Throws ShapeError on a length
/// mismatch and EmptyInputError on empty input.
Metrics compute_metrics(std::span<const Outcome> predictions, std::span<const Outcome> truths);

struct GenderedOutcome {
  Gender gender = Gender::female;
  Outcome prediction;
  Outcome truth;
};

/// Overall / female / male metrics plus |female - male| gaps. A group with
/// no members is reported as absent and the gaps are then absent too.
struct GenderSplitReport {
  Metrics overall;
  std::optional<Metrics> female;
  std::optional<Metrics> male;
  /// Percentage points.
  std::optional<double> accuracy_gap_pp;
  std::optional<double> f1_gap_pp;
};

GenderSplitReport gender_split_report(std::span<const GenderedOutcome> outcomes);

}  // namespace depest::phq
