#include "depest/phq_metrics.hpp"

#include <cmath>
#include <numeric>

#include "depest/errors.hpp"

namespace depest::phq {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::not_significant:
      return "not significant";
    case Severity::mild:
      return "mild";
    case Severity::moderate:
      return "moderate";
    case Severity::moderately_severe:
      return "moderately severe";
    case Severity::severe:
      return "severe";
  }
  return "unknown";
}

Severity severity_for_score(int score) {
  if (score < 0 || score > kMaxScore) throw DomainError("PHQ-8 score " + std::to_string(score) + " outside [0, 24]");
  if (score <= 4) return Severity::not_significant;
  if (score <= 9) return Severity::mild;
  if (score <= 14) return Severity::moderate;
  if (score <= 19) return Severity::moderately_severe;
  return Severity::severe;
}

PhqRecord derive_phq(const Subscores& subscores) {
  validate_subscores(subscores);
  PhqRecord r;
  r.subscores = subscores;
  r.score = std::accumulate(subscores.begin(), subscores.end(), 0);
  r.binary = r.score >= kBinaryThreshold ? 1 : 0;
  r.severity = severity_for_score(r.score);
  return r;
}

ParticipantResult aggregate_participant(std::string participant_id, Gender gender, std::vector<PhqRecord> clips) {
  if (clips.empty()) throw EmptyInputError("participant " + participant_id + " has no clips");
  ParticipantResult p;
  p.participant_id = std::move(participant_id);
  p.gender = gender;
  double total = 0.0;
  std::size_t depressed = 0;
  for (const auto& c : clips) {
    total += c.score;
    depressed += c.binary == 1 ? 1 : 0;
  }
  const double n = static_cast<double>(clips.size());
  p.score = total / n;
  p.depressed_fraction = static_cast<double>(depressed) / n;
  // Strictly more than half; an even split counts as not depressed.
  p.binary = 2 * depressed > clips.size() ? 1 : 0;
  p.clips = std::move(clips);
  return p;
}

Metrics compute_metrics(std::span<const Outcome> predictions, std::span<const Outcome> truths) {
  if (predictions.size() != truths.size()) {
    throw ShapeError("compute_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) throw EmptyInputError("compute_metrics: no samples");
  Metrics m;
  m.count = predictions.size();
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  double abs_err = 0.0, sq_err = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i].binary, t = truths[i].binary;
    correct += p == t ? 1 : 0;
    tp += (p == 1 && t == 1) ? 1 : 0;
    fp += (p == 1 && t == 0) ? 1 : 0;
    fn += (p == 0 && t == 1) ? 1 : 0;
    const double e = predictions[i].score - truths[i].score;
    abs_err += std::abs(e);
    sq_err += e * e;
  }
  const double n = static_cast<double>(m.count);
  m.accuracy = static_cast<double>(correct) / n;
  if (tp + fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_undefined = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  m.mae = abs_err / n;
  m.rmse = std::sqrt(sq_err / n);
  return m;
}

namespace {

std::optional<Metrics> metrics_for(std::span<const GenderedOutcome> outcomes, std::optional<Gender> only) {
  std::vector<Outcome> preds, truths;
  for (const auto& o : outcomes) {
    if (only && o.gender != *only) continue;
    preds.push_back(o.prediction);
    truths.push_back(o.truth);
  }
  if (preds.empty()) return std::nullopt;
  return compute_metrics(preds, truths);
}

}  // namespace

GenderSplitReport gender_split_report(std::span<const GenderedOutcome> outcomes) {
  if (outcomes.empty()) throw EmptyInputError("gender_split_report: no outcomes");
  GenderSplitReport r;
  r.overall = *metrics_for(outcomes, std::nullopt);
  r.female = metrics_for(outcomes, Gender::female);
  r.male = metrics_for(outcomes, Gender::male);
  if (r.female && r.male) {
    r.accuracy_gap_pp = 100.0 * std::abs(r.female->accuracy - r.male->accuracy);
    r.f1_gap_pp = 100.0 * std::abs(r.female->f1 - r.male->f1);
  }
  return r;
}

}  // namespace depest::phq
