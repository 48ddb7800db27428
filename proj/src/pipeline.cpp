#include "depest/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "depest/errors.hpp"

namespace depest::pipeline {

namespace fs = std::filesystem;

std::vector<features::ClipSample> clips_from_sessions(std::span<const features::Session> sessions,
                                                      const features::ClipConfig& cfg) {
  std::vector<features::ClipSample> out;
  for (const auto& s : sessions) {
    auto clips = features::sliding_window_clips(s, cfg);
    for (auto& c : clips) out.push_back(std::move(c));
  }
  return out;
}

std::size_t preprocess(const fs::path& manifest_path, const config::RunConfig& cfg, const fs::path& clips_dir) {
  const auto manifest = data::read_manifest(manifest_path);
  std::vector<features::Session> sessions;
  for (const auto& e : manifest.entries) {
    if (e.gb_augmented && !cfg.gender_balance) continue;
    sessions.push_back(data::load_session(manifest, e));
  }
  if (sessions.empty()) throw EmptyInputError("manifest selects no sessions");
  const auto clips = clips_from_sessions(sessions, cfg.clip);
  if (fs::exists(clips_dir)) fs::remove_all(clips_dir);
  data::write_clips(clips_dir, clips);
  return clips.size();
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

nlohmann::json metrics_object(const phq::Metrics& m) {
  return {{"count", m.count},       {"accuracy", m.accuracy},
          {"precision", m.precision}, {"recall", m.recall},
          {"f1", m.f1},             {"mae", m.mae},
          {"rmse", m.rmse},         {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined}, {"f1_undefined", m.f1_undefined}};
}

}  // namespace

void write_predictions_tsv(const fs::path& path, std::span<const train::ClipPrediction> preds) {
  auto out = open_out(path);
  out << "participant_id\tgender\tclip_index\tpred_subscores\ttrue_subscores\n";
  for (const auto& p : preds) {
    out << p.participant_id << '\t' << to_string(p.gender) << '\t' << p.clip_index << '\t'
        << format_subscores(p.predicted.subscores) << '\t' << format_subscores(p.truth.subscores) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<train::ClipPrediction> read_predictions_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("participant_id\t", 0) != 0) {
    throw FormatError(path.string() + ": missing predictions header");
  }
  std::vector<train::ClipPrediction> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, gender, index, pred, truth;
    if (!std::getline(row, id, '\t') || !std::getline(row, gender, '\t') || !std::getline(row, index, '\t') ||
        !std::getline(row, pred, '\t') || !std::getline(row, truth, '\t')) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 5 columns");
    }
    train::ClipPrediction p;
    p.participant_id = id;
    p.gender = parse_gender(gender);
    p.clip_index = std::stoul(index);
    p.predicted = phq::derive_phq(parse_subscores(pred));
    p.truth = phq::derive_phq(parse_subscores(truth));
    out.push_back(std::move(p));
  }
  if (out.empty()) throw EmptyInputError(path.string() + ": no predictions");
  return out;
}

void write_metrics_tsv(const fs::path& path, const phq::Metrics& m) {
  auto out = open_out(path);
  out << "metric\tvalue\n"
      << "count\t" << m.count << '\n'
      << "accuracy\t" << m.accuracy << '\n'
      << "precision\t" << m.precision << (m.precision_undefined ? "\t(undefined)" : "") << '\n'
      << "recall\t" << m.recall << (m.recall_undefined ? "\t(undefined)" : "") << '\n'
      << "f1\t" << m.f1 << (m.f1_undefined ? "\t(undefined)" : "") << '\n'
      << "mae\t" << m.mae << '\n'
      << "rmse\t" << m.rmse << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::string metrics_json(const phq::Metrics& m, const phq::GenderSplitReport& split) {
  nlohmann::json j;
  j["overall"] = metrics_object(m);
  j["female"] = split.female ? metrics_object(*split.female) : nlohmann::json("absent");
  j["male"] = split.male ? metrics_object(*split.male) : nlohmann::json("absent");
  j["accuracy_gap_pp"] = split.accuracy_gap_pp ? nlohmann::json(*split.accuracy_gap_pp) : nlohmann::json("absent");
  j["f1_gap_pp"] = split.f1_gap_pp ? nlohmann::json(*split.f1_gap_pp) : nlohmann::json("absent");
  return j.dump(2) + "\n";
}

void write_participants_tsv(const fs::path& path, std::span<const train::ParticipantPair> pairs) {
  auto out = open_out(path);
  out << "participant_id\tgender\tclips\tpred_score\tpred_binary\tpred_depressed_fraction\ttrue_score\ttrue_binary\n";
  for (const auto& p : pairs) {
    out << p.predicted.participant_id << '\t' << to_string(p.predicted.gender) << '\t' << p.predicted.clips.size()
        << '\t' << p.predicted.score << '\t' << p.predicted.binary << '\t' << p.predicted.depressed_fraction << '\t'
        << p.truth.score << '\t' << p.truth.binary << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string gender_table(const phq::GenderSplitReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto pct = [&](const std::optional<phq::Metrics>& m, bool f1) -> std::string {
    if (!m) return "absent";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * (f1 ? m->f1 : m->accuracy);
    return s.str();
  };
  auto gap = [&](const std::optional<double>& g) -> std::string {
    if (!g) return "absent";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << *g;
    return s.str();
  };
  out << "metric\toverall\tfemale\tmale\tgap_pp\n";
  out << "accuracy\t" << 100.0 * r.overall.accuracy << '\t' << pct(r.female, false) << '\t' << pct(r.male, false)
      << '\t' << gap(r.accuracy_gap_pp) << '\n';
  out << "f1\t" << 100.0 * r.overall.f1 << '\t' << pct(r.female, true) << '\t' << pct(r.male, true) << '\t'
      << gap(r.f1_gap_pp) << '\n';
  return out.str();
}

}  // namespace depest::pipeline
