#include "depest/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "depest/errors.hpp"
#include "depest/nn/layers.hpp"
#include "depest/wav_io.hpp"

namespace depest::synth {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Tone frequencies sit in separate mel bands below 4 kHz.
constexpr std::array<double, kNumSubscores> kToneHz{220.0, 370.0, 560.0, 810.0, 1130.0, 1550.0, 2100.0, 2800.0};
// Constant-amplitude reference tones above the item band. Clip features are
// standardized, which erases overall loudness; these dominate the clip mean
// and spread so the item tones stay readable against a fixed yardstick.
constexpr std::array<double, 6> kReferenceHz{3300.0, 3900.0, 4600.0, 5400.0, 6300.0, 7300.0};
constexpr double kReferenceAmp = 0.08;

// Log power is linear in the item score: amplitude doubles per step.
double item_amplitude(int score) { return 0.01 * std::exp2(score); }
// Fixed across corpora so every participant shares a face and embedding basis.
constexpr std::uint64_t kFixedSeed = 0x5eed5eedULL;

Subscores draw_subscores(int total, nn::Rng& rng) {
  Subscores s{};
  std::uniform_int_distribution<std::size_t> pick(0, kNumSubscores - 1);
  for (int added = 0; added < total;) {
    const std::size_t i = pick(rng);
    if (s[i] < kSubscoreClasses - 1) {
      ++s[i];
      ++added;
    }
  }
  return s;
}

struct Face {
  std::array<std::array<double, 3>, features::kFacialKeypoints> base{};
  std::array<double, features::kFacialKeypoints> phase{};
};

const Face& fixed_face() {
  static const Face face = [] {
    Face f;
    nn::Rng rng(kFixedSeed);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    std::uniform_real_distribution<double> ph(0.0, kTwoPi);
    for (std::size_t r = 0; r < features::kFacialKeypoints; ++r) {
      const double a = kTwoPi * static_cast<double>(r) / static_cast<double>(features::kFacialKeypoints);
      f.base[r] = {std::cos(a) + jitter(rng), 1.3 * std::sin(a) + jitter(rng), 0.2 * std::cos(2 * a) + jitter(rng)};
      f.phase[r] = ph(rng);
    }
    return f;
  }();
  return face;
}

const std::vector<std::vector<double>>& embedding_basis() {
  static const std::vector<std::vector<double>> basis = [] {
    nn::Rng rng(kFixedSeed + 1);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> b(kNumSubscores, std::vector<double>(features::kEmbeddingDim));
    for (auto& u : b) {
      double norm = 0.0;
      for (double& v : u) {
        v = g(rng);
        norm += v * v;
      }
      for (double& v : u) v /= std::sqrt(norm);
    }
    return b;
  }();
  return basis;
}

}  // namespace

void SynthConfig::validate() const {
  if (participants < 2) throw ConfigError("synthetic corpus needs at least 2 participants to hold both classes");
  if (!(min_duration_s > 0.0 && min_duration_s <= max_duration_s)) {
    throw ConfigError("synthetic durations need 0 < min <= max");
  }
  if (sample_rate_hz < 2 * 3000) throw ConfigError("synthetic sample rate too low for the tone set");
  if (!(video_fps > 0.0)) throw ConfigError("video fps must be positive");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
}

std::vector<ParticipantPlan> plan_participants(const SynthConfig& cfg) {
  cfg.validate();
  nn::Rng rng(cfg.seed);
  std::uniform_real_distribution<double> dur(cfg.min_duration_s, cfg.max_duration_s);
  std::uniform_int_distribution<int> high(12, 24), low(0, 7);
  std::vector<ParticipantPlan> plans;
  for (std::size_t i = 0; i < cfg.participants; ++i) {
    ParticipantPlan p;
    char id[16];
    std::snprintf(id, sizeof id, "P%03zu", i + 1);
    p.participant_id = id;
    const bool depressed = i % 2 == 0;
    p.gender = ((i / 2 + i) % 2 == 0) ? Gender::female : Gender::male;
    p.subscores = draw_subscores(depressed ? high(rng) : low(rng), rng);
    p.duration_s = dur(rng);
    p.seed = rng();
    plans.push_back(p);
  }
  return plans;
}

features::Session synthesize_session(const ParticipantPlan& plan, const SynthConfig& cfg) {
  nn::Rng rng(plan.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  features::Session s;
  s.participant_id = plan.participant_id;
  s.gender = plan.gender;
  s.subscores = plan.subscores;
  int total = 0;
  for (int v : plan.subscores) total += v;

  // Audio.
  s.audio.sample_rate_hz = cfg.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(plan.duration_s * cfg.sample_rate_hz));
  s.audio.samples.assign(n, 0.0);
  const double pitch = plan.gender == Gender::male ? 0.97 : 1.03;
  for (std::size_t i = 0; i < kNumSubscores + kReferenceHz.size(); ++i) {
    const bool reference = i >= kNumSubscores;
    const double amp = reference ? kReferenceAmp : item_amplitude(plan.subscores[i]);
    const double hz = reference ? kReferenceHz[i - kNumSubscores] : kToneHz[i];
    const double w = kTwoPi * hz * pitch / cfg.sample_rate_hz;
    const double phase = kTwoPi * uni(rng);
    // Incremental rotation keeps this loop cheap over minutes of audio.
    const double c = std::cos(w), sn = std::sin(w);
    double re = std::cos(phase), im = std::sin(phase);
    for (std::size_t t = 0; t < n; ++t) {
      s.audio.samples[t] += amp * im;
      const double nre = re * c - im * sn;
      im = re * sn + im * c;
      re = nre;
      if ((t & 4095) == 4095) {
        const double mag = std::hypot(re, im);
        re /= mag;
        im /= mag;
      }
    }
  }
  for (double& v : s.audio.samples) v += cfg.noise * gauss(rng);

  // Keypoints.
  const Face& face = fixed_face();
  const auto frames = static_cast<std::size_t>(std::floor(plan.duration_s * cfg.video_fps));
  const double tilt = 0.05 * total;
  s.keypoints.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    auto& kp = s.keypoints[f];
    kp.timestamp_s = static_cast<double>(f) / cfg.video_fps;
    for (std::size_t r = 0; r < features::kFacialKeypoints; ++r) {
      const std::size_t group = r % kNumSubscores;
      const double amp = 0.01 + 0.03 * plan.subscores[group];
      const double osc = std::sin(kTwoPi * (0.5 + 0.1 * group) * kp.timestamp_s + face.phase[r]);
      for (std::size_t a = 0; a < 3; ++a) {
        kp.points[r][a] = face.base[r][a] + amp * osc * (a == 2 ? 0.5 : 1.0) + 0.002 * gauss(rng);
      }
    }
    for (std::size_t g = 0; g < features::kGazeRows; ++g) {
      const double yaw = 0.1 * std::sin(0.3 * kp.timestamp_s + g) + 0.02 * gauss(rng);
      const double pitch_angle = -tilt * 0.05 + 0.02 * gauss(rng);
      kp.points[features::kFacialKeypoints + g] = {std::sin(yaw) * std::cos(pitch_angle), std::sin(pitch_angle),
                                                   std::cos(yaw) * std::cos(pitch_angle)};
    }
  }

  // Sentence embeddings.
  const auto& basis = embedding_basis();
  std::uniform_real_distribution<double> len(2.5, 4.5), gap(0.5, 2.0);
  for (double t = gap(rng); ; ) {
    const double stop = t + len(rng);
    if (stop > plan.duration_s) break;
    features::SentenceEmbedding e;
    e.start_s = t;
    e.stop_s = stop;
    e.vector.assign(features::kEmbeddingDim, 0.0);
    for (std::size_t i = 0; i < kNumSubscores; ++i) {
      for (std::size_t j = 0; j < features::kEmbeddingDim; ++j) e.vector[j] += plan.subscores[i] * basis[i][j] / 3.0;
    }
    for (double& v : e.vector) v += 0.3 * gauss(rng) / std::sqrt(static_cast<double>(features::kEmbeddingDim));
    s.sentences.push_back(std::move(e));
    t = stop + gap(rng);
  }
  return s;
}

data::DatasetManifest write_synthetic_corpus(const SynthConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir / "raw");
  data::DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (const auto& plan : plan_participants(cfg)) {
    const auto session = synthesize_session(plan, cfg);
    data::ManifestEntry e;
    e.participant_id = plan.participant_id;
    e.gender = plan.gender;
    e.subscores = plan.subscores;
    e.audio = fs::path("raw") / (plan.participant_id + "_audio.wav");
    e.keypoints = fs::path("raw") / (plan.participant_id + "_keypoints.csv");
    e.embeddings = fs::path("raw") / (plan.participant_id + "_embeddings.csv");
    signal::write_wav(out_dir / e.audio, session.audio);
    features::write_keypoints(out_dir / e.keypoints, session.keypoints, 9);
    features::write_embeddings(out_dir / e.embeddings, session.sentences);
    manifest.entries.push_back(std::move(e));
  }
  data::write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

std::vector<features::Session> synthesize_sessions(const SynthConfig& cfg) {
  std::vector<features::Session> out;
  for (const auto& plan : plan_participants(cfg)) {
    auto s = synthesize_session(plan, cfg);
    s.keypoints = features::normalize_keypoints(s.keypoints).frames;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace depest::synth
