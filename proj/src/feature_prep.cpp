#include "depest/feature_prep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "depest/errors.hpp"

namespace depest::features {

namespace {

std::vector<double> parse_row(const std::string& line, const std::filesystem::path& path, std::size_t line_no) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
    out.push_back(v);
    p = next;
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p < end) {
      if (*p != ',') throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected ','");
      ++p;
    }
  }
  return out;
}

template <typename Fn>
void for_each_data_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    fn(parse_row(line, path, line_no), line_no);
  }
}

std::ofstream open_out(const std::filesystem::path& path, int digits) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(digits);
  return out;
}

}  // namespace

NormalizedKeypoints normalize_keypoints(std::span<const KeypointFrame> frames) {
  if (frames.empty()) throw EmptyInputError("normalize_keypoints: no frames");
  NormalizedKeypoints out;
  out.frames.assign(frames.begin(), frames.end());
  for (std::size_t axis = 0; axis < 3; ++axis) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& f : frames) {
      for (std::size_t r = 0; r < kFacialKeypoints; ++r) {
        lo = std::min(lo, f.points[r][axis]);
        hi = std::max(hi, f.points[r][axis]);
      }
    }
    out.axis_min[axis] = lo;
    out.axis_max[axis] = hi;
    out.degenerate[axis] = !(hi > lo);
    for (auto& f : out.frames) {
      for (std::size_t r = 0; r < kFacialKeypoints; ++r) {
        double& v = f.points[r][axis];
        if (out.degenerate[axis]) {
          v = 0.5;
        } else {
          // Clamp guards the last ulp so the output stays inside [0, 1].
          v = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

std::vector<KeypointFrame> denormalize_keypoints(const NormalizedKeypoints& normalized) {
  std::vector<KeypointFrame> out = normalized.frames;
  for (auto& f : out) {
    for (std::size_t r = 0; r < kFacialKeypoints; ++r) {
      for (std::size_t axis = 0; axis < 3; ++axis) {
        const double lo = normalized.axis_min[axis];
        const double hi = normalized.axis_max[axis];
        f.points[r][axis] = normalized.degenerate[axis] ? lo : lo + f.points[r][axis] * (hi - lo);
      }
    }
  }
  return out;
}

std::vector<KeypointFrame> crop_by_timestamps(std::span<const KeypointFrame> frames,
                                              std::span<const Interval> intervals) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (!(intervals[i].start_s <= intervals[i].stop_s)) throw DomainError("crop interval has start after stop");
    if (i > 0 && intervals[i].start_s < intervals[i - 1].stop_s) {
      throw DomainError("crop intervals must be sorted and non-overlapping");
    }
  }
  std::vector<KeypointFrame> out;
  for (const auto& f : frames) {
    const double t = f.timestamp_s;
    auto it = std::upper_bound(intervals.begin(), intervals.end(), t,
                               [](double v, const Interval& iv) { return v < iv.start_s; });
    if (it == intervals.begin()) continue;
    --it;
    if (t >= it->start_s && t < it->stop_s) out.push_back(f);
  }
  if (out.empty()) throw EmptyInputError("crop_by_timestamps kept no frames");
  return out;
}

std::vector<SentenceEmbedding> ingest_embeddings(const std::filesystem::path& path) {
  std::vector<SentenceEmbedding> out;
  for_each_data_line(path, [&](std::vector<double> row, std::size_t line_no) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (row.size() != kEmbeddingDim + 2) {
      throw FormatError(where + ": expected " + std::to_string(kEmbeddingDim) + " embedding values, got " +
                        std::to_string(row.size() < 2 ? 0 : row.size() - 2));
    }
    SentenceEmbedding s;
    s.start_s = row[0];
    s.stop_s = row[1];
    if (!(s.start_s < s.stop_s)) throw FormatError(where + ": start must precede stop");
    if (!out.empty() && s.start_s < out.back().start_s) throw FormatError(where + ": start times decrease");
    s.vector.assign(row.begin() + 2, row.end());
    out.push_back(std::move(s));
  });
  return out;
}

void write_embeddings(const std::filesystem::path& path, std::span<const SentenceEmbedding> sentences) {
  auto out = open_out(path, 9);
  for (const auto& s : sentences) {
    if (s.vector.size() != kEmbeddingDim) throw ShapeError("sentence embedding must have 512 values");
    out << s.start_s << ',' << s.stop_s;
    for (double v : s.vector) out << ',' << static_cast<float>(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<KeypointFrame> read_keypoints(const std::filesystem::path& path) {
  std::vector<KeypointFrame> out;
  for_each_data_line(path, [&](std::vector<double> row, std::size_t line_no) {
    if (row.size() != 1 + kKeypointRows * 3) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 217 values, got " +
                        std::to_string(row.size()));
    }
    KeypointFrame f;
    f.timestamp_s = row[0];
    for (std::size_t r = 0; r < kKeypointRows; ++r) {
      for (std::size_t a = 0; a < 3; ++a) f.points[r][a] = row[1 + r * 3 + a];
    }
    out.push_back(f);
  });
  return out;
}

void write_keypoints(const std::filesystem::path& path, std::span<const KeypointFrame> frames,
                     int significant_digits) {
  auto out = open_out(path, significant_digits);
  for (const auto& f : frames) {
    out << f.timestamp_s;
    for (const auto& row : f.points) {
      for (double v : row) out << ',' << v;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void ClipConfig::validate() const {
  if (!(window_s > 0.0)) throw ConfigError("clip window must be positive");
  if (!(overlap_s >= 0.0 && overlap_s < window_s)) throw ConfigError("clip overlap must be in [0, window)");
  if (!(video_fps > 0.0)) throw ConfigError("video fps must be positive");
  if (max_sentences < 1) throw ConfigError("max_sentences must be at least 1");
  stft.validate();
}

std::size_t ClipConfig::visual_frames() const {
  return static_cast<std::size_t>(std::llround(window_s * video_fps));
}

std::size_t clip_count(double duration_s, double window_s, double overlap_s) {
  if (!(window_s > 0.0) || !(overlap_s >= 0.0) || !(overlap_s < window_s)) {
    throw ConfigError("clip window/overlap out of range");
  }
  if (duration_s < window_s) return 0;
  // The small tolerance absorbs representation error when D - window is an
  // exact multiple of the stride.
  const double k = (duration_s - window_s) / (window_s - overlap_s);
  return static_cast<std::size_t>(std::floor(k + 1e-9)) + 1;
}

std::vector<ClipSample> sliding_window_clips(const Session& session, const ClipConfig& cfg) {
  cfg.validate();
  session.audio.validate();
  validate_subscores(session.subscores);
  const int sr = session.audio.sample_rate_hz;
  const std::size_t window_samples = static_cast<std::size_t>(std::llround(cfg.window_s * sr));
  const std::size_t stride_samples = static_cast<std::size_t>(std::llround(cfg.stride_s() * sr));
  const std::size_t n = session.audio.samples.size();
  if (n < window_samples) {
    throw EmptyInputError("session " + session.participant_id + " is shorter than one clip window");
  }
  const std::size_t count = (n - window_samples) / stride_samples + 1;
  const std::size_t vis_frames = cfg.visual_frames();

  std::vector<ClipSample> clips;
  clips.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ClipSample clip;
    clip.participant_id = session.participant_id;
    clip.gender = session.gender;
    clip.subscores = session.subscores;
    clip.clip_index = k;
    clip.start_s = static_cast<double>(k) * cfg.stride_s();
    const double stop_s = clip.start_s + cfg.window_s;

    signal::Waveform seg;
    seg.sample_rate_hz = sr;
    const auto first = session.audio.samples.begin() + static_cast<std::ptrdiff_t>(k * stride_samples);
    seg.samples.assign(first, first + static_cast<std::ptrdiff_t>(window_samples));
    if (cfg.reclip) {
      seg = signal::reclip_audio(seg, *cfg.reclip);
      seg.samples.resize(window_samples, 0.0);
    }
    const auto grid = signal::standardize(signal::log_mel_spectrogram(seg, cfg.stft, cfg.mel));
    clip.audio = nn::Tensor({grid.bins, grid.frames}, grid.values);
    clip.audio_degenerate = grid.degenerate;

    clip.visual = nn::Tensor({vis_frames, kKeypointRows, 3});
    std::size_t f = 0;
    for (const auto& kp : session.keypoints) {
      if (kp.timestamp_s < clip.start_s || kp.timestamp_s >= stop_s) continue;
      if (f == vis_frames) break;
      double* dst = clip.visual.data() + f * kKeypointRows * 3;
      for (std::size_t r = 0; r < kKeypointRows; ++r) {
        for (std::size_t a = 0; a < 3; ++a) dst[r * 3 + a] = kp.points[r][a];
      }
      ++f;
    }

    clip.text = nn::Tensor({cfg.max_sentences, kEmbeddingDim});
    std::size_t s = 0;
    for (const auto& sent : session.sentences) {
      const double mid = sent.midpoint_s();
      if (mid < clip.start_s || mid >= stop_s) continue;
      if (s == cfg.max_sentences) break;
      if (sent.vector.size() != kEmbeddingDim) throw ShapeError("sentence embedding must have 512 values");
      std::copy(sent.vector.begin(), sent.vector.end(), clip.text.data() + s * kEmbeddingDim);
      ++s;
    }
    clip.sentence_count = s;
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace depest::features
