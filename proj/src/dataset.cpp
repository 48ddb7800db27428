#include "depest/dataset.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "depest/errors.hpp"
#include "depest/tensor_io.hpp"
#include "depest/wav_io.hpp"

namespace depest::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

const char* kManifestHeader = "participant_id\tgender\tsubscores\taudio\tkeypoints\tembeddings\tgb_augmented";
const char* kClipIndexHeader = "bundle\tparticipant_id\tgender\tclip_index\tscore";

}  // namespace

fs::path DatasetManifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

DatasetManifest read_manifest(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != kManifestHeader) {
    throw FormatError(path.string() + ": missing manifest header");
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::set<std::string> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto cols = split_tabs(lines[i]);
    if (cols.size() != 7) throw FormatError(where + ": expected 7 columns, got " + std::to_string(cols.size()));
    ManifestEntry e;
    e.participant_id = cols[0];
    if (e.participant_id.empty()) throw FormatError(where + ": empty participant id");
    if (!ids.insert(e.participant_id).second) throw FormatError(where + ": duplicate id " + e.participant_id);
    e.gender = parse_gender(cols[1]);
    try {
      e.subscores = parse_subscores(cols[2]);
    } catch (const Error& err) {
      throw FormatError(where + ": " + err.what());
    }
    e.audio = cols[3];
    e.keypoints = cols[4];
    e.embeddings = cols[5];
    if (cols[6] != "0" && cols[6] != "1") throw FormatError(where + ": gb_augmented must be 0 or 1");
    e.gb_augmented = cols[6] == "1";
    for (const auto* p : {&e.audio, &e.keypoints, &e.embeddings}) {
      if (!fs::exists(m.resolve(*p))) throw IoError(where + ": missing file " + m.resolve(*p).string());
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  auto out = open_out(path);
  out << kManifestHeader << '\n';
  for (const auto& e : manifest.entries) {
    out << e.participant_id << '\t' << to_string(e.gender) << '\t' << format_subscores(e.subscores) << '\t'
        << e.audio.generic_string() << '\t' << e.keypoints.generic_string() << '\t' << e.embeddings.generic_string()
        << '\t' << (e.gb_augmented ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

features::Session load_session(const DatasetManifest& manifest, const ManifestEntry& entry) {
  features::Session s;
  s.participant_id = entry.participant_id;
  s.gender = entry.gender;
  s.subscores = entry.subscores;
  s.audio = signal::read_wav(manifest.resolve(entry.audio));
  s.keypoints = features::normalize_keypoints(features::read_keypoints(manifest.resolve(entry.keypoints))).frames;
  s.sentences = features::ingest_embeddings(manifest.resolve(entry.embeddings));
  return s;
}

std::string bundle_name(const features::ClipSample& clip) {
  std::ostringstream out;
  out << clip.participant_id << '_' << std::setw(3) << std::setfill('0') << clip.clip_index;
  return out.str();
}

void write_clip_bundle(const fs::path& dir, const features::ClipSample& clip) {
  fs::create_directories(dir);
  io::write_tensor(dir / "audio.mftk", clip.audio);
  io::write_tensor(dir / "visual.mftk", clip.visual);
  io::write_tensor(dir / "text.mftk", clip.text);
  auto out = open_out(dir / "meta.txt");
  out << std::setprecision(17);
  out << "participant_id = " << clip.participant_id << '\n'
      << "gender = " << to_string(clip.gender) << '\n'
      << "subscores = " << format_subscores(clip.subscores) << '\n'
      << "clip_index = " << clip.clip_index << '\n'
      << "start_s = " << clip.start_s << '\n'
      << "sentence_count = " << clip.sentence_count << '\n'
      << "audio_degenerate = " << (clip.audio_degenerate ? 1 : 0) << '\n';
  if (!out) throw IoError("failed writing " + (dir / "meta.txt").string());
}

features::ClipSample read_clip_bundle(const fs::path& dir) {
  features::ClipSample c;
  c.audio = io::read_tensor(dir / "audio.mftk");
  c.visual = io::read_tensor(dir / "visual.mftk");
  c.text = io::read_tensor(dir / "text.mftk");
  std::set<std::string> seen;
  for (const auto& line : read_lines(dir / "meta.txt")) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw FormatError((dir / "meta.txt").string() + ": malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    seen.insert(key);
    if (key == "participant_id") {
      c.participant_id = value;
    } else if (key == "gender") {
      c.gender = parse_gender(value);
    } else if (key == "subscores") {
      c.subscores = parse_subscores(value);
    } else if (key == "clip_index") {
      c.clip_index = std::stoul(value);
    } else if (key == "start_s") {
      c.start_s = std::stod(value);
    } else if (key == "sentence_count") {
      c.sentence_count = std::stoul(value);
    } else if (key == "audio_degenerate") {
      c.audio_degenerate = value == "1";
    }
  }
  for (const char* k : {"participant_id", "gender", "subscores", "clip_index"}) {
    if (!seen.contains(k)) throw FormatError((dir / "meta.txt").string() + ": missing key " + k);
  }
  return c;
}

void write_clips(const fs::path& clips_dir, std::span<const features::ClipSample> clips) {
  fs::create_directories(clips_dir);
  auto index = open_out(clips_dir / "clips.tsv");
  index << kClipIndexHeader << '\n';
  for (const auto& c : clips) {
    const std::string name = bundle_name(c);
    write_clip_bundle(clips_dir / name, c);
    int score = 0;
    for (int s : c.subscores) score += s;
    index << name << '\t' << c.participant_id << '\t' << to_string(c.gender) << '\t' << c.clip_index << '\t'
          << score << '\n';
  }
  if (!index) throw IoError("failed writing " + (clips_dir / "clips.tsv").string());
}

std::vector<features::ClipSample> read_clips(const fs::path& clips_dir) {
  const auto lines = read_lines(clips_dir / "clips.tsv");
  if (lines.empty() || lines.front() != kClipIndexHeader) {
    throw FormatError((clips_dir / "clips.tsv").string() + ": missing header");
  }
  std::vector<features::ClipSample> clips;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cols = split_tabs(lines[i]);
    if (cols.size() != 5) throw FormatError((clips_dir / "clips.tsv").string() + ": malformed row");
    clips.push_back(read_clip_bundle(clips_dir / cols[0]));
  }
  if (clips.empty()) throw EmptyInputError("no clips listed in " + (clips_dir / "clips.tsv").string());
  return clips;
}

}  // namespace depest::data
