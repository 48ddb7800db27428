#include "depest/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "depest/errors.hpp"

namespace depest::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " +
                    std::string(expected));
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_size(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v, "a comma-separated list");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
};

template <typename Member>
Field size_field(std::string key, Member member) {
  return {std::move(key), [member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_size(k, v); }};
}

template <typename Member>
Field double_field(std::string key, Member member) {
  return {std::move(key), [member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_double(k, v); }};
}

template <typename Member>
Field bool_field(std::string key, Member member) {
  return {std::move(key), [member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); }};
}

void add_branch_fields(std::vector<Field>& f, const std::string& name, model::Modality m) {
  const std::string p = "model." + name + ".";
  f.push_back({p + "conv_channels", [m](const RunConfig& c) { return fmt(c.model.branch(m).conv_channels); },
               [m](RunConfig& c, std::string_view k, std::string_view v) {
                 c.model.branch(m).conv_channels = parse_list(k, v);
               }});
  f.push_back(size_field(p + "kernel", [m](RunConfig& c) -> std::size_t& { return c.model.branch(m).kernel; }));
  f.push_back(size_field(p + "pool", [m](RunConfig& c) -> std::size_t& { return c.model.branch(m).pool; }));
  f.push_back(
      size_field(p + "lstm_hidden", [m](RunConfig& c) -> std::size_t& { return c.model.branch(m).lstm_hidden; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"model.modalities", [](const RunConfig& c) { return std::string(model::to_string(c.model.modalities)); },
                 [](RunConfig& c, std::string_view, std::string_view v) {
                   c.model.modalities = model::parse_modality_set(v);
                 }});
    f.push_back({"model.fusion", [](const RunConfig& c) { return std::string(fusion::to_string(c.model.fusion)); },
                 [](RunConfig& c, std::string_view, std::string_view v) {
                   c.model.fusion = fusion::parse_fusion_method(v);
                 }});
    f.push_back(size_field("model.feature_dim", [](RunConfig& c) -> std::size_t& { return c.model.feature_dim; }));
    add_branch_fields(f, "audio", model::Modality::audio);
    add_branch_fields(f, "visual", model::Modality::visual);
    add_branch_fields(f, "text", model::Modality::text);

    f.push_back(size_field("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }));
    f.push_back(size_field("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; }));
    f.push_back(double_field("train.learning_rate",
                             [](RunConfig& c) -> double& { return c.train.sam.base.learning_rate; }));
    f.push_back(double_field("train.momentum", [](RunConfig& c) -> double& { return c.train.sam.base.momentum; }));
    f.push_back(bool_field("train.sam", [](RunConfig& c) -> bool& { return c.train.use_sam; }));
    f.push_back(double_field("train.sam_rho", [](RunConfig& c) -> double& { return c.train.sam.rho; }));
    f.push_back(bool_field("train.dynamic_weights", [](RunConfig& c) -> bool& { return c.train.dynamic_weights; }));
    f.push_back({"train.sampling", [](const RunConfig& c) { return std::string(sampling::to_string(c.train.sampling)); },
                 [](RunConfig& c, std::string_view, std::string_view v) {
                   c.train.sampling = sampling::parse_sampling_mode(v);
                 }});
    f.push_back({"train.target_accuracy",
                 [](const RunConfig& c) { return c.train.target_accuracy ? fmt(*c.train.target_accuracy) : "none"; },
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v == "none" || v.empty()) {
                     c.train.target_accuracy.reset();
                   } else {
                     c.train.target_accuracy = parse_double(k, v);
                   }
                 }});
    f.push_back(bool_field("train.round_float32", [](RunConfig& c) -> bool& { return c.train.round_float32; }));
    f.push_back({"train.seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = parse_u64(k, v); }});

    f.push_back(double_field("musdl.sigma", [](RunConfig& c) -> double& { return c.train.musdl.sigma; }));
    f.push_back(size_field("musdl.m_expanded", [](RunConfig& c) -> std::size_t& { return c.train.musdl.m_expanded; }));

    f.push_back(double_field("data.window_s", [](RunConfig& c) -> double& { return c.clip.window_s; }));
    f.push_back(double_field("data.overlap_s", [](RunConfig& c) -> double& { return c.clip.overlap_s; }));
    f.push_back(double_field("data.video_fps", [](RunConfig& c) -> double& { return c.clip.video_fps; }));
    f.push_back(size_field("data.max_sentences", [](RunConfig& c) -> std::size_t& { return c.clip.max_sentences; }));
    f.push_back(size_field("data.stft.window_len", [](RunConfig& c) -> std::size_t& { return c.clip.stft.window_len; }));
    f.push_back(size_field("data.stft.hop", [](RunConfig& c) -> std::size_t& { return c.clip.stft.hop; }));
    f.push_back(size_field("data.stft.fft_len", [](RunConfig& c) -> std::size_t& { return c.clip.stft.fft_len; }));
    f.push_back(size_field("data.mel.n_mels", [](RunConfig& c) -> std::size_t& { return c.clip.mel.n_mels; }));
    f.push_back(double_field("data.mel.f_min_hz", [](RunConfig& c) -> double& { return c.clip.mel.f_min_hz; }));
    f.push_back(double_field("data.mel.f_max_hz", [](RunConfig& c) -> double& { return c.clip.mel.f_max_hz; }));
    f.push_back({"data.reclip", [](const RunConfig& c) { return fmt(c.clip.reclip.has_value()); },
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   if (parse_bool(k, v)) {
                     if (!c.clip.reclip) c.clip.reclip.emplace();
                   } else {
                     c.clip.reclip.reset();
                   }
                 }});
    f.push_back(bool_field("data.gender_balance", [](RunConfig& c) -> bool& { return c.gender_balance; }));
    return f;
  }();
  return table;
}

void sync_derived(RunConfig& c) {
  c.model.n_mels = c.clip.mel.n_mels;
  c.model.classes = c.train.musdl.m_expanded;
  if (c.clip.reclip) {
    c.clip.reclip->frame_len = c.clip.stft.window_len;
    c.clip.reclip->hop = c.clip.stft.hop;
  }
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, std::string_view origin) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw FormatError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw FormatError(where + ": empty key");
    if (kv.has(key)) throw FormatError(where + ": duplicate key '" + key + "'");
    kv.values_[key] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

bool KeyValues::has(std::string_view key) const { return values_.find(key) != values_.end(); }

void KeyValues::set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

std::optional<std::string> KeyValues::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  clip.validate();
  if (model.n_mels != clip.mel.n_mels) throw ConfigError("model and data mel bin counts differ");
  if (model.classes != train.musdl.m_expanded) throw ConfigError("model classes differ from musdl.m_expanded");
}

RunConfig resolve(const KeyValues& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv.entries()) {
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(cfg, key, value);
  }
  sync_derived(cfg);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return resolve(KeyValues::load(path)); }

std::string to_text(const RunConfig& cfg) {
  std::map<std::string, std::string> sorted;
  for (const auto& f : fields()) sorted[f.key] = f.get(cfg);
  std::string out;
  for (const auto& [k, v] : sorted) out += k + " = " + v + "\n";
  return out;
}

std::string model_text(const model::ModelConfig& cfg) {
  RunConfig rc;
  rc.model = cfg;
  std::map<std::string, std::string> sorted;
  for (const auto& f : fields()) {
    if (f.key.starts_with("model.")) sorted[f.key] = f.get(rc);
  }
  sorted["model.n_mels"] = fmt(cfg.n_mels);
  sorted["model.classes"] = fmt(cfg.classes);
  sorted["model.keypoint_rows"] = fmt(cfg.keypoint_rows);
  sorted["model.text_dim"] = fmt(cfg.text_dim);
  std::string out;
  for (const auto& [k, v] : sorted) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t model_hash(const model::ModelConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : model_text(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace depest::config
