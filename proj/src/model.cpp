#include "depest/model.hpp"

#include <algorithm>
#include <array>

#include "depest/errors.hpp"
#include "depest/musdl.hpp"
#include "depest/nn/ops.hpp"

namespace depest::model {

namespace {

struct ModalitySetName {
  ModalitySet set;
  std::string_view name;
};

constexpr std::array<ModalitySetName, 5> kModalitySetNames{{
    {ModalitySet::a, "a"},
    {ModalitySet::v, "v"},
    {ModalitySet::t, "t"},
    {ModalitySet::av, "av"},
    {ModalitySet::avt, "avt"},
}};

}  // namespace

std::string_view to_string(ModalitySet m) {
  for (const auto& e : kModalitySetNames) {
    if (e.set == m) return e.name;
  }
  return "unknown";
}

ModalitySet parse_modality_set(std::string_view name) {
  for (const auto& e : kModalitySetNames) {
    if (e.name == name) return e.set;
  }
  throw ConfigError("unknown modality set '" + std::string(name) + "' (expected a, v, t, av or avt)");
}

std::vector<Modality> modalities_of(ModalitySet m) {
  switch (m) {
    case ModalitySet::a:
      return {Modality::audio};
    case ModalitySet::v:
      return {Modality::visual};
    case ModalitySet::t:
      return {Modality::text};
    case ModalitySet::av:
      return {Modality::audio, Modality::visual};
    case ModalitySet::avt:
      return {Modality::audio, Modality::visual, Modality::text};
  }
  return {};
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::audio:
      return "audio";
    case Modality::visual:
      return "visual";
    case Modality::text:
      return "text";
  }
  return "unknown";
}

void ModelConfig::validate() const {
  if (feature_dim == 0) throw ConfigError("model.feature_dim must be positive");
  if (n_mels == 0 || keypoint_rows == 0 || text_dim == 0) throw ConfigError("model input sizes must be positive");
  if (classes < static_cast<std::size_t>(kSubscoreClasses) || classes % kSubscoreClasses != 0) {
    throw ConfigError("model.classes must be a positive multiple of 4");
  }
  for (Modality m : modalities_of(modalities)) {
    const BranchConfig& b = branch(m);
    if (b.conv_channels.empty()) throw ConfigError(std::string(to_string(m)) + " branch needs a conv stage");
    for (std::size_t c : b.conv_channels) {
      if (c == 0) throw ConfigError(std::string(to_string(m)) + " branch has a zero-width conv");
    }
    if (b.kernel == 0 || b.kernel % 2 == 0) {
      throw ConfigError(std::string(to_string(m)) + " branch kernel must be odd");
    }
    if (b.pool == 0 || b.lstm_hidden == 0) {
      throw ConfigError(std::string(to_string(m)) + " branch pool and hidden size must be positive");
    }
  }
}

const BranchConfig& ModelConfig::branch(Modality m) const {
  switch (m) {
    case Modality::audio:
      return audio;
    case Modality::visual:
      return visual;
    case Modality::text:
      break;
  }
  return text;
}

BranchConfig& ModelConfig::branch(Modality m) {
  return const_cast<BranchConfig&>(static_cast<const ModelConfig&>(*this).branch(m));
}

std::size_t ModelInput::batch_size() const {
  for (const auto* t : {&audio, &visual, &text}) {
    if (*t) return (*t)->dim(0);
  }
  return 0;
}

const std::optional<nn::Tensor>& ModelInput::get(Modality m) const {
  switch (m) {
    case Modality::audio:
      return audio;
    case Modality::visual:
      return visual;
    case Modality::text:
      break;
  }
  return text;
}

ModelInput make_input(std::span<const features::ClipSample* const> clips) {
  if (clips.empty()) throw EmptyInputError("make_input: no clips");
  const auto& c0 = *clips.front();
  const std::size_t n = clips.size();
  for (const auto* c : clips) {
    if (c->audio.shape() != c0.audio.shape() || c->visual.shape() != c0.visual.shape() ||
        c->text.shape() != c0.text.shape()) {
      throw ShapeError("make_input: clips of one batch must have identical shapes");
    }
  }
  ModelInput in;
  if (!c0.audio.empty()) {
    const std::size_t per = c0.audio.size();
    nn::Tensor t({n, c0.audio.dim(0), c0.audio.dim(1)});
    for (std::size_t i = 0; i < n; ++i) std::copy_n(clips[i]->audio.data(), per, t.data() + i * per);
    in.audio = std::move(t);
  }
  if (!c0.visual.empty()) {
    // [T, rows, 3] -> [3, rows, T]
    const std::size_t frames = c0.visual.dim(0), rows = c0.visual.dim(1), coords = c0.visual.dim(2);
    nn::Tensor t({n, coords, rows, frames});
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = clips[i]->visual.data();
      double* dst = t.data() + i * coords * rows * frames;
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t a = 0; a < coords; ++a) dst[(a * rows + r) * frames + f] = src[(f * rows + r) * coords + a];
        }
      }
    }
    in.visual = std::move(t);
  }
  if (!c0.text.empty()) {
    // [S, D] -> [D, S]
    const std::size_t s = c0.text.dim(0), d = c0.text.dim(1);
    nn::Tensor t({n, d, s});
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = clips[i]->text.data();
      double* dst = t.data() + i * d * s;
      for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t k = 0; k < d; ++k) dst[k * s + j] = src[j * d + k];
      }
    }
    in.text = std::move(t);
  }
  return in;
}

nn::Var Branch::operator()(const nn::LayerContext& ctx, nn::Var x) const {
  std::size_t stage = 0;
  if (keypoint_conv) {
    if (x.shape().size() != 4) throw ShapeError("visual branch expects [N, 3, rows, T]");
    nn::Var y = (*keypoint_conv)(ctx, x);  // [N, C, 1, T]
    const nn::Shape& s = y.shape();
    y = nn::reshape(y, {s[0], s[1], s[3]});
    x = nn::max_pool1d(nn::relu(norms[0](ctx, y)), pool);
    stage = 1;
  } else if (x.shape().size() != 3) {
    throw ShapeError(std::string(to_string(kind)) + " branch expects [N, C, T], got " + nn::shape_string(x.shape()));
  }
  for (std::size_t i = 0; i < convs.size(); ++i, ++stage) {
    x = nn::max_pool1d(nn::relu(norms[stage](ctx, convs[i](ctx, x))), pool);
  }
  return fc(ctx, lstm.summary(ctx, nn::swap_last_two(x)));
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  nn::Rng rng(seed);
  const auto mods = modalities_of(cfg_.modalities);
  const std::size_t d = cfg_.feature_dim;
  for (Modality m : mods) {
    const BranchConfig& bc = cfg_.branch(m);
    Branch b;
    b.kind = m;
    b.prefix = std::string(to_string(m));
    b.pool = bc.pool;
    std::size_t in = 0;
    std::size_t stage = 0;
    if (m == Modality::visual) {
      // Kernel spans every keypoint row, so it slides along time only.
      const nn::Conv2dOptions opt{1, 1, 0, bc.kernel / 2};
      b.keypoint_conv = nn::Conv2dLayer::create(params_, b.prefix + ".conv0", 3, bc.conv_channels[0],
                                                cfg_.keypoint_rows, bc.kernel, opt, false, rng);
      b.norms.push_back(nn::BatchNormLayer::create(params_, b.prefix + ".bn0", bc.conv_channels[0]));
      in = bc.conv_channels[0];
      stage = 1;
    } else {
      in = m == Modality::audio ? cfg_.n_mels : cfg_.text_dim;
    }
    for (; stage < bc.conv_channels.size(); ++stage) {
      const std::string idx = std::to_string(stage);
      const std::size_t out = bc.conv_channels[stage];
      b.convs.push_back(
          nn::Conv1dLayer::create(params_, b.prefix + ".conv" + idx, in, out, bc.kernel, bc.kernel / 2, false, rng));
      b.norms.push_back(nn::BatchNormLayer::create(params_, b.prefix + ".bn" + idx, out));
      in = out;
    }
    b.lstm = nn::BiLstmLayer::create(params_, b.prefix + ".lstm", in, bc.lstm_hidden, rng);
    b.fc = nn::LinearLayer::create(params_, b.prefix + ".fc", 2 * bc.lstm_hidden, d, rng);
    branches_.push_back(std::move(b));
  }

  const std::size_t n = mods.size();
  std::size_t head_in = d;
  if (n > 1) {
    switch (cfg_.fusion) {
      case fusion::FusionMethod::subatten:
        bank_ = fusion::SubAttentionalBank::create(params_, "fusion", rng);
        head_in = n * d;
        break;
      case fusion::FusionMethod::atten:
        shared_fusion_ = fusion::AttentionalFusion::create(params_, "fusion.shared", rng);
        head_in = n * d;
        break;
      case fusion::FusionMethod::concat:
        head_in = n * d;
        break;
      default:
        break;
    }
  }
  for (std::size_t k = 0; k < kNumSubscores; ++k) {
    heads_.push_back(nn::LinearLayer::create(params_, "head" + std::to_string(k), head_in, cfg_.classes, rng));
  }
}

std::vector<nn::Var> Model::features(const nn::LayerContext& ctx, const ModelInput& input) const {
  std::vector<nn::Var> out;
  for (const auto& b : branches_) {
    const auto& t = input.get(b.kind);
    if (!t) throw EmptyInputError(std::string(to_string(b.kind)) + " input missing for a " +
                                  std::string(to_string(cfg_.modalities)) + " model");
    out.push_back(b(ctx, ctx.graph.constant(*t)));
  }
  return out;
}

std::vector<nn::Var> Model::forward(const nn::LayerContext& ctx, const ModelInput& input) const {
  const auto feats = features(ctx, input);
  const std::size_t batch = feats.front().shape()[0];
  std::vector<nn::Var> head_inputs(kNumSubscores);
  if (feats.size() == 1) {
    std::fill(head_inputs.begin(), head_inputs.end(), feats.front());
  } else if (bank_) {
    const auto fused = (*bank_)(ctx, fusion::stack_feature_map(feats));
    for (std::size_t k = 0; k < kNumSubscores; ++k) {
      head_inputs[k] = nn::reshape(fused[k], {batch, nn::shape_size(fused[k].shape()) / batch});
    }
  } else if (shared_fusion_) {
    nn::Var fused = (*shared_fusion_)(ctx, fusion::stack_feature_map(feats));
    fused = nn::reshape(fused, {batch, nn::shape_size(fused.shape()) / batch});
    std::fill(head_inputs.begin(), head_inputs.end(), fused);
  } else {
    std::fill(head_inputs.begin(), head_inputs.end(), fusion::baseline_fuse(cfg_.fusion, feats));
  }
  std::vector<nn::Var> out;
  out.reserve(kNumSubscores);
  for (std::size_t k = 0; k < kNumSubscores; ++k) out.push_back(nn::softmax(heads_[k](ctx, head_inputs[k])));
  return out;
}

std::vector<ModelOutput> Model::predict(const ModelInput& input) {
  nn::Graph g(false);
  nn::LayerContext ctx{g, params_, false, false};
  const auto heads = forward(ctx, input);
  const std::size_t batch = input.batch_size();
  std::vector<ModelOutput> out(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    nn::Tensor dist({kNumSubscores, cfg_.classes});
    for (std::size_t k = 0; k < kNumSubscores; ++k) {
      std::copy_n(heads[k].value().data() + i * cfg_.classes, cfg_.classes, dist.data() + k * cfg_.classes);
    }
    out[i].record = record_from_distributions(dist);
    out[i].distributions = std::move(dist);
  }
  return out;
}

std::size_t Model::load_prefix(const nn::ParameterStore& source, std::string_view prefix) {
  std::size_t copied = 0;
  for (auto& p : params_.entries()) {
    if (!std::string_view(p.name).starts_with(prefix)) continue;
    if (!source.contains(p.name)) throw ConfigError("transfer source has no parameter '" + p.name + "'");
    const auto& src = source.at(p.name);
    if (src.value.shape() != p.value.shape()) {
      throw ConfigError("transfer shape mismatch for '" + p.name + "': " + nn::shape_string(src.value.shape()) +
                        " vs " + nn::shape_string(p.value.shape()));
    }
    p.value = src.value;
    ++copied;
  }
  if (copied == 0) throw ConfigError("no parameters under prefix '" + std::string(prefix) + "'");
  return copied;
}

phq::PhqRecord record_from_distributions(const nn::Tensor& distributions) {
  if (distributions.rank() != 2 || distributions.dim(0) != kNumSubscores) {
    throw ShapeError("expected [8, classes] distributions, got " + nn::shape_string(distributions.shape()));
  }
  musdl::MusdlConfig cfg;
  cfg.m_expanded = distributions.dim(1);
  const auto decoded = musdl::decode_prediction(distributions, cfg);
  Subscores s{};
  std::copy(decoded.begin(), decoded.end(), s.begin());
  return phq::derive_phq(s);
}

}  // namespace depest::model
