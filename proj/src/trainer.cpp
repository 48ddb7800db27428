#include "depest/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "depest/errors.hpp"
#include "depest/nn/ops.hpp"

namespace depest::train {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  sam.validate();
  musdl.validate();
  if (musdl.n != kNumSubscores || musdl.m != static_cast<std::size_t>(kSubscoreClasses)) {
    throw ConfigError("musdl n and m must match PHQ-8 (8 items, 4 classes)");
  }
  if (target_accuracy && !(*target_accuracy > 0.0 && *target_accuracy <= 1.0)) {
    throw ConfigError("train.target_accuracy must be in (0, 1]");
  }
}

std::string epoch_log_header() { return "epoch\tloss\tclip_accuracy\tfemale_accuracy\tmale_accuracy"; }

std::string format_epoch_line(const EpochStats& s) {
  std::ostringstream out;
  out << std::setprecision(17) << s.epoch << '\t' << s.loss << '\t' << s.clip_accuracy << '\t';
  if (s.female_accuracy) {
    out << *s.female_accuracy;
  } else {
    out << "NA";
  }
  out << '\t';
  if (s.male_accuracy) {
    out << *s.male_accuracy;
  } else {
    out << "NA";
  }
  return out.str();
}

nn::Var batch_loss(const std::vector<nn::Var>& heads, std::span<const Subscores> truths, const nn::Tensor& weights,
                   const musdl::MusdlConfig& cfg) {
  if (heads.size() != kNumSubscores) throw ShapeError("batch_loss: expected 8 heads");
  const std::size_t n = truths.size();
  if (weights.shape() != nn::Shape{kNumSubscores, n}) throw ShapeError("batch_loss: weights must be [8, N]");
  std::vector<std::vector<double>> rows;
  for (int c = 0; c < kSubscoreClasses; ++c) rows.push_back(musdl::soft_label_row(c, cfg));

  std::vector<nn::Var> terms;
  for (std::size_t k = 0; k < kNumSubscores; ++k) {
    nn::Tensor target({n, cfg.m_expanded});
    nn::Tensor w({n});
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = rows[static_cast<std::size_t>(truths[i][k])];
      std::copy(row.begin(), row.end(), target.data() + i * cfg.m_expanded);
      w[i] = weights[k * n + i];
    }
    terms.push_back(nn::kl_divergence(heads[k], target, w));
  }
  nn::Var total = terms.front();
  for (std::size_t k = 1; k < terms.size(); ++k) total = nn::add(total, terms[k]);
  return nn::scale(total, 1.0 / static_cast<double>(n));
}

Trainer::Trainer(model::Model& model, TrainConfig cfg, std::uint64_t seed)
    : model_(model), cfg_(std::move(cfg)), sam_(cfg_.sam), sgd_(cfg_.sam.base), rng_(seed) {
  cfg_.validate();
  if (model_.config().classes != cfg_.musdl.m_expanded) {
    throw ConfigError("model.classes must equal musdl.m_expanded");
  }
}

std::vector<std::size_t> Trainer::epoch_order(std::span<const features::ClipSample> clips) {
  if (cfg_.sampling == sampling::SamplingMode::none) {
    std::vector<std::size_t> order(clips.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    return order;
  }
  std::vector<sampling::ClipLabel> labels;
  labels.reserve(clips.size());
  for (const auto& c : clips) labels.push_back({c.subscores, c.gender});
  const auto weights = sampling::compute_sampler_weights(labels, cfg_.sampling);
  return sampling::weighted_draw(weights, clips.size(), rng_);
}

EpochStats Trainer::train_epoch(std::span<const features::ClipSample> clips) {
  if (clips.empty()) throw EmptyInputError("train_epoch: empty dataset");
  const auto order = epoch_order(clips);

  EpochStats stats;
  stats.epoch = ++epochs_done_;
  std::size_t seen = 0, correct = 0, batches = 0;
  std::array<std::size_t, kNumSubscores> item_correct{};
  std::array<std::size_t, 2> gender_seen{}, gender_correct{};
  double loss_sum = 0.0;

  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
    std::vector<const features::ClipSample*> batch;
    std::vector<Subscores> truths;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(&clips[order[i]]);
      truths.push_back(clips[order[i]].subscores);
    }
    const std::size_t n = batch.size();
    const model::ModelInput input = model::make_input(batch);
    const nn::Tensor weights = cfg_.dynamic_weights ? sampling::dynamic_class_weights(truths).per_sample
                                                    : nn::Tensor({kNumSubscores, n}, 1.0);

    std::vector<nn::Tensor> first_outputs;
    auto loss_fn = [&](nn::ParameterStore& store, sam::SamPass pass) {
      nn::Graph g;
      nn::LayerContext ctx{g, store, true, pass == sam::SamPass::first};
      const auto heads = model_.forward(ctx, input);
      nn::Var loss = batch_loss(heads, truths, weights, cfg_.musdl);
      g.backward(loss);
      if (pass == sam::SamPass::first) {
        first_outputs.clear();
        for (const auto& h : heads) first_outputs.push_back(h.value());
      }
      return loss.value()[0];
    };

    double loss = 0.0;
    if (cfg_.use_sam) {
      loss = sam_.step(model_.params(), loss_fn).loss;
    } else {
      model_.params().zero_grad();
      loss = loss_fn(model_.params(), sam::SamPass::first);
      if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
      sgd_.step(model_.params());
    }
    if (cfg_.round_float32) model_.params().round_to_float32();
    for (const auto& p : model_.params().entries()) p.value.check_finite(p.name.c_str());
    loss_sum += loss;
    ++batches;

    for (std::size_t i = 0; i < n; ++i) {
      nn::Tensor dist({kNumSubscores, cfg_.musdl.m_expanded});
      for (std::size_t k = 0; k < kNumSubscores; ++k) {
        std::copy_n(first_outputs[k].data() + i * cfg_.musdl.m_expanded, cfg_.musdl.m_expanded,
                    dist.data() + k * cfg_.musdl.m_expanded);
      }
      const auto pred = model::record_from_distributions(dist);
      const auto truth = phq::derive_phq(truths[i]);
      const bool ok = pred.binary == truth.binary;
      ++seen;
      correct += ok ? 1 : 0;
      for (std::size_t k = 0; k < kNumSubscores; ++k) item_correct[k] += pred.subscores[k] == truth.subscores[k];
      const std::size_t gi = batch[i]->gender == Gender::male ? 1 : 0;
      ++gender_seen[gi];
      gender_correct[gi] += ok ? 1 : 0;
    }
  }
  stats.loss = loss_sum / static_cast<double>(batches);
  stats.clip_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
  for (std::size_t k = 0; k < kNumSubscores; ++k) {
    stats.subscore_accuracy[k] = static_cast<double>(item_correct[k]) / static_cast<double>(seen);
  }
  if (gender_seen[0]) stats.female_accuracy = static_cast<double>(gender_correct[0]) / gender_seen[0];
  if (gender_seen[1]) stats.male_accuracy = static_cast<double>(gender_correct[1]) / gender_seen[1];
  return stats;
}

std::vector<EpochStats> Trainer::fit(std::span<const features::ClipSample> clips, const EpochCallback& on_epoch) {
  std::vector<EpochStats> log;
  for (std::size_t e = 0; e < cfg_.epochs; ++e) {
    EpochStats s = train_epoch(clips);
    if (cfg_.target_accuracy) {
      const auto preds = predict_clips(model_, clips, cfg_.batch_size);
      s.eval_accuracy = clip_metrics(preds).accuracy;
    }
    log.push_back(s);
    if (on_epoch) on_epoch(s);
    if (cfg_.target_accuracy && *s.eval_accuracy >= *cfg_.target_accuracy) break;
  }
  return log;
}

std::vector<ClipPrediction> predict_clips(model::Model& model, std::span<const features::ClipSample> clips,
                                          std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<ClipPrediction> out;
  out.reserve(clips.size());
  for (std::size_t start = 0; start < clips.size(); start += batch_size) {
    const std::size_t end = std::min(clips.size(), start + batch_size);
    std::vector<const features::ClipSample*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&clips[i]);
    const auto outputs = model.predict(model::make_input(batch));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ClipPrediction p;
      p.participant_id = batch[i]->participant_id;
      p.gender = batch[i]->gender;
      p.clip_index = batch[i]->clip_index;
      p.predicted = outputs[i].record;
      p.truth = phq::derive_phq(batch[i]->subscores);
      out.push_back(std::move(p));
    }
  }
  return out;
}

namespace {

phq::Outcome outcome(const phq::PhqRecord& r) { return {static_cast<double>(r.score), r.binary}; }
phq::Outcome outcome(const phq::ParticipantResult& r) { return {r.score, r.binary}; }

}  // namespace

phq::Metrics clip_metrics(std::span<const ClipPrediction> predictions) {
  std::vector<phq::Outcome> p, t;
  for (const auto& c : predictions) {
    p.push_back(outcome(c.predicted));
    t.push_back(outcome(c.truth));
  }
  return phq::compute_metrics(p, t);
}

phq::GenderSplitReport clip_gender_report(std::span<const ClipPrediction> predictions) {
  std::vector<phq::GenderedOutcome> v;
  for (const auto& c : predictions) v.push_back({c.gender, outcome(c.predicted), outcome(c.truth)});
  return phq::gender_split_report(v);
}

std::vector<ParticipantPair> aggregate_participants(std::span<const ClipPrediction> predictions) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ClipPrediction*>> groups;
  for (const auto& c : predictions) {
    auto [it, inserted] = groups.try_emplace(c.participant_id);
    if (inserted) order.push_back(c.participant_id);
    it->second.push_back(&c);
  }
  std::vector<ParticipantPair> out;
  for (const auto& id : order) {
    const auto& clips = groups[id];
    std::vector<phq::PhqRecord> pred, truth;
    for (const auto* c : clips) {
      pred.push_back(c->predicted);
      truth.push_back(c->truth);
    }
    const Gender g = clips.front()->gender;
    out.push_back({phq::aggregate_participant(id, g, std::move(pred)), phq::aggregate_participant(id, g, std::move(truth))});
  }
  return out;
}

phq::Metrics participant_metrics(std::span<const ParticipantPair> pairs) {
  std::vector<phq::Outcome> p, t;
  for (const auto& pp : pairs) {
    p.push_back(outcome(pp.predicted));
    t.push_back(outcome(pp.truth));
  }
  return phq::compute_metrics(p, t);
}

phq::GenderSplitReport participant_gender_report(std::span<const ParticipantPair> pairs) {
  std::vector<phq::GenderedOutcome> v;
  for (const auto& pp : pairs) v.push_back({pp.truth.gender, outcome(pp.predicted), outcome(pp.truth)});
  return phq::gender_split_report(v);
}

std::vector<ComparisonRow> compare_fusions(std::span<const features::ClipSample> train,
                                           std::span<const features::ClipSample> test,
                                           const model::ModelConfig& base, const TrainConfig& cfg,
                                           std::uint64_t seed, std::span<const fusion::FusionMethod> methods,
                                           std::span<const model::ModalitySet> sets,
                                           const std::function<void(const ComparisonRow&)>& on_row) {
  std::vector<ComparisonRow> rows;
  for (model::ModalitySet set : sets) {
    for (fusion::FusionMethod method : methods) {
      model::ModelConfig mc = base;
      mc.modalities = set;
      mc.fusion = method;
      model::Model m(mc, seed);
      Trainer t(m, cfg, seed);
      const auto log = t.fit(train);
      ComparisonRow row;
      row.modalities = set;
      row.method = method;
      row.epochs = log.size();
      row.final_loss = log.back().loss;
      row.metrics = clip_metrics(predict_clips(m, test, cfg.batch_size));
      if (on_row) on_row(row);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_comparison_table(std::span<const ComparisonRow> rows) {
  std::vector<model::ModalitySet> sets;
  std::vector<fusion::FusionMethod> methods;
  for (const auto& r : rows) {
    if (std::find(sets.begin(), sets.end(), r.modalities) == sets.end()) sets.push_back(r.modalities);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  std::ostringstream out;
  out << "method";
  for (auto s : sets) {
    const std::string tag(model::to_string(s));
    out << '\t' << tag << "_accuracy\t" << tag << "_f1\t" << tag << "_mae";
  }
  out << '\n' << std::fixed << std::setprecision(4);
  for (auto m : methods) {
    out << fusion::to_string(m);
    for (auto s : sets) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const ComparisonRow& r) { return r.method == m && r.modalities == s; });
      if (it == rows.end()) {
        out << "\tNA\tNA\tNA";
      } else {
        out << '\t' << it->metrics.accuracy << '\t' << it->metrics.f1 << '\t' << it->metrics.mae;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace depest::train
