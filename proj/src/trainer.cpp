#include "subsense/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "subsense/audit.hpp"
#include "subsense/error.hpp"

namespace subsense::trainer {

using encoder::EncoderParams;
using encoder::Matrix;
using encoder::ModelConfig;

void TrainSchedule::validate() const {
  if (batch_size <= 0) throw ConfigError("schedule: batch_size must be positive");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("schedule: lr0 must be positive");
  if (val_every <= 0) throw ConfigError("schedule: val_every must be positive");
  if (max_halvings < 1) throw ConfigError("schedule: max_halvings must be at least 1");
  if (!(halving_factor > 0.0 && halving_factor < 1.0)) {
    throw ConfigError("schedule: halving_factor must lie in (0, 1)");
  }
  if (max_epochs <= 0) throw ConfigError("schedule: max_epochs must be positive");
}

nlohmann::json to_json(const TrainSchedule& s) {
  return {{"batch_size", s.batch_size},     {"lr0", s.lr0},
          {"val_every", s.val_every},       {"max_halvings", s.max_halvings},
          {"halving_factor", s.halving_factor}, {"max_epochs", s.max_epochs}};
}

TrainSchedule schedule_from_json(const nlohmann::json& j) {
  TrainSchedule s;
  try {
    s.batch_size = j.value("batch_size", s.batch_size);
    s.lr0 = j.value("lr0", s.lr0);
    s.val_every = j.value("val_every", s.val_every);
    s.max_halvings = j.value("max_halvings", s.max_halvings);
    s.halving_factor = j.value("halving_factor", s.halving_factor);
    s.max_epochs = j.value("max_epochs", s.max_epochs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  return s;
}

ClassWeights class_weights(std::span<const Label> labels) {
  std::size_t toxic = 0;
  for (auto l : labels) toxic += l == Label::Toxic ? 1 : 0;
  const std::size_t n = labels.size();
  if (toxic == 0 || toxic == n) {
    throw DegenerateLabelsError("training labels contain a single class");
  }
  const double N = static_cast<double>(n);
  return {N / (2.0 * static_cast<double>(toxic)), N / (2.0 * static_cast<double>(n - toxic))};
}

double weighted_loss_grad(const Eigen::RowVector2d& logits, Label label,
                          const ClassWeights& weights, Eigen::RowVector2d& dlogits) {
  const double mx = logits.maxCoeff();
  const Eigen::RowVector2d e = (logits.array() - mx).exp().matrix();
  const double z = e.sum();
  const double lse = mx + std::log(z);
  const int c = class_index(label);
  const double w = weights.of(label);
  dlogits = e / z;
  dlogits(c) -= 1.0;
  dlogits *= w;
  return w * (lse - logits(c));
}

double weighted_loss(const Eigen::RowVector2d& logits, Label label, const ClassWeights& weights) {
  Eigen::RowVector2d unused;
  return weighted_loss_grad(logits, label, weights, unused);
}

namespace {

// The unoccluded example followed by one copy per occluded position.
std::vector<augment::AugmentedExample> occlusion_batch(const augment::AugmentedExample& example,
                                                       std::span<const std::size_t> positions) {
  std::vector<augment::AugmentedExample> batch{example};
  for (auto t : positions) {
    if (t == 0 || t >= example.base.mask.size()) {
      throw ContractError("occlusion: position outside the token range");
    }
    auto occluded = example;
    occluded.base.mask[t] = 0;
    batch.push_back(std::move(occluded));
  }
  return batch;
}

}  // namespace

double occlusion_penalty(const augment::AugmentedExample& example, const EncoderParams& params,
                         const ModelConfig& config, std::span<const std::size_t> positions) {
  if (positions.empty()) return 0.0;
  const auto batch = occlusion_batch(example, positions);
  const auto out = encoder::forward(batch, params, config, encoder::ForwardOptions{});
  double sum = 0.0;
  for (Eigen::Index i = 1; i < out.logits.rows(); ++i) {
    const double diff = out.logits(0, 1) - out.logits(i, 1);
    sum += diff * diff;
  }
  return sum / static_cast<double>(positions.size());
}

double occlusion_penalty_grad(const augment::AugmentedExample& example,
                              const EncoderParams& params, const ModelConfig& config,
                              std::span<const std::size_t> positions, double scale,
                              encoder::Gradients& grads) {
  if (positions.empty()) return 0.0;
  const auto batch = occlusion_batch(example, positions);
  const auto out = encoder::forward(batch, params, config,
                                    encoder::ForwardOptions{.keep_cache = true});
  const double m = static_cast<double>(positions.size());
  Matrix dlogits = Matrix::Zero(out.logits.rows(), 2);
  double sum = 0.0;
  for (Eigen::Index i = 1; i < out.logits.rows(); ++i) {
    const double diff = out.logits(0, 1) - out.logits(i, 1);
    sum += diff * diff;
    dlogits(0, 1) += scale * 2.0 * diff / m;
    dlogits(i, 1) = -scale * 2.0 * diff / m;
  }
  const auto saved_slot = grads.slot_fill;
  encoder::backward_accumulate(*out.cache, params, config, dlogits, grads);
  grads.slot_fill = saved_slot;
  return sum / m;
}

LrSchedule::LrSchedule(const TrainSchedule& schedule)
    : lr_(schedule.lr0), factor_(schedule.halving_factor), max_halvings_(schedule.max_halvings) {
  schedule.validate();
}

bool LrSchedule::observe(double f1) {
  ++evaluations_;
  if (!best_ || f1 > *best_) {
    best_ = f1;
    return true;
  }
  if (f1 < *best_) {
    lr_ *= factor_;
    ++halvings_;
    halving_points_.push_back(evaluations_);
  }
  return false;
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "step,loss,val_f1,lr,halvings\n";
  char buf[160];
  for (const auto& r : records) {
    char f1buf[40] = "";
    if (r.val_f1) std::snprintf(f1buf, sizeof f1buf, "%.6f", *r.val_f1);
    std::snprintf(buf, sizeof buf, "%ld,%.8f,%s,%.8g,%d\n", r.step, r.loss, f1buf, r.lr, r.halvings);
    out << buf;
  }
}

TrainExample make_example(const augment::PreparedExample& prepared, Label label) {
  return {prepared.example, label, prepared.identity_positions};
}

Prediction predict_from_logits(double nontoxic_logit, double toxic_logit) {
  Prediction p;
  p.label = toxic_logit > nontoxic_logit ? Label::Toxic : Label::NonToxic;
  p.p_toxic = 1.0 / (1.0 + std::exp(nontoxic_logit - toxic_logit));
  return p;
}

std::vector<Prediction> predict_all(const EncoderParams& params, const ModelConfig& config,
                                    std::span<const augment::AugmentedExample> examples) {
  constexpr std::size_t kChunk = 64;
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); i += kChunk) {
    const auto chunk = examples.subspan(i, std::min(kChunk, examples.size() - i));
    const auto fwd = encoder::forward(chunk, params, config, encoder::ForwardOptions{});
    for (Eigen::Index r = 0; r < fwd.logits.rows(); ++r) {
      out.push_back(predict_from_logits(fwd.logits(r, 0), fwd.logits(r, 1)));
    }
  }
  return out;
}

Prediction predict(const EncoderParams& params, const ModelConfig& config,
                   const augment::AugmentedExample& example) {
  return predict_all(params, config, std::span(&example, 1)).front();
}

double evaluate_f1(const EncoderParams& params, const ModelConfig& config,
                   std::span<const TrainExample> examples) {
  std::vector<augment::AugmentedExample> xs;
  std::vector<Label> golds;
  for (const auto& e : examples) {
    xs.push_back(e.example);
    golds.push_back(e.label);
  }
  std::vector<Label> preds;
  for (const auto& p : predict_all(params, config, xs)) preds.push_back(p.label);
  return audit::f1(audit::confusion(preds, golds));
}

namespace {

std::vector<Matrix*> tensors(EncoderParams& p) {
  std::vector<Matrix*> out;
  p.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

class Adam {
 public:
  Adam(const ModelConfig& config, EncoderParams& params)
      : m_(EncoderParams::zeros(config)), v_(EncoderParams::zeros(config)),
        p_(tensors(params)), pm_(tensors(m_)), pv_(tensors(v_)) {}

  void step(EncoderParams& grads, double lr) {
    ++t_;
    const auto g = tensors(grads);
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < p_.size(); ++i) {
      auto m = pm_[i]->array();
      auto v = pv_[i]->array();
      const auto gi = g[i]->array();
      m = kBeta1 * m + (1.0 - kBeta1) * gi;
      v = kBeta2 * v + (1.0 - kBeta2) * gi.square();
      p_[i]->array() -= lr * (m / c1) / ((v / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  EncoderParams m_, v_;
  std::vector<Matrix*> p_, pm_, pv_;
  long t_ = 0;
};

}  // namespace

TrainResult train(std::span<const TrainExample> train_set, std::span<const TrainExample> val_set,
                  const TrainOptions& options) {
  options.config.validate();
  options.schedule.validate();
  if (train_set.empty()) throw EmptyDatasetError("train: empty training split");
  if (val_set.empty() && !options.validation_hook) {
    throw EmptyDatasetError("train: empty validation split");
  }
  if (options.soc_weight < 0.0 || !std::isfinite(options.soc_weight)) {
    throw ConfigError("train: soc_weight must be a finite non-negative number");
  }
  const auto check_mode = [&](const TrainExample& e) {
    if (e.example.mode != options.mode) {
      throw ContractError("train: example prepared under mode " +
                          std::string(augment::mode_name(e.example.mode)) + ", expected " +
                          std::string(augment::mode_name(options.mode)));
    }
    if (e.example.base.max_len() != static_cast<std::size_t>(options.config.max_len)) {
      throw ContractError("train: example max_len does not match config");
    }
  };
  std::vector<Label> labels;
  for (const auto& e : train_set) {
    check_mode(e);
    labels.push_back(e.label);
  }
  for (const auto& e : val_set) check_mode(e);
  const ClassWeights weights = class_weights(labels);

  ModelConfig config = options.config;
  config.seed = options.seed;
  TrainResult result;
  EncoderParams params = encoder::init(config);
  EncoderParams best = params;
  encoder::Gradients grads = encoder::zero_gradients(config, 0);
  const auto grad_tensors = tensors(grads.params);
  Adam adam(config, params);
  encoder::Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  LrSchedule lr(options.schedule);
  auto& history = result.history;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(options.schedule.batch_size);
  long step = 0;

  const auto run_validation = [&] {
    const int index = lr.evaluations() + 1;
    const double f1 = options.validation_hook ? options.validation_hook(params, index)
                                              : evaluate_f1(params, config, val_set);
    if (lr.observe(f1)) {
      best = params;
      history.best_val_f1 = f1;
      history.best_step = step;
    }
    auto& rec = history.records.back();
    rec.val_f1 = f1;
    rec.lr = lr.lr();
    rec.halvings = lr.halvings();
  };

  for (int epoch = 0; epoch < options.schedule.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t n = std::min(batch_size, order.size() - start);
      std::vector<augment::AugmentedExample> batch;
      batch.reserve(n);
      for (std::size_t i = 0; i < n; ++i) batch.push_back(train_set[order[start + i]].example);

      const auto out = encoder::forward(
          batch, params, config,
          encoder::ForwardOptions{.keep_cache = true, .dropout = true, .rng = &rng});
      const double inv_n = 1.0 / static_cast<double>(n);
      Matrix dlogits(static_cast<Eigen::Index>(n), 2);
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::RowVector2d d;
        const auto r = static_cast<Eigen::Index>(i);
        loss += weighted_loss_grad(out.logits.row(r), train_set[order[start + i]].label, weights, d);
        dlogits.row(r) = d * inv_n;
      }
      for (auto* g : grad_tensors) g->setZero();
      encoder::backward_accumulate(*out.cache, params, config, dlogits, grads);
      if (options.soc_weight > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto& ex = train_set[order[start + i]];
          loss += options.soc_weight *
                  occlusion_penalty_grad(ex.example, params, config, ex.identity_positions,
                                         options.soc_weight * inv_n, grads);
        }
      }
      adam.step(grads.params, lr.lr());
      ++step;
      history.records.push_back({step, loss * inv_n, std::nullopt, lr.lr(), lr.halvings()});

      if (step % options.schedule.val_every == 0) {
        run_validation();
        if (lr.exhausted()) {
          history.stop_reason = "max_halvings";
          history.epochs = epoch + 1;
          result.params = std::move(best);
          return result;
        }
      }
    }
    history.epochs = epoch + 1;
  }
  if (!history.records.back().val_f1) run_validation();
  history.stop_reason = lr.exhausted() ? "max_halvings" : "epoch_cap";
  result.params = std::move(best);
  return result;
}

}  // namespace subsense::trainer
