#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "subsense/augment.hpp"
#include "subsense/comment.hpp"
#include "subsense/encoder.hpp"

namespace subsense::trainer {

struct TrainSchedule {
  int batch_size = 32;
  double lr0 = 1e-3;
  int val_every = 200;  // steps
  int max_halvings = 5;
  double halving_factor = 0.5;
  int max_epochs = 50;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const TrainSchedule& s);
TrainSchedule schedule_from_json(const nlohmann::json& j);

struct ClassWeights {
  double w_toxic = 1.0;
  double w_nontoxic = 1.0;
  double of(Label label) const { return label == Label::Toxic ? w_toxic : w_nontoxic; }
};

// w_c = N / (2 N_c). Throws DegenerateLabelsError unless both classes occur.
ClassWeights class_weights(std::span<const Label> labels);

// Weighted softmax cross-entropy for one example; logits[class_index].
double weighted_loss(const Eigen::RowVector2d& logits, Label label, const ClassWeights& weights);
// Same loss, with d loss / d logits written to `dlogits`.
double weighted_loss_grad(const Eigen::RowVector2d& logits, Label label,
                          const ClassWeights& weights, Eigen::RowVector2d& dlogits);

// Mean over `positions` of (z - z_t)^2, z the toxic logit of `example` and z_t
// the toxic logit with position t's mask bit cleared. Dropout is off. 0 when
// `positions` is empty.
double occlusion_penalty(const augment::AugmentedExample& example,
                         const encoder::EncoderParams& params, const encoder::ModelConfig& config,
                         std::span<const std::size_t> positions);
// Adds scale * d penalty / d params into `grads`; returns the penalty.
double occlusion_penalty_grad(const augment::AugmentedExample& example,
                              const encoder::EncoderParams& params,
                              const encoder::ModelConfig& config,
                              std::span<const std::size_t> positions, double scale,
                              encoder::Gradients& grads);

// Halve when a validation F1 falls below the best seen so far; stop after
// max_halvings halvings.
class LrSchedule {
 public:
  explicit LrSchedule(const TrainSchedule& schedule);

  // Returns true when f1 is a new best.
  bool observe(double f1);
  double lr() const { return lr_; }
  int halvings() const { return halvings_; }
  int evaluations() const { return evaluations_; }
  std::optional<double> best() const { return best_; }
  bool exhausted() const { return halvings_ >= max_halvings_; }
  // 1-based evaluation indices at which a halving happened.
  const std::vector<int>& halving_points() const { return halving_points_; }

 private:
  double lr_;
  double factor_;
  int max_halvings_;
  int halvings_ = 0;
  int evaluations_ = 0;
  std::optional<double> best_;
  std::vector<int> halving_points_;
};

struct TrainRecord {
  long step = 0;
  double loss = 0.0;
  std::optional<double> val_f1;
  double lr = 0.0;  // after any halving at this step
  int halvings = 0;
};

struct TrainHistory {
  std::vector<TrainRecord> records;
  std::string stop_reason;  // "max_halvings" | "epoch_cap"
  std::optional<double> best_val_f1;
  long best_step = 0;
  int epochs = 0;

  void write_csv(std::ostream& out) const;
};

struct TrainExample {
  augment::AugmentedExample example;
  Label label = Label::NonToxic;
  std::vector<std::size_t> identity_positions;
};

TrainExample make_example(const augment::PreparedExample& prepared, Label label);

struct TrainOptions {
  encoder::ModelConfig config;
  TrainSchedule schedule;
  augment::AugmentMode mode = augment::AugmentMode::Baseline;
  double soc_weight = 0.0;
  std::uint64_t seed = 0;  // parameter init, shuffling and dropout
  // Replaces the validation F1 computation when set; receives the 1-based
  // evaluation index.
  std::function<double(const encoder::EncoderParams&, int)> validation_hook;
};

struct TrainResult {
  encoder::EncoderParams params;  // best validation F1
  TrainHistory history;
};

// Throws EmptyDatasetError, DegenerateLabelsError, or ContractError when an
// example was augmented under a different mode or max_len.
TrainResult train(std::span<const TrainExample> train_set, std::span<const TrainExample> val_set,
                  const TrainOptions& options);

struct Prediction {
  Label label = Label::NonToxic;
  double p_toxic = 0.5;
};

// Ties go to non-toxic.
Prediction predict_from_logits(double nontoxic_logit, double toxic_logit);
Prediction predict(const encoder::EncoderParams& params, const encoder::ModelConfig& config,
                   const augment::AugmentedExample& example);
std::vector<Prediction> predict_all(const encoder::EncoderParams& params,
                                    const encoder::ModelConfig& config,
                                    std::span<const augment::AugmentedExample> examples);
double evaluate_f1(const encoder::EncoderParams& params, const encoder::ModelConfig& config,
                   std::span<const TrainExample> examples);

}  // namespace subsense::trainer
