#pragma once

// Minibatch training of edge networks on labeled regions.

#include "edgegrasp/nn/loss.hpp"
#include "edgegrasp/nn/model.hpp"

#include <json.hpp>

#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>

namespace edgegrasp::nn {

/// One approach region with its labeled edges.
struct TrainSample {
  LocalRegion region;
  std::vector<int> contacts;
  std::vector<int> labels;
};

/// Uniform rotation of a centered region; labels are unaffected.
inline LocalRegion augment_rotation(const LocalRegion& region, Rng& rng) { return region.rotated(random_rotation(rng)); }

struct TrainConfig {
  int epochs = 150;
  int batch_regions = 32;
  double lr = 1e-4;
  int patience = 6;         // epochs without improvement before the lr drops
  double min_delta = 1e-4;  // improvement must exceed this
  double lr_factor = 0.5;
  bool augment = false;     // random rotation per region and step
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 0) throw usage_error("epoch count must be non-negative");
    if (batch_regions < 1) throw usage_error("batch size must be positive");
    if (!(lr > 0)) throw usage_error("learning rate must be positive");
    if (patience < 1) throw usage_error("patience must be positive");
    if (!(min_delta >= 0)) throw usage_error("min delta must be non-negative");
    if (!(lr_factor > 0 && lr_factor < 1)) throw usage_error("lr factor must lie in (0, 1)");
  }

  nlohmann::json to_json() const {
    return {{"epochs", epochs},       {"batch_regions", batch_regions}, {"lr", lr},
            {"patience", patience},   {"min_delta", min_delta},         {"lr_factor", lr_factor},
            {"augment", augment},     {"seed", seed}};
  }
};

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs whose loss fails to beat the best by more than `min_delta`; the
/// counter restarts after each drop.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int patience, double min_delta, double factor)
      : lr_(lr), patience_(patience), min_delta_(min_delta), factor_(factor) {}

  /// Returns true when this observation lowered the learning rate.
  bool observe(double loss) {
    if (loss < best_ - min_delta_) {
      best_ = loss;
      stale_ = 0;
      return false;
    }
    if (++stale_ >= patience_) {
      lr_ *= factor_;
      stale_ = 0;
      return true;
    }
    return false;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  int stale() const { return stale_; }

  nlohmann::json to_json() const { return {{"lr", lr_}, {"best", best_}, {"stale", stale_}}; }
  void load(const nlohmann::json& j) {
    lr_ = j.at("lr").get<double>();
    best_ = j.at("best").is_null() ? std::numeric_limits<double>::infinity() : j.at("best").get<double>();
    stale_ = j.at("stale").get<int>();
  }

 private:
  double lr_;
  int patience_;
  double min_delta_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without validation data
  double train_accuracy = 0.0;
  double lr = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t edges = 0;
};

/// Balanced BCE and 0.5-threshold accuracy over every edge of `samples`.
inline EvalResult evaluate(const EdgeNet& net, const std::vector<TrainSample>& samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : samples) {
    const Vec sc = net.scores(s.region, s.contacts);
    scores.insert(scores.end(), sc.data(), sc.data() + sc.size());
    labels.insert(labels.end(), s.labels.begin(), s.labels.end());
  }
  EvalResult r;
  r.edges = labels.size();
  if (labels.empty()) return r;
  r.loss = balanced_bce_loss(scores, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += (scores[i] >= 0.5) == (labels[i] == 1);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return r;
}

/// Mutable training state; everything needed to resume bit-identically.
struct TrainState {
  int epoch = 0;  // completed epochs
  Vec best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<EpochLog> history;
};

class Trainer {
 public:
  Trainer(EdgeNet& net, TrainConfig cfg)
      : net_(net), cfg_(cfg), adam_(net.params()),
        scheduler_(cfg.lr, cfg.patience, cfg.min_delta, cfg.lr_factor) {
    cfg_.validate();
  }

  /// One optimizer step on a minibatch; returns its balanced loss.
  double step(const std::vector<const TrainSample*>& batch, Rng& rng, std::size_t* correct = nullptr) {
    std::vector<int> labels;
    for (const auto* s : batch) labels.insert(labels.end(), s->labels.begin(), s->labels.end());
    if (labels.empty()) return 0.0;
    const auto weights = balanced_weights(labels);
    const std::size_t total = labels.size();
    net_.params().zero_grad();
    double loss = 0.0;
    std::size_t offset = 0;
    for (const auto* s : batch) {
      const LocalRegion* region = &s->region;
      LocalRegion rotated;
      if (cfg_.augment) {
        rotated = augment_rotation(s->region, rng);
        region = &rotated;
      }
      const std::size_t base = offset;
      net_.accumulate_gradients(*region, s->contacts, [&](const Vec& z) {
        Vec d(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          const std::size_t k = base + static_cast<std::size_t>(i);
          const double p = sigmoid(z[i]);
          loss += weights[k] * bce_term(p, labels[k]);
          if (correct) *correct += (p >= 0.5) == (labels[k] == 1);
          d[i] = bce_logit_grad(z[i], labels[k], weights[k], total);
        }
        return d;
      });
      offset += s->contacts.size();
    }
    for (const auto& t : net_.params()) require_finite(t.grad, "gradients");
    adam_.step(net_.params(), scheduler_.lr());
    return loss / static_cast<double>(total);
  }

  /// Runs epochs up to cfg.epochs. Epoch 0 records losses before any update.
  void fit(const std::vector<TrainSample>& train, const std::vector<TrainSample>& val,
           const std::function<void(const EpochLog&)>& on_epoch = {}) {
    if (train.empty()) throw data_error("training set is empty");
    bool pos = false, neg = false;
    for (const auto& s : train)
      for (int y : s.labels) (y ? pos : neg) = true;
    if (!pos || !neg) throw data_error("training set needs both positive and negative labels");

    if (state_.history.empty()) {
      const auto tr = evaluate(net_, train);
      record({0, tr.loss, validation_loss(val), tr.accuracy, scheduler_.lr()}, on_epoch, val.empty());
    }
    while (state_.epoch < cfg_.epochs) {
      const int epoch = state_.epoch + 1;
      Rng rng = derive_rng(cfg_.seed, static_cast<std::uint64_t>(epoch));
      std::vector<std::size_t> order(train.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0.0;
      std::size_t edges = 0, correct = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch_regions)) {
        std::vector<const TrainSample*> batch;
        std::size_t batch_edges = 0;
        for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_regions)); ++i) {
          batch.push_back(&train[order[i]]);
          batch_edges += train[order[i]].contacts.size();
        }
        loss_sum += step(batch, rng, &correct) * static_cast<double>(batch_edges);
        edges += batch_edges;
      }
      const double train_loss = edges ? loss_sum / static_cast<double>(edges) : 0.0;
      const double train_acc = edges ? static_cast<double>(correct) / static_cast<double>(edges) : 0.0;
      state_.epoch = epoch;
      record({epoch, train_loss, validation_loss(val), train_acc, scheduler_.lr()}, on_epoch, val.empty());
    }
  }

  EdgeNet& net() { return net_; }
  const TrainConfig& config() const { return cfg_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  PlateauScheduler& scheduler() { return scheduler_; }
  const PlateauScheduler& scheduler() const { return scheduler_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }

 private:
  double validation_loss(const std::vector<TrainSample>& val) const {
    if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
    return evaluate(net_, val).loss;
  }

  // The scheduler and best-checkpoint selection track validation loss, or
  // the training loss when there is no validation data.
  void record(EpochLog log, const std::function<void(const EpochLog&)>& on_epoch, bool no_val) {
    const double monitored = no_val ? log.train_loss : log.val_loss;
    if (!std::isfinite(log.train_loss) || (!no_val && !std::isfinite(log.val_loss)))
      throw numeric_error("loss became non-finite");
    if (monitored < state_.best_val || state_.best_epoch < 0) {
      state_.best_val = monitored;
      state_.best_epoch = log.epoch;
      state_.best_params = net_.params().flat_values();
    }
    if (log.epoch > 0) scheduler_.observe(monitored);
    log.lr = scheduler_.lr();
    state_.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  EdgeNet& net_;
  TrainConfig cfg_;
  Adam adam_;
  PlateauScheduler scheduler_;
  TrainState state_;
};

inline void write_history_csv(std::ostream& os, const std::vector<EpochLog>& history) {
  os << "epoch,train_loss,val_loss,train_accuracy,lr\n";
  os << std::setprecision(17);
  for (const auto& h : history)
    os << h.epoch << ',' << h.train_loss << ',' << h.val_loss << ',' << h.train_accuracy << ',' << h.lr << '\n';
}

}  // namespace edgegrasp::nn
