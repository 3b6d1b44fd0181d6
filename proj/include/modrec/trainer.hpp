#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "modrec/arch.hpp"
#include "modrec/dataset.hpp"
#include "modrec/tensor.hpp"

namespace modrec {

struct TrainConfig {
    std::size_t batch_size = 512;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double dropout_rate = 0.6;
    std::size_t patience = 20;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    // An epoch "improves" only when validation loss drops by at least this
    // much; guards against float-noise non-termination.
    double min_improvement = 1e-5;

    void validate() const {
        if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
        if (patience < 1) throw ConfigError("train: patience must be >= 1");
        if (max_epochs < 1) throw ConfigError("train: max epochs must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw ConfigError("train: dropout rate must be in [0,1)");
        }
        if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
    }
};

struct AdamState {
    std::vector<Tensorf> m;
    std::vector<Tensorf> v;
    std::size_t step = 0;

    static AdamState like(const std::vector<std::pair<std::string, Tensorf>>& params) {
        AdamState s;
        for (const auto& [name, t] : params) {
            s.m.push_back(Tensorf::zeros(t.shape()));
            s.v.push_back(Tensorf::zeros(t.shape()));
        }
        return s;
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based
    std::string stop_reason;     // "patience" | "max-epochs"
};

// The early-stopping rule, separated out so it can be driven with injected
// loss sequences.
class EarlyStopper {
  public:
    EarlyStopper(std::size_t patience, double min_improvement)
        : patience_(patience), min_improvement_(min_improvement) {}

    // Feeds one epoch's validation loss; returns true when training should
    // stop after this epoch.
    bool update(double val_loss) {
        ++epoch_;
        if (val_loss <= best_loss_ - min_improvement_ || epoch_ == 1) {
            best_loss_ = val_loss;
            best_epoch_ = epoch_;
            bad_epochs_ = 0;
            return false;
        }
        ++bad_epochs_;
        return bad_epochs_ >= patience_;
    }

    bool improved_last() const { return bad_epochs_ == 0; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

  private:
    std::size_t patience_;
    double min_improvement_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t bad_epochs_ = 0;
    double best_loss_ = std::numeric_limits<double>::infinity();
};

// -ln(probs[label]) with the probability clamped at 1e-12.
double cross_entropy(const Tensorf& probs, std::size_t label);

// One bias-corrected Adam update over all parameters.
void adam_step(std::vector<std::pair<std::string, Tensorf>>& params,
               const std::vector<Tensorf>& grads, AdamState& state, const TrainConfig& cfg);

struct LossAcc {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Mean loss and argmax accuracy with dropout off.
LossAcc evaluate_loss(const Network<float>& net, const Dataset& data, std::size_t threads = 0);

// Mini-batch training with seeded shuffling, Adam, early stopping on
// validation loss, and best-epoch parameter restoration. Progress lines go
// to *progress when given.
TrainHistory train(Network<float>& net, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& cfg, std::ostream* progress = nullptr);

// CSV columns: epoch, train_loss, val_loss, val_acc, seconds.
void export_history(const TrainHistory& h, const std::filesystem::path& path);

}  // namespace modrec
