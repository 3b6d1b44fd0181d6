#include "modrec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "modrec/parallel.hpp"

namespace modrec {

namespace {

// Per-example forward/backward; loss value plus per-parameter gradients
// accumulated into f64 buffers so the batch reduction is insensitive to
// summation grouping.
double accumulate_example(const Network<float>& net, const LabeledExample& ex,
                          const TrainConfig& cfg, const Rng& dropout_base, std::size_t ds_index,
                          std::vector<std::vector<double>>& grad_sums) {
    Tape<float> tape;
    Rng rng = dropout_base.split(ds_index);
    auto fwd = forward_on_tape(net, tape, ex.iq, Mode::Train, cfg.dropout_rate, &rng);
    auto loss = tape.cross_entropy(fwd.probs, ex.class_idx);
    tape.backward(loss);
    for (std::size_t p = 0; p < fwd.param_nodes.size(); ++p) {
        const Tensorf& g = tape.grad(fwd.param_nodes[p]);
        auto& sums = grad_sums[p];
        for (std::size_t i = 0; i < g.size(); ++i) sums[i] += static_cast<double>(g[i]);
    }
    return static_cast<double>(tape.value(loss)[0]);
}

std::size_t argmax(const Tensorf& probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;  // ties keep the lowest index
    }
    return best;
}

}  // namespace

double cross_entropy(const Tensorf& probs, std::size_t label) {
    if (probs.rank() != 1) {
        throw ShapeError("cross_entropy: expects a probability vector, got " +
                         shape_str(probs.shape()));
    }
    if (label >= probs.size()) {
        throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                         std::to_string(probs.size()) + " classes");
    }
    return -std::log(std::max(static_cast<double>(probs[label]), 1e-12));
}

void adam_step(std::vector<std::pair<std::string, Tensorf>>& params,
               const std::vector<Tensorf>& grads, AdamState& state, const TrainConfig& cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size()) {
        throw ShapeError("adam: parameter/gradient/state count mismatch");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].second.same_shape(grads[p])) {
            throw ShapeError("adam: gradient shape mismatch for " + params[p].first);
        }
        if (!grads[p].all_finite()) {
            throw NumericsError("adam: non-finite gradient in " + params[p].first);
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensorf& theta = params[p].second;
        Tensorf& m = state.m[p];
        Tensorf& v = state.v[p];
        const Tensorf& g = grads[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double m_hat = mi / bc1;
            const double v_hat = vi / bc2;
            theta[i] = static_cast<float>(static_cast<double>(theta[i]) -
                                          cfg.learning_rate * m_hat /
                                              (std::sqrt(v_hat) + cfg.epsilon));
        }
    }
}

LossAcc evaluate_loss(const Network<float>& net, const Dataset& data, std::size_t threads) {
    retain_large_heap_blocks();
    if (data.examples.empty()) throw ContractError("evaluate: empty dataset");
    const std::size_t workers = resolve_threads(threads);
    std::vector<double> loss_sums(workers, 0.0);
    std::vector<std::size_t> hits(workers, 0);
    parallel_chunks(data.examples.size(), workers,
                    [&](std::size_t w, std::size_t begin, std::size_t end) {
                        for (std::size_t i = begin; i < end; ++i) {
                            const auto& ex = data.examples[i];
                            const Tensorf probs = forward_classify(net, ex.iq);
                            loss_sums[w] += cross_entropy(probs, ex.class_idx);
                            if (argmax(probs) == ex.class_idx) ++hits[w];
                        }
                    });
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        loss += loss_sums[w];
        correct += hits[w];
    }
    const auto n = static_cast<double>(data.examples.size());
    return {loss / n, static_cast<double>(correct) / n};
}

TrainHistory train(Network<float>& net, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& cfg, std::ostream* progress) {
    retain_large_heap_blocks();
    cfg.validate();
    if (train_set.examples.empty() || val_set.examples.empty()) {
        throw ContractError("train: datasets must be non-empty");
    }
    if (net.spec.classes != train_set.class_names.size()) {
        throw ConfigError("train: network expects " + std::to_string(net.spec.classes) +
                          " classes, dataset has " + std::to_string(train_set.class_names.size()));
    }
    const std::size_t workers = resolve_threads(cfg.threads);
    const Rng root(cfg.seed);
    AdamState state = AdamState::like(net.params);

    std::vector<Tensorf> grads;
    for (const auto& [name, t] : net.params) grads.push_back(Tensorf::zeros(t.shape()));

    EarlyStopper stopper(cfg.patience, cfg.min_improvement);
    std::vector<std::pair<std::string, Tensorf>> best_params = net.params;
    TrainHistory history;

    std::vector<std::size_t> order(train_set.examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = root.split(2 * epoch);
        const Rng dropout_base = root.split(2 * epoch + 1);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            const std::size_t batch_n = stop - start;

            std::vector<std::vector<std::vector<double>>> worker_sums(workers);
            std::vector<double> worker_loss(workers, 0.0);
            parallel_chunks(batch_n, workers, [&](std::size_t w, std::size_t begin,
                                                  std::size_t end) {
                auto& sums = worker_sums[w];
                sums.resize(net.params.size());
                for (std::size_t p = 0; p < net.params.size(); ++p) {
                    sums[p].assign(net.params[p].second.size(), 0.0);
                }
                for (std::size_t b = begin; b < end; ++b) {
                    const std::size_t idx = order[start + b];
                    worker_loss[w] += accumulate_example(net, train_set.examples[idx], cfg,
                                                         dropout_base, idx, sums);
                }
            });

            double batch_loss = 0.0;
            for (std::size_t p = 0; p < grads.size(); ++p) {
                Tensorf& g = grads[p];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double acc = 0.0;
                    for (std::size_t w = 0; w < workers; ++w) {
                        if (!worker_sums[w].empty()) acc += worker_sums[w][p][i];
                    }
                    g[i] = static_cast<float>(acc / static_cast<double>(batch_n));
                }
            }
            for (std::size_t w = 0; w < workers; ++w) batch_loss += worker_loss[w];
            if (!std::isfinite(batch_loss)) {
                throw NumericsError("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            epoch_loss += batch_loss;
            seen += batch_n;
            try {
                adam_step(net.params, grads, state, cfg);
            } catch (const NumericsError& e) {
                throw NumericsError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                    ")");
            }
        }

        const LossAcc val = evaluate_loss(net, val_set, cfg.threads);
        const auto t1 = std::chrono::steady_clock::now();
        EpochRecord rec{epoch, epoch_loss / static_cast<double>(seen), val.loss, val.accuracy,
                        std::chrono::duration<double>(t1 - t0).count()};
        history.epochs.push_back(rec);
        if (progress) {
            char line[160];
            std::snprintf(line, sizeof(line),
                          "epoch %3zu  train_loss %.5f  val_loss %.5f  val_acc %.4f  (%.1fs)",
                          epoch, rec.train_loss, rec.val_loss, rec.val_accuracy, rec.seconds);
            *progress << line << std::endl;
        }

        const bool stop = stopper.update(val.loss);
        if (stopper.improved_last()) best_params = net.params;
        if (stop) {
            history.stop_reason = "patience";
            break;
        }
    }
    if (history.stop_reason.empty()) history.stop_reason = "max-epochs";
    history.best_epoch = stopper.best_epoch();
    net.params = std::move(best_params);
    return history;
}

void export_history(const TrainHistory& h, const std::filesystem::path& path) {
    if (h.epochs.empty()) throw ContractError("export_history: empty history");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "epoch,train_loss,val_loss,val_acc,seconds\n";
    char line[200];
    for (const auto& rec : h.epochs) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g\n", rec.epoch, rec.train_loss,
                      rec.val_loss, rec.val_accuracy, rec.seconds);
        out << line;
    }
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace modrec
