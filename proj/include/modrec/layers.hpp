#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "modrec/autodiff.hpp"
#include "modrec/errors.hpp"
#include "modrec/rng.hpp"
#include "modrec/tensor.hpp"

namespace modrec {

// 2-D convolution parameters; filter heights beyond 2 never occur in the
// evaluated architectures (the I/Q axis only has two rows).
template <typename S>
struct ConvParams {
    Tensor<S> weights;  // [outC x inC x fH x fW]
    Tensor<S> bias;     // [outC]
    Pad pad_h = Pad::Valid;
    Pad pad_w = Pad::Same;

    void validate() const {
        if (weights.rank() != 4) {
            throw ShapeError("conv params: weights must be rank 4, got " + shape_str(weights.shape()));
        }
        const std::size_t fh = weights.extent(2);
        if (fh != 1 && fh != 2) {
            throw ConfigError("conv params: filter height must be 1 or 2, got " + std::to_string(fh));
        }
        if (weights.extent(3) < 1) throw ConfigError("conv params: filter width must be >= 1");
        if (bias.rank() != 1 || bias.extent(0) != weights.extent(0)) {
            throw ShapeError("conv params: bias length " + std::to_string(bias.size()) +
                             " != filter count " + std::to_string(weights.extent(0)));
        }
    }
};

template <typename S>
struct DenseParams {
    Tensor<S> weights;  // [in x out]
    Tensor<S> bias;     // [out]

    void validate() const {
        if (weights.rank() != 2) {
            throw ShapeError("dense params: weights must be rank 2, got " + shape_str(weights.shape()));
        }
        if (bias.rank() != 1 || bias.extent(0) != weights.extent(1)) {
            throw ShapeError("dense params: bias length " + std::to_string(bias.size()) +
                             " != output size " + std::to_string(weights.extent(1)));
        }
    }
};

// Gate order is fixed as (input, forget, cell candidate, output), stacked
// along the first axis of each weight matrix.
template <typename S>
struct LstmParams {
    Tensor<S> w_input;      // [4U x F]
    Tensor<S> w_recurrent;  // [4U x U]
    Tensor<S> bias;         // [4U]

    std::size_t units() const { return w_recurrent.extent(1); }
    std::size_t features() const { return w_input.extent(1); }

    void validate() const {
        if (w_input.rank() != 2 || w_recurrent.rank() != 2 || bias.rank() != 1) {
            throw ShapeError("lstm params: malformed ranks");
        }
        const std::size_t u = units();
        if (w_input.extent(0) != 4 * u || w_recurrent.extent(0) != 4 * u || bias.extent(0) != 4 * u) {
            throw ShapeError("lstm params: gate dimension must be 4 x units");
        }
    }
};

// Glorot-uniform limit: sqrt(6 / (fan_in + fan_out)).
inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template <typename S>
ConvParams<S> init_conv(std::size_t out_c, std::size_t in_c, std::size_t fh, std::size_t fw,
                        Pad pad_h, Pad pad_w, Rng& rng) {
    const std::size_t fan = fh * fw;
    const double lim = glorot_limit(in_c * fan, out_c * fan);
    ConvParams<S> p{uniform_tensor<S>(rng, {out_c, in_c, fh, fw}, -lim, lim),
                    Tensor<S>::zeros({out_c}), pad_h, pad_w};
    p.validate();
    return p;
}

template <typename S>
DenseParams<S> init_dense(std::size_t in, std::size_t out, Rng& rng) {
    const double lim = glorot_limit(in, out);
    DenseParams<S> p{uniform_tensor<S>(rng, {in, out}, -lim, lim), Tensor<S>::zeros({out})};
    p.validate();
    return p;
}

// Forget-gate bias starts at 1 so early training does not flush the cell.
template <typename S>
LstmParams<S> init_lstm(std::size_t units, std::size_t features, Rng& rng) {
    const double lim_in = glorot_limit(features, units);
    const double lim_rec = glorot_limit(units, units);
    LstmParams<S> p{uniform_tensor<S>(rng, {4 * units, features}, -lim_in, lim_in),
                    uniform_tensor<S>(rng, {4 * units, units}, -lim_rec, lim_rec),
                    Tensor<S>::zeros({4 * units})};
    for (std::size_t i = units; i < 2 * units; ++i) p.bias[i] = S{1};
    p.validate();
    return p;
}

// ---- standalone (tape-free) forward ops ----

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const ConvParams<S>& p) {
    p.validate();
    ConvGeom g = ConvGeom::resolve(x.shape(), p.weights.shape(), p.pad_h, p.pad_w);
    Tensor<S> col;
    return detail::conv2d_forward(x, p.weights, p.bias, g, col);
}

template <typename S>
Tensor<S> dense(const Tensor<S>& x, const DenseParams<S>& p) {
    p.validate();
    if (x.rank() != 1 || x.extent(0) != p.weights.extent(0)) {
        throw ShapeError("dense: input " + shape_str(x.shape()) + " does not match weights " +
                         shape_str(p.weights.shape()));
    }
    const std::size_t in = p.weights.extent(0), out = p.weights.extent(1);
    Tensor<S> y = p.bias;
    as_matrix(y, 1, out).noalias() += as_matrix(x, 1, in) * as_matrix(p.weights, in, out);
    return y;
}

enum class Activation { Relu, Softmax };

template <typename S>
Tensor<S> activation(const Tensor<S>& x, Activation kind) {
    if (kind == Activation::Relu) {
        Tensor<S> out = x;
        for (auto& v : out.values()) v = v > S{0} ? v : S{0};
        return out;
    }
    Tape<S> tape;
    return tape.value(tape.softmax(tape.leaf(x)));
}

enum class Mode { Train, Eval };

template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0,1)");
    }
    if (mode == Mode::Eval) return x;
    Tape<S> tape;
    return tape.value(tape.dropout(tape.leaf(x), rate, rng));
}

// Records one LSTM pass over seq [T x F] on the tape and returns the final
// hidden state node [U]. h and c start at zero.
template <typename S>
typename Tape<S>::NodeId lstm_on_tape(Tape<S>& tape, typename Tape<S>::NodeId seq,
                                      typename Tape<S>::NodeId w_input,
                                      typename Tape<S>::NodeId w_recurrent,
                                      typename Tape<S>::NodeId bias) {
    const std::size_t t_steps = tape.value(seq).extent(0);
    const std::size_t features = tape.value(seq).extent(1);
    const std::size_t u = tape.value(w_recurrent).extent(1);
    if (tape.value(w_input).extent(1) != features) {
        throw ShapeError("lstm: feature size " + std::to_string(features) +
                         " does not match input weights " +
                         shape_str(tape.value(w_input).shape()));
    }
    if (t_steps < 1) throw ContractError("lstm: empty sequence");
    auto h = tape.leaf(Tensor<S>::zeros({u}));
    auto c = tape.leaf(Tensor<S>::zeros({u}));
    for (std::size_t t = 0; t < t_steps; ++t) {
        auto x_t = tape.row(seq, t);
        auto pre = tape.add(tape.add(tape.matvec(w_input, x_t), tape.matvec(w_recurrent, h)), bias);
        auto gate_i = tape.sigmoid(tape.segment(pre, 0, u));
        auto gate_f = tape.sigmoid(tape.segment(pre, u, u));
        auto cand = tape.tanh(tape.segment(pre, 2 * u, u));
        auto gate_o = tape.sigmoid(tape.segment(pre, 3 * u, u));
        c = tape.add(tape.mul(gate_f, c), tape.mul(gate_i, cand));
        h = tape.mul(gate_o, tape.tanh(c));
    }
    return h;
}

template <typename S>
Tensor<S> lstm(const Tensor<S>& seq, const LstmParams<S>& p) {
    p.validate();
    if (seq.rank() != 2) throw ShapeError("lstm: sequence must be [TxF], got " + shape_str(seq.shape()));
    Tape<S> tape;
    auto node = lstm_on_tape(tape, tape.leaf(seq), tape.leaf(p.w_input), tape.leaf(p.w_recurrent),
                             tape.leaf(p.bias));
    return tape.value(node);
}

// ---- finite-difference gradient checking ----

// f evaluates the scalar objective at the current parameter values;
// analytic is the gradient under test. Returns
// max_i |analytic - numeric| / max(1e-12, |analytic| + |numeric|) with
// central differences of step eps. Meant to run in double.
template <typename S>
double gradient_check(const std::function<double(const Tensor<S>&)>& f, Tensor<S> params,
                      const Tensor<S>& analytic, double eps) {
    if (!params.same_shape(analytic)) {
        throw ShapeError("gradient_check: gradient shape " + shape_str(analytic.shape()) +
                         " != parameter shape " + shape_str(params.shape()));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const S saved = params[i];
        params[i] = saved + static_cast<S>(eps);
        const double up = f(params);
        params[i] = saved - static_cast<S>(eps);
        const double down = f(params);
        params[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericsError("gradient_check: objective is not finite at coordinate " +
                                std::to_string(i));
        }
        const double numeric = (up - down) / (2.0 * eps);
        const double a = static_cast<double>(analytic[i]);
        const double rel = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace modrec
