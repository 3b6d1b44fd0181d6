#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modrec/autodiff.hpp"
#include "modrec/layers.hpp"
#include "modrec/rng.hpp"
#include "modrec/tensor.hpp"

namespace modrec {

struct ConvLayerSpec {
    std::size_t filters = 0;
    std::size_t fh = 1, fw = 3;
    Pad pad_h = Pad::Valid;
    Pad pad_w = Pad::Same;
};

// Residual shortcut between conv layers (1-based indices): the source's
// activation is added onto the destination's pre-activation output,
// through a 1x1 projection when channel counts differ.
struct ShortcutSpec {
    std::size_t from = 0;
    std::size_t to = 0;
    bool projection = false;
};

struct ArchitectureSpec {
    std::string id;  // cnn2 | cnn4 | resnet4 | densenet4 | cldnn | custom
    std::vector<ConvLayerSpec> conv;
    bool dense_block = false;  // DenseNet wiring: conv l consumes input + all previous outputs
    std::optional<ShortcutSpec> shortcut;
    std::size_t lstm_units = 0;  // 0 = no recurrent layer
    std::vector<std::size_t> dense;  // hidden dense widths, before the class layer
    std::size_t classes = 10;
    std::size_t input_width = 128;

    void validate() const;
};

// Known architecture ids ("bfsk"-style aliases are not needed here; ids are
// exactly the five evaluated networks).
ArchitectureSpec builtin_spec(const std::string& id, std::size_t classes = 10,
                              std::size_t input_width = 128);

std::string spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const std::string& text);

// Ordered parameter plan (name -> shape) for a spec; build(), param_count()
// and the model file reader all derive from this single layout.
std::vector<std::pair<std::string, Shape>> param_plan(const ArchitectureSpec& spec);

std::size_t param_count(const ArchitectureSpec& spec);

template <typename S>
struct Network {
    ArchitectureSpec spec;
    std::uint64_t init_seed = 0;
    std::vector<std::pair<std::string, Tensor<S>>> params;  // plan order

    Tensor<S>& param(const std::string& name) {
        for (auto& [n, t] : params)
            if (n == name) return t;
        throw IndexError("network: no parameter named " + name);
    }
    const Tensor<S>& param(const std::string& name) const {
        for (const auto& [n, t] : params)
            if (n == name) return t;
        throw IndexError("network: no parameter named " + name);
    }
};

// Deterministic Glorot init; parameter l is drawn from rng.split(l) so the
// layout of earlier layers never perturbs later ones.
template <typename S>
Network<S> build(const ArchitectureSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network<S> net{spec, seed, {}};
    const Rng root(seed);
    std::size_t index = 0;
    for (const auto& [name, shape] : param_plan(spec)) {
        Rng rng = root.split(index++);
        Tensor<S> t;
        if (name.ends_with(".b")) {
            t = Tensor<S>::zeros(shape);
            if (name == "lstm.b") {
                const std::size_t u = shape[0] / 4;
                for (std::size_t i = u; i < 2 * u; ++i) t[i] = S{1};  // forget gate
            }
        } else {
            std::size_t fan_in = 0, fan_out = 0;
            if (shape.size() == 4) {  // conv [outC x inC x fH x fW]
                fan_in = shape[1] * shape[2] * shape[3];
                fan_out = shape[0] * shape[2] * shape[3];
            } else {  // dense [in x out], lstm [4U x F] treated per gate row
                if (name == "lstm.wx" || name == "lstm.wh") {
                    fan_in = shape[1];
                    fan_out = shape[0] / 4;
                } else {
                    fan_in = shape[0];
                    fan_out = shape[1];
                }
            }
            const double lim = glorot_limit(fan_in, fan_out);
            t = uniform_tensor<S>(rng, shape, -lim, lim);
        }
        net.params.emplace_back(name, std::move(t));
    }
    return net;
}

template <typename S>
struct ForwardResult {
    typename Tape<S>::NodeId probs = -1;
    std::vector<typename Tape<S>::NodeId> param_nodes;  // aligned with net.params
};

// Records the whole classifier onto the tape. rng is only consulted in
// train mode with a nonzero dropout rate.
template <typename S>
ForwardResult<S> forward_on_tape(const Network<S>& net, Tape<S>& tape, const Tensor<S>& frame,
                                 Mode mode, double dropout_rate = 0.0, Rng* rng = nullptr) {
    const ArchitectureSpec& spec = net.spec;
    if (frame.rank() != 2 || frame.extent(0) != 2 || frame.extent(1) != spec.input_width) {
        throw ShapeError("forward: frame must be [2x" + std::to_string(spec.input_width) +
                         "], got " + shape_str(frame.shape()));
    }
    const bool do_drop = mode == Mode::Train && dropout_rate > 0.0;
    if (do_drop && rng == nullptr) throw ContractError("forward: train-mode dropout needs an rng");

    ForwardResult<S> res;
    res.param_nodes.reserve(net.params.size());
    // net outlives any single-example tape, so parameters are borrowed
    for (const auto& [name, t] : net.params) res.param_nodes.push_back(tape.leaf_ref(t));
    auto pnode = [&](const std::string& name) {
        for (std::size_t i = 0; i < net.params.size(); ++i)
            if (net.params[i].first == name) return res.param_nodes[i];
        throw IndexError("forward: no parameter named " + name);
    };

    auto input = tape.leaf(frame.reshaped({1, 2, spec.input_width}));
    std::vector<typename Tape<S>::NodeId> feats{input};  // dense-block inputs
    std::vector<typename Tape<S>::NodeId> acts;          // post-activation conv outputs
    auto cur = input;
    for (std::size_t l = 0; l < spec.conv.size(); ++l) {
        const auto& c = spec.conv[l];
        const std::string base = "conv" + std::to_string(l + 1);
        auto layer_in = spec.dense_block && feats.size() > 1 ? tape.concat_ch(feats) : cur;
        auto z = tape.conv2d(layer_in, pnode(base + ".w"), pnode(base + ".b"), c.pad_h, c.pad_w);
        if (spec.shortcut && spec.shortcut->to == l + 1) {
            auto src = acts[spec.shortcut->from - 1];
            if (spec.shortcut->projection) {
                src = tape.conv2d(src, pnode("shortcut.w"), pnode("shortcut.b"), Pad::Valid,
                                  Pad::Valid);
            }
            z = tape.add(z, src);
        }
        auto a = tape.relu(z);
        if (do_drop) a = tape.dropout(a, dropout_rate, *rng);
        acts.push_back(a);
        feats.push_back(a);
        cur = a;
    }

    if (spec.lstm_units > 0) {
        cur = lstm_on_tape(tape, tape.to_sequence(cur), pnode("lstm.wx"), pnode("lstm.wh"),
                           pnode("lstm.b"));
    } else if (tape.value(cur).rank() > 1) {
        cur = tape.flatten(cur);
    }

    for (std::size_t d = 0; d < spec.dense.size(); ++d) {
        const std::string base = "dense" + std::to_string(d + 1);
        cur = tape.relu(tape.add(tape.vecmat(cur, pnode(base + ".w")), pnode(base + ".b")));
        if (d == 0 && do_drop) cur = tape.dropout(cur, dropout_rate, *rng);
    }
    auto logits = tape.add(tape.vecmat(cur, pnode("out.w")), pnode("out.b"));
    res.probs = tape.softmax(logits);
    return res;
}

// Probability vector over classes for one frame.
template <typename S>
Tensor<S> forward_classify(const Network<S>& net, const Tensor<S>& frame, Mode mode = Mode::Eval,
                           double dropout_rate = 0.0, Rng* rng = nullptr) {
    Tape<S> tape;
    auto res = forward_on_tape(net, tape, frame, mode, dropout_rate, rng);
    return tape.value(res.probs);
}

using Networkf = Network<float>;

}  // namespace modrec
