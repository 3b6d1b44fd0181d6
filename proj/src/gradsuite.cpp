#include "modrec/gradsuite.hpp"

#include "modrec/layers.hpp"

namespace modrec {

namespace {

// Max relative error across every parameter tensor of one network, loss =
// cross-entropy of a fixed random frame against a fixed label. Checked at
// a generic parameter point: zero biases leave some recurrent units inert,
// and their near-zero gradients sit below what central differences can
// resolve.
double network_check(const ArchitectureSpec& spec, double eps) {
    Network<double> net = build<double>(spec, 7);
    Rng perturb(12345);
    for (auto& [name, t] : net.params) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += perturb.uniform(-0.3, 0.3);
    }
    Rng frng(99);
    const Tensord frame = uniform_tensor<double>(frng, {2, spec.input_width}, -1.0, 1.0);
    const int label = 1;

    Tape<double> tape;
    const auto fwd = forward_on_tape(net, tape, frame, Mode::Eval);
    tape.backward(tape.cross_entropy(fwd.probs, label));

    Network<double> work = net;
    double worst = 0.0;
    for (std::size_t p = 0; p < net.params.size(); ++p) {
        const Tensord& analytic = tape.grad(fwd.param_nodes[p]);
        auto f = [&work, &frame, p, label](const Tensord& theta) {
            work.params[p].second = theta;
            Tape<double> t;
            const auto r = forward_on_tape(work, t, frame, Mode::Eval);
            return static_cast<double>(t.value(t.cross_entropy(r.probs, label))[0]);
        };
        worst = std::max(worst, gradient_check<double>(f, net.params[p].second, analytic, eps));
        work.params[p].second = net.params[p].second;
    }
    return worst;
}

double dense_softmax_ce_check(double eps) {
    Rng rng(11);
    const Tensord x = uniform_tensor<double>(rng, {4}, -1.0, 1.0);
    Tensord w = uniform_tensor<double>(rng, {4, 3}, -0.8, 0.8);
    const Tensord b = uniform_tensor<double>(rng, {3}, -0.2, 0.2);
    auto run = [&](const Tensord& weights, Tape<double>& tape, int* w_node) {
        auto xn = tape.leaf(x);
        auto wn = tape.leaf(weights);
        auto bn = tape.leaf(b);
        if (w_node) *w_node = wn;
        auto probs = tape.softmax(tape.add(tape.vecmat(xn, wn), bn));
        return tape.cross_entropy(probs, 2);
    };
    Tape<double> tape;
    int w_node = -1;
    auto loss = run(w, tape, &w_node);
    tape.backward(loss);
    const Tensord analytic = tape.grad(w_node);
    auto f = [&](const Tensord& weights) {
        Tape<double> t;
        return static_cast<double>(t.value(run(weights, t, nullptr))[0]);
    };
    return gradient_check<double>(f, w, analytic, eps);
}

double conv_check(double eps) {
    Rng rng(5);
    const Tensord x = uniform_tensor<double>(rng, {3, 2, 8}, -1.0, 1.0);
    Tensord w = uniform_tensor<double>(rng, {4, 3, 2, 3}, -0.5, 0.5);
    const Tensord b = uniform_tensor<double>(rng, {4}, -0.1, 0.1);
    auto run = [&](const Tensord& weights, Tape<double>& tape, int* w_node) {
        auto xn = tape.leaf(x);
        auto wn = tape.leaf(weights);
        auto bn = tape.leaf(b);
        if (w_node) *w_node = wn;
        auto y = tape.conv2d(xn, wn, bn, Pad::Valid, Pad::Same);
        return tape.sum(tape.relu(y));
    };
    Tape<double> tape;
    int w_node = -1;
    auto loss = run(w, tape, &w_node);
    tape.backward(loss);
    const Tensord analytic = tape.grad(w_node);
    auto f = [&](const Tensord& weights) {
        Tape<double> t;
        return static_cast<double>(t.value(run(weights, t, nullptr))[0]);
    };
    return gradient_check<double>(f, w, analytic, eps);
}

double lstm_check(double eps) {
    Rng rng(21);
    const std::size_t units = 5, feats = 3, steps = 3;
    const Tensord seq = uniform_tensor<double>(rng, {steps, feats}, -1.0, 1.0);
    LstmParams<double> p = init_lstm<double>(units, feats, rng);
    double worst = 0.0;
    // check all three parameter tensors
    for (int which = 0; which < 3; ++which) {
        auto run = [&](const Tensord& theta, Tape<double>& tape, int* theta_node) {
            LstmParams<double> q = p;
            (which == 0 ? q.w_input : which == 1 ? q.w_recurrent : q.bias) = theta;
            auto seq_node = tape.leaf(seq);
            auto wx = tape.leaf(q.w_input);
            auto wh = tape.leaf(q.w_recurrent);
            auto bias = tape.leaf(q.bias);
            if (theta_node) *theta_node = which == 0 ? wx : which == 1 ? wh : bias;
            return tape.sum(lstm_on_tape(tape, seq_node, wx, wh, bias));
        };
        const Tensord& current = which == 0 ? p.w_input : which == 1 ? p.w_recurrent : p.bias;
        Tape<double> tape;
        int theta_node = -1;
        auto loss = run(current, tape, &theta_node);
        tape.backward(loss);
        const Tensord analytic = tape.grad(theta_node);
        auto f = [&](const Tensord& theta) {
            Tape<double> t;
            return static_cast<double>(t.value(run(theta, t, nullptr))[0]);
        };
        worst = std::max(worst, gradient_check<double>(f, current, analytic, eps));
    }
    return worst;
}

// Dropout with the mask frozen by reseeding the same rng each evaluation.
double dropout_check(double eps) {
    Rng rng(31);
    Tensord x = uniform_tensor<double>(rng, {12}, -1.0, 1.0);
    auto run = [](const Tensord& input, Tape<double>& tape) {
        Rng mask_rng(404);
        return tape.sum(tape.dropout(tape.relu(tape.leaf(input)), 0.5, mask_rng));
    };
    Tape<double> tape;
    auto loss = run(x, tape);
    tape.backward(loss);
    const Tensord analytic = tape.grad(0);
    auto f = [&](const Tensord& input) {
        Tape<double> t;
        return static_cast<double>(t.value(run(input, t))[0]);
    };
    return gradient_check<double>(f, x, analytic, eps);
}

}  // namespace

ArchitectureSpec tiny_spec(const std::string& id) {
    ArchitectureSpec s;
    s.id = id;
    s.classes = 4;
    s.input_width = 16;
    s.dense = {8};
    if (id == "cnn2") {
        s.conv = {{6, 1, 3, Pad::Valid, Pad::Same}, {5, 2, 3, Pad::Valid, Pad::Same}};
    } else if (id == "cnn4" || id == "cldnn") {
        s.conv = {{6, 1, 3, Pad::Valid, Pad::Same},
                  {5, 2, 3, Pad::Valid, Pad::Same},
                  {4, 1, 3, Pad::Valid, Pad::Same},
                  {4, 1, 3, Pad::Valid, Pad::Same}};
        if (id == "cldnn") s.lstm_units = 50;
    } else if (id == "resnet4") {
        s.conv = {{6, 1, 3, Pad::Same, Pad::Same},
                  {5, 2, 3, Pad::Same, Pad::Same},
                  {4, 1, 3, Pad::Same, Pad::Same},
                  {4, 1, 3, Pad::Same, Pad::Same}};
        s.shortcut = ShortcutSpec{1, 3, true};
    } else if (id == "densenet4") {
        s.conv = {{6, 1, 3, Pad::Same, Pad::Same},
                  {5, 2, 3, Pad::Same, Pad::Same},
                  {4, 1, 3, Pad::Same, Pad::Same},
                  {4, 1, 3, Pad::Same, Pad::Same}};
        s.dense_block = true;
    } else {
        throw ConfigError("tiny_spec: unknown id '" + id + "'");
    }
    s.validate();
    return s;
}

std::vector<GradCheckResult> gradient_check_suite(double eps) {
    std::vector<GradCheckResult> results;
    results.push_back({"dense+softmax+cross-entropy", dense_softmax_ce_check(eps)});
    results.push_back({"conv2d+relu", conv_check(eps)});
    results.push_back({"lstm (T=3, all params)", lstm_check(eps)});
    results.push_back({"dropout (frozen mask)", dropout_check(eps)});
    for (const char* id : {"cnn2", "cnn4", "resnet4", "densenet4", "cldnn"}) {
        results.push_back({std::string("network ") + id, network_check(tiny_spec(id), eps)});
    }
    return results;
}

}  // namespace modrec
