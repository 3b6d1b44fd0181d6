#include <doctest.h>

#include "modrec/arch.hpp"
#include "modrec/gradsuite.hpp"

using namespace modrec;

namespace {

// Independent per-layer enumeration of trainable scalars, walking the spec
// geometry directly.
std::size_t enumerate_params(const ArchitectureSpec& s) {
    std::size_t total = 0;
    std::size_t in_c = 1, h = 2, w = s.input_width, concat = 1;
    for (const auto& c : s.conv) {
        const std::size_t layer_in = s.dense_block ? concat : in_c;
        total += c.filters * layer_in * c.fh * c.fw + c.filters;
        if (c.pad_h == Pad::Valid) h = h - c.fh + 1;
        if (c.pad_w == Pad::Valid) w = w - c.fw + 1;
        concat += c.filters;
        in_c = c.filters;
    }
    if (s.shortcut && s.shortcut->projection) {
        total += s.conv[s.shortcut->to - 1].filters * s.conv[s.shortcut->from - 1].filters +
                 s.conv[s.shortcut->to - 1].filters;
    }
    std::size_t width = s.conv.empty() ? 2 * s.input_width : in_c * h * w;
    if (s.lstm_units > 0) {
        const std::size_t f = s.conv.empty() ? 2 : in_c * h;
        total += 4 * s.lstm_units * f + 4 * s.lstm_units * s.lstm_units + 4 * s.lstm_units;
        width = s.lstm_units;
    }
    for (std::size_t d : s.dense) {
        total += width * d + d;
        width = d;
    }
    total += width * s.classes + s.classes;
    return total;
}

}  // namespace

TEST_CASE("param_count: cnn2 with 10 classes has 1,436,122 parameters") {
    CHECK(param_count(builtin_spec("cnn2", 10)) == 1436122);
}

TEST_CASE("param_count matches an independent enumeration for all five architectures") {
    for (const char* id : {"cnn2", "cnn4", "resnet4", "densenet4", "cldnn"}) {
        const auto spec = builtin_spec(id);
        CHECK(param_count(spec) == enumerate_params(spec));
        const auto tiny = tiny_spec(id);
        CHECK(param_count(tiny) == enumerate_params(tiny));
    }
}

TEST_CASE("param_count: single dense layer 2 -> 3 has 9 parameters") {
    ArchitectureSpec s;
    s.id = "custom";
    s.classes = 3;
    s.input_width = 1;  // flattened input is 2 values
    CHECK(param_count(s) == 9);
}

TEST_CASE("empty spec is rejected") {
    ArchitectureSpec s;
    s.id = "custom";
    s.conv.clear();
    s.dense.clear();
    s.classes = 0;
    CHECK_THROWS_AS(param_count(s), ConfigError);
}

TEST_CASE("build is deterministic in the seed") {
    const auto spec = tiny_spec("cnn4");
    const auto a = build<float>(spec, 42);
    const auto b = build<float>(spec, 42);
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        CHECK(content_hash(a.params[i].second) == content_hash(b.params[i].second));
    }
    const auto c = build<float>(spec, 43);
    bool differs = false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        differs = differs || !(a.params[i].second == c.params[i].second);
    }
    CHECK(differs);
}

TEST_CASE("cldnn carries exactly one LSTM with 50 units") {
    const auto net = build<float>(builtin_spec("cldnn"), 1);
    const auto& wh = net.param("lstm.wh");
    CHECK(wh.shape() == Shape{200, 50});
    std::size_t lstm_tensors = 0;
    for (const auto& [name, t] : net.params) {
        if (name.rfind("lstm.", 0) == 0) ++lstm_tensors;
    }
    CHECK(lstm_tensors == 3);
    // forget-gate bias block initialized to one
    const auto& bias = net.param("lstm.b");
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(bias[i] == 0.0f);
        CHECK(bias[50 + i] == 1.0f);
        CHECK(bias[100 + i] == 0.0f);
        CHECK(bias[150 + i] == 0.0f);
    }
}

TEST_CASE("densenet conv inputs grow by channel concatenation") {
    const auto spec = builtin_spec("densenet4");
    const auto plan = param_plan(spec);
    auto shape_of = [&](const std::string& name) {
        for (const auto& [n, s] : plan)
            if (n == name) return s;
        throw std::runtime_error("missing " + name);
    };
    CHECK(shape_of("conv1.w")[1] == 1);
    CHECK(shape_of("conv2.w")[1] == 1 + 256);
    CHECK(shape_of("conv3.w")[1] == 1 + 256 + 128);
    CHECK(shape_of("conv4.w")[1] == 1 + 256 + 128 + 80);
}

TEST_CASE("zeroed residual branch makes the network equal its shortcut-only reduction") {
    ArchitectureSpec s;
    s.id = "resnet4";
    s.classes = 3;
    s.input_width = 12;
    s.conv = {{4, 1, 3, Pad::Same, Pad::Same},
              {4, 1, 3, Pad::Same, Pad::Same},
              {4, 1, 3, Pad::Same, Pad::Same}};
    s.shortcut = ShortcutSpec{1, 3, false};
    s.dense = {6};
    auto net = build<double>(s, 5);
    // zero the residual branch (conv2, conv3)
    for (const char* name : {"conv2.w", "conv2.b", "conv3.w", "conv3.b"}) {
        auto& t = net.param(name);
        t = Tensord::zeros(t.shape());
    }
    Rng rng(8);
    const auto frame = uniform_tensor<double>(rng, {2, 12}, -1, 1);
    const auto got = forward_classify(net, frame);

    // hand-built reduction: conv1 -> relu -> (identity block) -> dense head
    Tape<double> tape;
    auto a1 = tape.relu(tape.conv2d(tape.leaf(frame.reshaped({1, 2, 12})),
                                    tape.leaf(net.param("conv1.w")),
                                    tape.leaf(net.param("conv1.b")), Pad::Same, Pad::Same));
    auto a3 = tape.relu(a1);  // relu after the (identity) addition
    auto hidden = tape.relu(tape.add(tape.vecmat(tape.flatten(a3), tape.leaf(net.param("dense1.w"))),
                                     tape.leaf(net.param("dense1.b"))));
    auto probs = tape.softmax(tape.add(tape.vecmat(hidden, tape.leaf(net.param("out.w"))),
                                       tape.leaf(net.param("out.b"))));
    const auto want = tape.value(probs);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);  // bit-exact
}

TEST_CASE("lstm output is sensitive to time-step order") {
    Rng rng(61);
    auto p = init_lstm<float>(6, 4, rng);
    auto seq = uniform_tensor<float>(rng, {5, 4}, -1, 1);
    const auto base = lstm(seq, p);
    for (std::size_t j = 0; j < 4; ++j) std::swap(seq.at(1, j), seq.at(2, j));
    const auto swapped = lstm(seq, p);
    bool differs = false;
    for (std::size_t i = 0; i < base.size(); ++i) differs = differs || base[i] != swapped[i];
    CHECK(differs);
}

TEST_CASE("all five architectures emit valid probability vectors") {
    Rng rng(90);
    for (const char* id : {"cnn2", "cnn4", "resnet4", "densenet4", "cldnn"}) {
        const auto net = build<float>(tiny_spec(id), 3);
        const auto frame = uniform_tensor<float>(rng, {2, 16}, -1, 1);
        const auto probs = forward_classify(net, frame);
        REQUIRE(probs.size() == 4);
        float total = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            CHECK(probs[i] >= 0.0f);
            total += probs[i];
        }
        CHECK(std::abs(total - 1.0f) <= 1e-6f);
    }
}

TEST_CASE("full-size cnn2 forward has the published geometry end to end") {
    const auto net = build<float>(builtin_spec("cnn2"), 17);
    Rng rng(18);
    const auto frame = uniform_tensor<float>(rng, {2, 128}, -1, 1);
    const auto probs = forward_classify(net, frame);
    CHECK(probs.size() == 10);
    CHECK_THROWS_AS(forward_classify(net, uniform_tensor<float>(rng, {2, 64}, -1, 1)), ShapeError);
}

TEST_CASE("fresh networks start near the uniform prediction") {
    Rng frng(2);
    const auto frame = uniform_tensor<float>(frng, {2, 128}, -1, 1);
    const double ln10 = std::log(10.0);
    int good_ce = 0, good_peak = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto net = build<float>(builtin_spec("cnn2"), seed);
        const auto probs = forward_classify(net, frame);
        float peak = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) peak = std::max(peak, probs[i]);
        const double ce = -std::log(std::max(1e-12, static_cast<double>(probs[3])));
        if (peak < 0.5f) ++good_peak;
        if (std::abs(ce - ln10) < 0.7) ++good_ce;
    }
    CHECK(good_peak >= 99);
    CHECK(good_ce >= 99);
}

TEST_CASE("purity: identical frames give identical eval outputs") {
    const auto net = build<float>(tiny_spec("cnn4"), 4);
    const auto frame = Tensorf::zeros({2, 16});
    CHECK(forward_classify(net, frame) == forward_classify(net, frame));
}

TEST_CASE("spec json round-trips") {
    for (const char* id : {"cnn2", "cnn4", "resnet4", "densenet4", "cldnn"}) {
        const auto spec = builtin_spec(id);
        const std::string j = spec_to_json(spec);
        const auto back = spec_from_json(j);
        CHECK(spec_to_json(back) == j);
    }
    CHECK_THROWS_AS(spec_from_json("{"), FormatError);
    CHECK_THROWS_AS(spec_from_json("{\"id\":\"x\"}"), FormatError);
}

TEST_CASE("class count is configurable (11-class variant)") {
    const auto spec = builtin_spec("cnn2", 11);
    CHECK(param_count(spec) == 1436122 - (128 * 10 + 10) + (128 * 11 + 11));
}
