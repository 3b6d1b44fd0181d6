#include "modrec/arch.hpp"

#include <nlohmann/json.hpp>

namespace modrec {

namespace {

using nlohmann::json;

const char* pad_name(Pad p) { return p == Pad::Same ? "same" : "valid"; }

Pad pad_from(const std::string& s) {
    if (s == "same") return Pad::Same;
    if (s == "valid") return Pad::Valid;
    throw ConfigError("spec: unknown padding '" + s + "'");
}

struct Geometry {
    std::size_t c, h, w;
};

// Walks the conv stack and returns the post-activation geometry of every
// conv layer. Throws ConfigError when a filter cannot fit.
std::vector<Geometry> conv_geometries(const ArchitectureSpec& spec) {
    std::vector<Geometry> out;
    Geometry g{1, 2, spec.input_width};
    for (std::size_t l = 0; l < spec.conv.size(); ++l) {
        const auto& c = spec.conv[l];
        if (c.pad_h == Pad::Valid) {
            if (c.fh > g.h) {
                throw ConfigError("spec: conv" + std::to_string(l + 1) + " filter height " +
                                  std::to_string(c.fh) + " exceeds input height " +
                                  std::to_string(g.h));
            }
            g.h = g.h - c.fh + 1;
        }
        if (c.pad_w == Pad::Valid) {
            if (c.fw > g.w) {
                throw ConfigError("spec: conv" + std::to_string(l + 1) + " filter width too large");
            }
            g.w = g.w - c.fw + 1;
        }
        g.c = c.filters;
        out.push_back(g);
    }
    return out;
}

}  // namespace

void ArchitectureSpec::validate() const {
    if (classes < 2) throw ConfigError("spec '" + id + "': no layers (class count " +
                                       std::to_string(classes) + ")");
    if (input_width < 1) throw ConfigError("spec: input width must be >= 1");
    for (std::size_t l = 0; l < conv.size(); ++l) {
        const auto& c = conv[l];
        if (c.filters < 1) throw ConfigError("spec: conv" + std::to_string(l + 1) + " has no filters");
        if (c.fh != 1 && c.fh != 2) {
            throw ConfigError("spec: conv" + std::to_string(l + 1) + " filter height must be 1 or 2");
        }
        if (c.fw < 1) throw ConfigError("spec: conv" + std::to_string(l + 1) + " filter width < 1");
    }
    for (std::size_t w : dense) {
        if (w < 1) throw ConfigError("spec: dense width < 1");
    }
    if (dense_block) {
        if (shortcut) throw ConfigError("spec: dense block and shortcut cannot be combined");
        for (const auto& c : conv) {
            if (c.pad_h != Pad::Same || c.pad_w != Pad::Same) {
                throw ConfigError("spec: dense block requires same padding on every conv layer");
            }
        }
    }
    const auto geoms = conv_geometries(*this);
    if (shortcut) {
        if (shortcut->from < 1 || shortcut->to <= shortcut->from || shortcut->to > conv.size()) {
            throw ConfigError("spec: shortcut endpoints out of range");
        }
        const Geometry& src = geoms[shortcut->from - 1];
        const Geometry& dst = geoms[shortcut->to - 1];
        if (src.h != dst.h || src.w != dst.w) {
            throw ConfigError("spec: shortcut spans a spatial size change");
        }
        if (!shortcut->projection && src.c != dst.c) {
            throw ConfigError("spec: shortcut channel mismatch (" + std::to_string(src.c) + " vs " +
                              std::to_string(dst.c) + ") needs a projection");
        }
    }
    if (id == "resnet4") {
        if (!shortcut || shortcut->to != shortcut->from + 2) {
            throw ConfigError("spec resnet4: needs one shortcut two conv layers deep");
        }
    }
    if (id == "densenet4" && !dense_block) {
        throw ConfigError("spec densenet4: dense_block wiring required");
    }
    if (id == "cldnn" && lstm_units != 50) {
        throw ConfigError("spec cldnn: recurrent layer must have 50 units");
    }
}

std::vector<std::pair<std::string, Shape>> param_plan(const ArchitectureSpec& spec) {
    spec.validate();
    std::vector<std::pair<std::string, Shape>> plan;
    const auto geoms = conv_geometries(spec);
    std::size_t in_c = 1;
    std::size_t dense_channels = 1;  // raw input map
    for (std::size_t l = 0; l < spec.conv.size(); ++l) {
        const auto& c = spec.conv[l];
        const std::size_t layer_in = spec.dense_block ? dense_channels : in_c;
        const std::string base = "conv" + std::to_string(l + 1);
        plan.emplace_back(base + ".w", Shape{c.filters, layer_in, c.fh, c.fw});
        plan.emplace_back(base + ".b", Shape{c.filters});
        dense_channels += c.filters;
        in_c = c.filters;
    }
    if (spec.shortcut && spec.shortcut->projection) {
        const std::size_t from_c = spec.conv[spec.shortcut->from - 1].filters;
        const std::size_t to_c = spec.conv[spec.shortcut->to - 1].filters;
        plan.emplace_back("shortcut.w", Shape{to_c, from_c, 1, 1});
        plan.emplace_back("shortcut.b", Shape{to_c});
    }
    std::size_t width;
    if (!spec.conv.empty()) {
        const Geometry& last = geoms.back();
        width = spec.lstm_units > 0 ? last.c * last.h : last.c * last.h * last.w;
    } else {
        width = spec.lstm_units > 0 ? 2 : 2 * spec.input_width;
    }
    if (spec.lstm_units > 0) {
        plan.emplace_back("lstm.wx", Shape{4 * spec.lstm_units, width});
        plan.emplace_back("lstm.wh", Shape{4 * spec.lstm_units, spec.lstm_units});
        plan.emplace_back("lstm.b", Shape{4 * spec.lstm_units});
        width = spec.lstm_units;
    }
    for (std::size_t d = 0; d < spec.dense.size(); ++d) {
        const std::string base = "dense" + std::to_string(d + 1);
        plan.emplace_back(base + ".w", Shape{width, spec.dense[d]});
        plan.emplace_back(base + ".b", Shape{spec.dense[d]});
        width = spec.dense[d];
    }
    plan.emplace_back("out.w", Shape{width, spec.classes});
    plan.emplace_back("out.b", Shape{spec.classes});
    return plan;
}

std::size_t param_count(const ArchitectureSpec& spec) {
    std::size_t total = 0;
    for (const auto& [name, shape] : param_plan(spec)) total += shape_volume(shape);
    return total;
}

ArchitectureSpec builtin_spec(const std::string& id, std::size_t classes, std::size_t input_width) {
    ArchitectureSpec s;
    s.id = id;
    s.classes = classes;
    s.input_width = input_width;
    s.dense = {128};
    if (id == "cnn2") {
        s.conv = {{256, 1, 3, Pad::Valid, Pad::Same}, {80, 2, 3, Pad::Valid, Pad::Same}};
    } else if (id == "cnn4" || id == "cldnn") {
        s.conv = {{256, 1, 3, Pad::Valid, Pad::Same},
                  {256, 2, 3, Pad::Valid, Pad::Same},
                  {80, 1, 3, Pad::Valid, Pad::Same},
                  {80, 1, 3, Pad::Valid, Pad::Same}};
        if (id == "cldnn") s.lstm_units = 50;
    } else if (id == "resnet4") {
        s.conv = {{256, 1, 3, Pad::Same, Pad::Same},
                  {256, 2, 3, Pad::Same, Pad::Same},
                  {80, 1, 3, Pad::Same, Pad::Same},
                  {80, 1, 3, Pad::Same, Pad::Same}};
        s.shortcut = ShortcutSpec{1, 3, true};
    } else if (id == "densenet4") {
        s.conv = {{256, 1, 3, Pad::Same, Pad::Same},
                  {128, 2, 3, Pad::Same, Pad::Same},
                  {80, 1, 3, Pad::Same, Pad::Same},
                  {80, 1, 3, Pad::Same, Pad::Same}};
        s.dense_block = true;
    } else {
        throw ConfigError("unknown architecture '" + id + "'");
    }
    s.validate();
    return s;
}

std::string spec_to_json(const ArchitectureSpec& spec) {
    json j;
    j["id"] = spec.id;
    j["classes"] = spec.classes;
    j["input_width"] = spec.input_width;
    j["conv"] = json::array();
    for (const auto& c : spec.conv) {
        j["conv"].push_back({{"filters", c.filters},
                             {"fh", c.fh},
                             {"fw", c.fw},
                             {"pad_h", pad_name(c.pad_h)},
                             {"pad_w", pad_name(c.pad_w)}});
    }
    j["dense_block"] = spec.dense_block;
    if (spec.shortcut) {
        j["shortcut"] = {{"from", spec.shortcut->from},
                         {"to", spec.shortcut->to},
                         {"projection", spec.shortcut->projection}};
    }
    j["lstm_units"] = spec.lstm_units;
    j["dense"] = spec.dense;
    return j.dump(2);
}

ArchitectureSpec spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("spec json: ") + e.what());
    }
    ArchitectureSpec s;
    try {
        s.id = j.at("id").get<std::string>();
        s.classes = j.at("classes").get<std::size_t>();
        s.input_width = j.value("input_width", std::size_t{128});
        for (const auto& c : j.at("conv")) {
            s.conv.push_back({c.at("filters").get<std::size_t>(), c.at("fh").get<std::size_t>(),
                              c.at("fw").get<std::size_t>(),
                              pad_from(c.at("pad_h").get<std::string>()),
                              pad_from(c.at("pad_w").get<std::string>())});
        }
        s.dense_block = j.value("dense_block", false);
        if (j.contains("shortcut")) {
            const auto& sc = j["shortcut"];
            s.shortcut = ShortcutSpec{sc.at("from").get<std::size_t>(),
                                      sc.at("to").get<std::size_t>(),
                                      sc.at("projection").get<bool>()};
        }
        s.lstm_units = j.value("lstm_units", std::size_t{0});
        s.dense = j.at("dense").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("spec json: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace modrec
