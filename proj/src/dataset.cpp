#include "modrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "modrec/binio.hpp"
#include "modrec/parallel.hpp"

namespace modrec {

namespace {

constexpr char kDatasetMagic[] = "RML1";
constexpr char kModelMagic[] = "RMLM";
constexpr std::uint32_t kVersion = 1;

ByteWriter serialize_dataset(const Dataset& d) {
    ByteWriter w;
    if (d.class_names.empty()) throw ContractError("dataset: no classes");
    const std::size_t frame_len = d.examples.empty() ? 128 : d.examples[0].iq.extent(1);
    w.ascii(kDatasetMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(d.examples.size()));
    w.u32(static_cast<std::uint32_t>(frame_len));
    w.u16(static_cast<std::uint16_t>(d.class_names.size()));
    for (const auto& name : d.class_names) {
        if (name.size() > 255) throw ContractError("dataset: class name too long");
        w.u8(static_cast<std::uint8_t>(name.size()));
        w.ascii(name);
    }
    for (const auto& ex : d.examples) {
        if (ex.iq.rank() != 2 || ex.iq.extent(0) != 2 || ex.iq.extent(1) != frame_len) {
            throw ContractError("dataset: frame shape " + shape_str(ex.iq.shape()) +
                                " does not match frame length " + std::to_string(frame_len));
        }
        w.i8(ex.snr_db);
        w.u8(ex.class_idx);
        for (std::size_t i = 0; i < 2 * frame_len; ++i) w.f32(ex.iq[i]);
    }
    return w;
}

}  // namespace

std::vector<int> Dataset::snr_values() const {
    std::vector<int> snrs;
    for (const auto& ex : examples) snrs.push_back(ex.snr_db);
    std::sort(snrs.begin(), snrs.end());
    snrs.erase(std::unique(snrs.begin(), snrs.end()), snrs.end());
    return snrs;
}

std::vector<int> GenConfig::snr_grid() const {
    std::vector<int> grid;
    for (int s = snr_min; s <= snr_max; s += snr_step) grid.push_back(s);
    return grid;
}

void GenConfig::validate() const {
    if (schemes.empty()) throw ConfigError("gen: no modulation classes configured");
    if (frames_per_cell < 1) throw ConfigError("gen: frames per cell must be >= 1");
    if (frame_len < 2) throw ConfigError("gen: frame length must be >= 2");
    if (snr_step < 1 || snr_max < snr_min) throw ConfigError("gen: bad snr grid");
    synth.validate();
}

GenConfig profile_config(const std::string& name) {
    GenConfig cfg;
    cfg.profile = name;
    if (name == "paper") {
        cfg.frames_per_cell = 800;
    } else if (name == "smoke-paper") {
        cfg.frames_per_cell = 100;
    } else if (name == "smoke") {
        cfg.frames_per_cell = 5;
    } else {
        throw ConfigError("unknown profile '" + name + "' (paper | smoke-paper | smoke)");
    }
    return cfg;
}

Dataset build_dataset(const GenConfig& cfg) {
    cfg.validate();
    const auto grid = cfg.snr_grid();
    const std::size_t cells = cfg.schemes.size() * grid.size();
    const std::size_t per_cell = cfg.frames_per_cell;

    Dataset out;
    out.meta = {cfg.seed, cfg.profile, per_cell};
    for (Scheme s : cfg.schemes) out.class_names.push_back(scheme_name(s));
    out.examples.resize(cells * per_cell);

    const Rng root(cfg.seed);
    const std::size_t trim = cfg.synth.rrc_span_symbols * cfg.synth.samples_per_symbol;
    parallel_chunks(cells, resolve_threads(cfg.threads), [&](std::size_t, std::size_t begin,
                                                             std::size_t end) {
        for (std::size_t cell = begin; cell < end; ++cell) {
            const std::size_t class_idx = cell / grid.size();
            const std::size_t snr_idx = cell % grid.size();
            const Scheme scheme = cfg.schemes[class_idx];
            const int snr = grid[snr_idx];
            Rng rng = root.split(cell);

            const std::size_t needed = per_cell * cfg.frame_len;
            Payload payload;
            if (is_analog(scheme)) {
                Rng audio_rng = rng.split(0);
                payload = synthesize_audio(needed + 2 * trim, audio_rng);
            } else {
                const std::size_t bps = bits_per_symbol(scheme);
                const std::size_t sps = cfg.synth.samples_per_symbol;
                const std::size_t symbols = (needed + 2 * trim + sps - 1) / sps + 1;
                payload = generate_bits(symbols * bps, rng.split(0).seed());
            }
            BasebandSignal clean = modulate(scheme, payload, cfg.synth);
            if (clean.samples.size() > needed + trim) {
                clean.samples.assign(clean.samples.begin() + static_cast<std::ptrdiff_t>(trim),
                                     clean.samples.begin() +
                                         static_cast<std::ptrdiff_t>(trim + needed));
            } else {
                clean.samples.resize(needed);
            }
            Rng chan_rng = rng.split(1);
            const BasebandSignal noisy = apply_channel(clean, cfg.synth, snr, chan_rng);

            for (std::size_t f = 0; f < per_cell; ++f) {
                LabeledExample ex;
                ex.class_idx = static_cast<std::uint8_t>(class_idx);
                ex.snr_db = static_cast<std::int8_t>(snr);
                ex.iq = Tensorf({2, cfg.frame_len});
                double power = 0.0;
                for (std::size_t i = 0; i < cfg.frame_len; ++i) {
                    power += std::norm(noisy.samples[f * cfg.frame_len + i]);
                }
                power /= static_cast<double>(cfg.frame_len);
                const double norm = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
                for (std::size_t i = 0; i < cfg.frame_len; ++i) {
                    const auto& v = noisy.samples[f * cfg.frame_len + i];
                    ex.iq.at(0, i) = static_cast<float>(v.real() * norm);
                    ex.iq.at(1, i) = static_cast<float>(v.imag() * norm);
                }
                out.examples[cell * per_cell + f] = std::move(ex);
            }
        }
    });
    return out;
}

Splits split(const Dataset& d, std::uint64_t seed) {
    std::map<std::pair<std::uint8_t, std::int8_t>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
        cells[{d.examples[i].class_idx, d.examples[i].snr_db}].push_back(i);
    }
    Splits out;
    for (Dataset* part : {&out.train, &out.val, &out.test}) {
        part->class_names = d.class_names;
        part->meta = d.meta;
    }
    const Rng root(seed);
    std::size_t cell_id = 0;
    for (auto& [key, indices] : cells) {
        Rng rng = root.split(cell_id++);
        for (std::size_t i = indices.size(); i > 1; --i) {
            std::swap(indices[i - 1], indices[rng.below(i)]);
        }
        const std::size_t n = indices.size();
        const std::size_t n_train = n * 3 / 5;
        const std::size_t n_val = n / 5;
        const std::size_t n_test = n - n_train - n_val;
        if (n_train == 0 || n_val == 0 || n_test == 0) {
            throw ConfigError("split: cell (" + d.class_names[key.first] + ", " +
                              std::to_string(static_cast<int>(key.second)) + " dB) has only " +
                              std::to_string(n) + " examples; need at least 5 to stratify");
        }
        for (std::size_t i = 0; i < n; ++i) {
            const LabeledExample& ex = d.examples[indices[i]];
            if (i < n_train) {
                out.train.examples.push_back(ex);
            } else if (i < n_train + n_val) {
                out.val.examples.push_back(ex);
            } else {
                out.test.examples.push_back(ex);
            }
        }
    }
    return out;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
    serialize_dataset(d).save(path);
}

Dataset read_dataset(const std::filesystem::path& path) {
    ByteReader r = ByteReader::load(path);
    if (r.ascii(4, "magic") != kDatasetMagic) {
        throw FormatError("dataset '" + path.string() + "': bad magic at offset 0");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw FormatError("dataset: unsupported version " + std::to_string(version) + " at offset 4");
    }
    const std::uint32_t n_examples = r.u32("example count");
    const std::uint32_t frame_len = r.u32("frame length");
    const std::uint16_t n_classes = r.u16("class count");
    if (frame_len < 2 || n_classes == 0) throw FormatError("dataset: empty geometry header");
    Dataset d;
    for (std::uint16_t c = 0; c < n_classes; ++c) {
        const std::uint8_t len = r.u8("class name length");
        d.class_names.push_back(r.ascii(len, "class name"));
    }
    d.examples.reserve(n_examples);
    for (std::uint32_t i = 0; i < n_examples; ++i) {
        r.need(2 + std::size_t{8} * frame_len, "example record");
        LabeledExample ex;
        ex.snr_db = r.i8();
        ex.class_idx = r.u8();
        if (ex.class_idx >= n_classes) {
            throw FormatError("dataset: class index " + std::to_string(ex.class_idx) +
                              " out of range at offset " + std::to_string(r.offset() - 1));
        }
        ex.iq = Tensorf({2, frame_len});
        for (std::size_t k = 0; k < 2 * std::size_t{frame_len}; ++k) ex.iq[k] = r.f32();
        d.examples.push_back(std::move(ex));
    }
    if (r.remaining() != 0) {
        throw FormatError("dataset: " + std::to_string(r.remaining()) +
                          " trailing bytes at offset " + std::to_string(r.offset()));
    }
    return d;
}

std::uint64_t dataset_hash(const Dataset& d) {
    const ByteWriter w = serialize_dataset(d);
    return fnv1a(w.buffer().data(), w.buffer().size());
}

void write_model(const Network<float>& net, const std::filesystem::path& path) {
    ByteWriter w;
    w.ascii(kModelMagic);
    w.u32(kVersion);
    const std::string spec = spec_to_json(net.spec);
    w.u32(static_cast<std::uint32_t>(spec.size()));
    w.ascii(spec);
    w.u32(static_cast<std::uint32_t>(net.params.size()));
    for (const auto& [name, tensor] : net.params) {
        w.u8(static_cast<std::uint8_t>(name.size()));
        w.ascii(name);
        w.u8(static_cast<std::uint8_t>(tensor.rank()));
        for (std::size_t d = 0; d < tensor.rank(); ++d) {
            w.u32(static_cast<std::uint32_t>(tensor.extent(d)));
        }
        for (std::size_t i = 0; i < tensor.size(); ++i) w.f32(tensor[i]);
    }
    w.save(path);
}

Network<float> read_model(const std::filesystem::path& path) {
    ByteReader r = ByteReader::load(path);
    if (r.ascii(4, "magic") != kModelMagic) {
        throw FormatError("model '" + path.string() + "': bad magic at offset 0");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw FormatError("model: unsupported version " + std::to_string(version) + " at offset 4");
    }
    const std::uint32_t spec_len = r.u32("spec length");
    const ArchitectureSpec spec = spec_from_json(r.ascii(spec_len, "spec json"));
    const std::uint32_t n_tensors = r.u32("tensor count");

    const auto plan = param_plan(spec);
    if (n_tensors != plan.size()) {
        throw FormatError("model: " + std::to_string(n_tensors) + " tensors stored but spec '" +
                          spec.id + "' needs " + std::to_string(plan.size()));
    }
    Network<float> net{spec, 0, {}};
    for (std::size_t t = 0; t < n_tensors; ++t) {
        const std::uint8_t name_len = r.u8("tensor name length");
        const std::string name = r.ascii(name_len, "tensor name");
        const std::uint8_t rank = r.u8("tensor rank");
        Shape shape;
        for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(r.u32("tensor dim"));
        if (name != plan[t].first || shape != plan[t].second) {
            throw FormatError("model: tensor " + std::to_string(t) + " is '" + name + "' " +
                              shape_str(shape) + " but spec expects '" + plan[t].first + "' " +
                              shape_str(plan[t].second));
        }
        Tensorf tensor(shape);
        r.need(4 * tensor.size(), "tensor data");
        for (std::size_t i = 0; i < tensor.size(); ++i) tensor[i] = r.f32();
        net.params.emplace_back(name, std::move(tensor));
    }
    return net;
}

}  // namespace modrec
