#include "modrec/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "modrec/parallel.hpp"

namespace modrec {

namespace {

std::string fmt(double v, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

void save_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

// Shared polyline chart for accuracy-vs-SNR series.
std::string accuracy_svg(const std::vector<const EvalReport*>& reports) {
    const int width = 640, height = 420;
    const int left = 60, right = 20, top = 30, bottom = 50;
    const int plot_w = width - left - right, plot_h = height - top - bottom;
    int snr_min = reports[0]->snrs.front(), snr_max = reports[0]->snrs.back();
    for (const auto* r : reports) {
        snr_min = std::min(snr_min, r->snrs.front());
        snr_max = std::max(snr_max, r->snrs.back());
    }
    const double span = std::max(1, snr_max - snr_min);
    auto x_of = [&](double snr) { return left + (snr - snr_min) / span * plot_w; };
    auto y_of = [&](double acc) { return top + (1.0 - acc) * plot_h; };
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b"};

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int acc10 = 0; acc10 <= 10; acc10 += 2) {
        const double acc = acc10 / 10.0;
        svg << "<line x1=\"" << left - 4 << "\" y1=\"" << fmt(y_of(acc), 1) << "\" x2=\"" << left
            << "\" y2=\"" << fmt(y_of(acc), 1) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << left - 8 << "\" y=\"" << fmt(y_of(acc) + 4, 1)
            << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(acc, 1) << "</text>\n";
    }
    for (int snr = snr_min; snr <= snr_max; snr += 4) {
        svg << "<line x1=\"" << fmt(x_of(snr), 1) << "\" y1=\"" << top + plot_h << "\" x2=\""
            << fmt(x_of(snr), 1) << "\" y2=\"" << top + plot_h + 4 << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << fmt(x_of(snr), 1) << "\" y=\"" << top + plot_h + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << snr << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" font-size=\"13\" text-anchor=\"middle\">SNR (dB)</text>\n"
        << "<text x=\"16\" y=\"" << top + plot_h / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << top + plot_h / 2 << ")\">accuracy</text>\n";
    for (std::size_t s = 0; s < reports.size(); ++s) {
        const EvalReport& r = *reports[s];
        const char* color = kColors[s % 6];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < r.snrs.size(); ++i) {
            svg << fmt(x_of(r.snrs[i]), 1) << "," << fmt(y_of(r.accuracy[i]), 1)
                << (i + 1 < r.snrs.size() ? " " : "");
        }
        svg << "\"/>\n"
            << "<text x=\"" << left + plot_w - 6 << "\" y=\"" << top + 14 + 16 * static_cast<int>(s)
            << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\">" << r.model_id
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string confusion_svg(const EvalReport& r, int snr) {
    const std::size_t c = r.num_classes();
    const int cell_px = 34, label_px = 76, top_px = 70;
    const int width = label_px + cell_px * static_cast<int>(c) + 20;
    const int height = top_px + cell_px * static_cast<int>(c) + 20;
    const std::size_t si = r.snr_index(snr);
    std::vector<double> row_total(c, 0.0);
    for (std::size_t t = 0; t < c; ++t)
        for (std::size_t p = 0; p < c; ++p) row_total[t] += r.confusion[si][t * c + p];

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
        << "<text x=\"" << label_px << "\" y=\"16\" font-size=\"13\">" << r.model_id
        << " confusion at " << snr << " dB (rows: true, columns: predicted)</text>\n";
    for (std::size_t p = 0; p < c; ++p) {
        const int x = label_px + cell_px * static_cast<int>(p) + cell_px / 2;
        svg << "<text x=\"" << x << "\" y=\"" << top_px - 8
            << "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-45 " << x << " "
            << top_px - 8 << ")\">" << r.class_names[p] << "</text>\n";
    }
    for (std::size_t t = 0; t < c; ++t) {
        const int y = top_px + cell_px * static_cast<int>(t);
        svg << "<text x=\"" << label_px - 6 << "\" y=\"" << y + cell_px / 2 + 4
            << "\" font-size=\"10\" text-anchor=\"end\">" << r.class_names[t] << "</text>\n";
        for (std::size_t p = 0; p < c; ++p) {
            const double frac =
                row_total[t] > 0 ? r.confusion[si][t * c + p] / row_total[t] : 0.0;
            const int shade = static_cast<int>(255.0 - 205.0 * frac);
            svg << "<rect x=\"" << label_px + cell_px * static_cast<int>(p) << "\" y=\"" << y
                << "\" width=\"" << cell_px << "\" height=\"" << cell_px << "\" fill=\"rgb("
                << shade << "," << shade << ",255)\" stroke=\"#ccc\"/>\n";
            if (frac >= 0.005) {
                svg << "<text x=\"" << label_px + cell_px * static_cast<int>(p) + cell_px / 2
                    << "\" y=\"" << y + cell_px / 2 + 4
                    << "\" font-size=\"9\" text-anchor=\"middle\">" << fmt(100.0 * frac, 1)
                    << "</text>\n";
            }
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

std::size_t EvalReport::snr_index(int snr) const {
    for (std::size_t i = 0; i < snrs.size(); ++i) {
        if (snrs[i] == snr) return i;
    }
    throw IndexError("report: no data at " + std::to_string(snr) + " dB");
}

EvalReport evaluate(const Network<float>& net, const Dataset& test, std::size_t threads) {
    retain_large_heap_blocks();
    if (test.examples.empty()) throw ContractError("evaluate: empty dataset");
    if (net.spec.classes != test.class_names.size()) {
        throw ConfigError("evaluate: model has " + std::to_string(net.spec.classes) +
                          " classes, dataset has " + std::to_string(test.class_names.size()));
    }
    EvalReport r;
    r.model_id = net.spec.id;
    r.class_names = test.class_names;
    r.snrs = test.snr_values();
    const std::size_t c = r.num_classes();
    std::map<int, std::size_t> snr_idx;
    for (std::size_t i = 0; i < r.snrs.size(); ++i) snr_idx[r.snrs[i]] = i;

    const std::size_t workers = resolve_threads(threads);
    std::vector<std::vector<std::vector<std::uint32_t>>> partial(
        workers, std::vector<std::vector<std::uint32_t>>(r.snrs.size(),
                                                         std::vector<std::uint32_t>(c * c, 0)));
    parallel_chunks(test.examples.size(), workers,
                    [&](std::size_t w, std::size_t begin, std::size_t end) {
                        for (std::size_t i = begin; i < end; ++i) {
                            const auto& ex = test.examples[i];
                            const Tensorf probs = forward_classify(net, ex.iq);
                            std::size_t pred = 0;
                            for (std::size_t k = 1; k < probs.size(); ++k) {
                                if (probs[k] > probs[pred]) pred = k;
                            }
                            const std::size_t si = snr_idx.at(ex.snr_db);
                            ++partial[w][si][ex.class_idx * c + pred];
                        }
                    });

    r.confusion.assign(r.snrs.size(), std::vector<std::uint32_t>(c * c, 0));
    for (std::size_t w = 0; w < workers; ++w)
        for (std::size_t si = 0; si < r.snrs.size(); ++si)
            for (std::size_t k = 0; k < c * c; ++k) r.confusion[si][k] += partial[w][si][k];

    std::size_t total_hits = 0;
    r.accuracy.resize(r.snrs.size());
    for (std::size_t si = 0; si < r.snrs.size(); ++si) {
        std::size_t hits = 0, total = 0;
        for (std::size_t t = 0; t < c; ++t) {
            for (std::size_t p = 0; p < c; ++p) {
                total += r.confusion[si][t * c + p];
                if (t == p) hits += r.confusion[si][t * c + p];
            }
        }
        r.accuracy[si] = total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
        total_hits += hits;
    }
    r.total_examples = test.examples.size();
    r.overall_accuracy = static_cast<double>(total_hits) / static_cast<double>(r.total_examples);
    return r;
}

std::vector<MisclassRow> misclass_table(const EvalReport& r, int snr, double threshold_percent) {
    const std::size_t si = r.snr_index(snr);
    const std::size_t c = r.num_classes();
    std::vector<MisclassRow> rows;
    for (std::size_t t = 0; t < c; ++t) {
        double total = 0.0;
        for (std::size_t p = 0; p < c; ++p) total += r.confusion[si][t * c + p];
        if (total == 0.0) continue;
        for (std::size_t p = 0; p < c; ++p) {
            if (p == t) continue;
            const double pct = 100.0 * r.confusion[si][t * c + p] / total;
            if (pct >= threshold_percent) rows.push_back({t, p, pct});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const MisclassRow& a, const MisclassRow& b) {
        if (a.percent != b.percent) return a.percent > b.percent;
        if (a.true_class != b.true_class) return a.true_class < b.true_class;
        return a.predicted_class < b.predicted_class;
    });
    return rows;
}

void render(const EvalReport& r, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory '" + out_dir.string() + "'");
    }
    const std::size_t c = r.num_classes();

    std::ostringstream acc;
    acc << "snr,accuracy,n\n";
    for (std::size_t si = 0; si < r.snrs.size(); ++si) {
        std::size_t n = 0;
        for (std::uint32_t v : r.confusion[si]) n += v;
        acc << r.snrs[si] << "," << fmt(r.accuracy[si]) << "," << n << "\n";
    }
    save_text(out_dir / "accuracy.csv", acc.str());

    for (std::size_t si = 0; si < r.snrs.size(); ++si) {
        std::ostringstream conf;
        conf << "true\\pred";
        for (const auto& name : r.class_names) conf << "," << name;
        conf << "\n";
        for (std::size_t t = 0; t < c; ++t) {
            conf << r.class_names[t];
            for (std::size_t p = 0; p < c; ++p) conf << "," << r.confusion[si][t * c + p];
            conf << "\n";
        }
        save_text(out_dir / ("confusion_" + std::to_string(r.snrs[si]) + ".csv"), conf.str());
    }

    save_text(out_dir / "accuracy.svg", accuracy_svg({&r}));
    const int top_snr = r.snrs.back();
    save_text(out_dir / ("confusion_" + std::to_string(top_snr) + ".svg"), confusion_svg(r, top_snr));
}

void render_comparison(const std::vector<EvalReport>& reports,
                       const std::filesystem::path& out_dir) {
    if (reports.empty()) throw ContractError("render: no reports");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory '" + out_dir.string() + "'");
    }
    std::vector<const EvalReport*> ptrs;
    for (const auto& r : reports) ptrs.push_back(&r);
    save_text(out_dir / "accuracy.svg", accuracy_svg(ptrs));
    for (const auto& r : reports) {
        const int top_snr = r.snrs.back();
        const std::string suffix = reports.size() > 1 ? "_" + r.model_id : "";
        save_text(out_dir / ("confusion_" + std::to_string(top_snr) + suffix + ".svg"),
                  confusion_svg(r, top_snr));
    }
}

std::string report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["model"] = r.model_id;
    j["classes"] = r.class_names;
    j["snrs"] = r.snrs;
    j["accuracy"] = r.accuracy;
    j["confusion"] = r.confusion;
    j["overall_accuracy"] = r.overall_accuracy;
    j["total_examples"] = r.total_examples;
    return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    EvalReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.model_id = j.at("model").get<std::string>();
        r.class_names = j.at("classes").get<std::vector<std::string>>();
        r.snrs = j.at("snrs").get<std::vector<int>>();
        r.accuracy = j.at("accuracy").get<std::vector<double>>();
        r.confusion = j.at("confusion").get<std::vector<std::vector<std::uint32_t>>>();
        r.overall_accuracy = j.at("overall_accuracy").get<double>();
        r.total_examples = j.at("total_examples").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report json: ") + e.what());
    }
    if (r.accuracy.size() != r.snrs.size() || r.confusion.size() != r.snrs.size()) {
        throw FormatError("report json: inconsistent snr table sizes");
    }
    return r;
}

}  // namespace modrec
