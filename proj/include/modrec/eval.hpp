#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "modrec/arch.hpp"
#include "modrec/dataset.hpp"

namespace modrec {

// Accuracy-vs-SNR table plus one confusion matrix per SNR (rows = true
// class, columns = predicted).
struct EvalReport {
    std::string model_id;
    std::vector<std::string> class_names;
    std::vector<int> snrs;  // ascending
    std::vector<std::vector<std::uint32_t>> confusion;  // [snr][true*C + pred]
    std::vector<double> accuracy;                       // per snr
    double overall_accuracy = 0.0;
    std::size_t total_examples = 0;

    std::size_t num_classes() const { return class_names.size(); }
    std::size_t snr_index(int snr) const;  // IndexError when absent
    double accuracy_at(int snr) const { return accuracy[snr_index(snr)]; }
    std::uint32_t cell(int snr, std::size_t true_c, std::size_t pred_c) const {
        return confusion[snr_index(snr)][true_c * num_classes() + pred_c];
    }
};

struct MisclassRow {
    std::size_t true_class = 0;
    std::size_t predicted_class = 0;
    double percent = 0.0;  // share of true-class examples at that snr
};

// Argmax evaluation with dropout off; parallel over examples.
EvalReport evaluate(const Network<float>& net, const Dataset& test, std::size_t threads = 0);

// Off-diagonal (true, pred) pairs with percentage >= threshold at one SNR,
// sorted by percentage descending.
std::vector<MisclassRow> misclass_table(const EvalReport& r, int snr, double threshold_percent);

// Writes accuracy.csv, confusion_<snr>.csv per snr, accuracy.svg, and the
// top-SNR confusion heat map (confusion_18.svg when 18 dB is present).
// Output bytes are a pure function of the report.
void render(const EvalReport& r, const std::filesystem::path& out_dir);

// One accuracy.svg with a polyline per model.
void render_comparison(const std::vector<EvalReport>& reports,
                       const std::filesystem::path& out_dir);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

}  // namespace modrec
