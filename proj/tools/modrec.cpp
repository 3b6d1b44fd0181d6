#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "modrec/dataset.hpp"
#include "modrec/eval.hpp"
#include "modrec/gradsuite.hpp"
#include "modrec/trainer.hpp"

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw modrec::IoError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::exception& e) {
        throw modrec::FormatError("config '" + path + "': " + e.what());
    }
}

template <typename T>
void from_config(const json& cfg, const char* key, T& value) {
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

void apply_synth_config(const json& cfg, modrec::SynthConfig& synth) {
    from_config(cfg, "samples_per_symbol", synth.samples_per_symbol);
    from_config(cfg, "rrc_rolloff", synth.rrc_rolloff);
    from_config(cfg, "rrc_span_symbols", synth.rrc_span_symbols);
    from_config(cfg, "sample_rate_hz", synth.sample_rate_hz);
    from_config(cfg, "fm_deviation_hz", synth.fm_deviation_hz);
    from_config(cfg, "am_index", synth.am_index);
    from_config(cfg, "gfsk_bt", synth.gfsk_bt);
    from_config(cfg, "fsk_mod_index", synth.fsk_mod_index);
    from_config(cfg, "cfo_max_hz", synth.channel.cfo_max_hz);
    from_config(cfg, "rate_offset_max_ppm", synth.channel.rate_offset_max_ppm);
    from_config(cfg, "multipath", synth.channel.multipath);
}

int run_gen(const json& cfg_file, const std::string& out, const std::string& profile,
            std::uint64_t seed, int snr_min, int snr_max, int snr_step, bool impaired,
            std::size_t frames_per_cell, std::size_t threads) {
    modrec::GenConfig cfg = modrec::profile_config(profile);
    from_config(cfg_file, "frames_per_cell", cfg.frames_per_cell);
    from_config(cfg_file, "frame_len", cfg.frame_len);
    from_config(cfg_file, "snr_min", cfg.snr_min);
    from_config(cfg_file, "snr_max", cfg.snr_max);
    from_config(cfg_file, "snr_step", cfg.snr_step);
    from_config(cfg_file, "seed", cfg.seed);
    apply_synth_config(cfg_file, cfg.synth);
    cfg.seed = seed;
    if (snr_min != -1000) cfg.snr_min = snr_min;
    if (snr_max != -1000) cfg.snr_max = snr_max;
    if (snr_step != 0) cfg.snr_step = snr_step;
    if (frames_per_cell != 0) cfg.frames_per_cell = frames_per_cell;
    cfg.synth.channel.enabled = impaired || cfg_file.value("impaired", false);
    cfg.threads = threads;

    const modrec::Dataset d = modrec::build_dataset(cfg);
    modrec::write_dataset(d, out);
    std::fprintf(stderr, "gen: wrote %zu examples (%zu classes x %zu SNRs x %zu frames) to %s\n",
                 d.size(), cfg.schemes.size(), cfg.snr_grid().size(), cfg.frames_per_cell,
                 out.c_str());
    return 0;
}

int run_train(const json& cfg_file, const std::string& data, const std::string& arch,
              const std::string& out, const std::string& history_path, std::uint64_t seed,
              std::uint64_t split_seed, long patience, double dropout, long batch, double lr,
              long max_epochs, std::size_t threads) {
    modrec::TrainConfig cfg;
    from_config(cfg_file, "batch_size", cfg.batch_size);
    from_config(cfg_file, "learning_rate", cfg.learning_rate);
    from_config(cfg_file, "beta1", cfg.beta1);
    from_config(cfg_file, "beta2", cfg.beta2);
    from_config(cfg_file, "epsilon", cfg.epsilon);
    from_config(cfg_file, "dropout_rate", cfg.dropout_rate);
    from_config(cfg_file, "patience", cfg.patience);
    from_config(cfg_file, "max_epochs", cfg.max_epochs);
    from_config(cfg_file, "min_improvement", cfg.min_improvement);
    cfg.seed = seed;
    cfg.threads = threads;
    if (patience >= 0) cfg.patience = static_cast<std::size_t>(patience);
    if (dropout >= 0.0) cfg.dropout_rate = dropout;
    if (batch > 0) cfg.batch_size = static_cast<std::size_t>(batch);
    if (lr > 0.0) cfg.learning_rate = lr;
    if (max_epochs > 0) cfg.max_epochs = static_cast<std::size_t>(max_epochs);

    const modrec::Dataset d = modrec::read_dataset(data);
    const modrec::Splits parts = modrec::split(d, split_seed);
    const std::size_t frame_len = d.examples.empty() ? 128 : d.examples[0].iq.extent(1);
    const auto spec = modrec::builtin_spec(arch, d.class_names.size(), frame_len);
    auto net = modrec::build<float>(spec, seed);
    std::fprintf(stderr, "train: %s (%zu parameters) on %zu train / %zu val examples\n",
                 arch.c_str(), modrec::param_count(spec), parts.train.size(), parts.val.size());

    const modrec::TrainHistory history = modrec::train(net, parts.train, parts.val, cfg, &std::cerr);
    modrec::write_model(net, out);
    const std::string hist = history_path.empty() ? out + ".history.csv" : history_path;
    modrec::export_history(history, hist);
    std::fprintf(stderr, "train: stopped (%s) at epoch %zu, best epoch %zu; model %s, history %s\n",
                 history.stop_reason.c_str(), history.epochs.size(), history.best_epoch,
                 out.c_str(), hist.c_str());
    return 0;
}

int run_eval(const std::string& model_path, const std::string& data, const std::string& out_dir,
             const std::string& subset, std::uint64_t split_seed, std::size_t threads) {
    const modrec::Network<float> net = modrec::read_model(model_path);
    const modrec::Dataset d = modrec::read_dataset(data);
    const modrec::Dataset* target = &d;
    modrec::Splits parts;
    if (subset != "all") {
        parts = modrec::split(d, split_seed);
        target = subset == "train" ? &parts.train : subset == "val" ? &parts.val : &parts.test;
    }
    const modrec::EvalReport report = modrec::evaluate(net, *target, threads);
    std::filesystem::create_directories(out_dir);
    std::ofstream json_out(std::filesystem::path(out_dir) / "report.json");
    if (!json_out) throw modrec::IoError("cannot write report.json in '" + out_dir + "'");
    json_out << modrec::report_to_json(report);
    json_out.close();
    modrec::render(report, out_dir);
    std::fprintf(stderr, "eval: %s on %zu %s examples, overall accuracy %.4f, top-SNR accuracy %.4f\n",
                 report.model_id.c_str(), target->size(), subset.c_str(),
                 report.overall_accuracy, report.accuracy.back());
    return 0;
}

int run_report(const std::vector<std::string>& in_dirs, const std::string& out_dir) {
    std::vector<modrec::EvalReport> reports;
    for (const auto& dir : in_dirs) {
        std::ifstream in(std::filesystem::path(dir) / "report.json");
        if (!in) throw modrec::IoError("no report.json in '" + dir + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        reports.push_back(modrec::report_from_json(buf.str()));
    }
    modrec::render_comparison(reports, out_dir);
    std::fprintf(stderr, "report: rendered %zu series into %s\n", reports.size(), out_dir.c_str());
    return 0;
}

int run_gradcheck(double eps) {
    const auto results = modrec::gradient_check_suite(eps);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%-36s max relative error %.3e\n", r.name.c_str(), r.max_rel_error);
        ok = ok && r.max_rel_error < 1e-4;
    }
    std::printf("gradcheck: %s\n", ok ? "all checks < 1e-4" : "FAILED");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modrec: radio modulation recognition laboratory"};
    app.require_subcommand(1);
    std::string config_path;
    std::size_t threads = 0;
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--threads", threads,
                   "worker thread cap (also MODREC_THREADS); 1 = bit-reproducible");

    auto* gen = app.add_subcommand("gen", "synthesize a labeled IQ dataset");
    std::string gen_out, gen_profile = "paper";
    std::uint64_t gen_seed = 0;
    int snr_min = -1000, snr_max = -1000, snr_step = 0;
    bool impaired = false;
    std::size_t frames_per_cell = 0;
    gen->add_option("--out", gen_out, "output dataset file")->required();
    gen->add_option("--profile", gen_profile, "paper | smoke-paper | smoke");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--snr-min", snr_min, "lowest SNR label (dB)");
    gen->add_option("--snr-max", snr_max, "highest SNR label (dB)");
    gen->add_option("--snr-step", snr_step, "SNR grid step (dB)");
    gen->add_option("--frames-per-cell", frames_per_cell, "frames per (class, snr) cell");
    gen->add_flag("--impaired", impaired, "enable CFO / rate-offset / multipath impairments");

    auto* train = app.add_subcommand("train", "train an architecture on a dataset");
    std::string train_data, train_arch, train_out, history_path;
    std::uint64_t train_seed = 0, split_seed = 1;
    long patience = -1, batch = 0, max_epochs = 0;
    double dropout = -1.0, lr = 0.0;
    train->add_option("--data", train_data, "dataset file")->required();
    train->add_option("--arch", train_arch, "cnn2 | cnn4 | resnet4 | densenet4 | cldnn")
        ->required();
    train->add_option("--out", train_out, "output model file")->required();
    train->add_option("--seed", train_seed, "init/shuffle/dropout seed");
    train->add_option("--split-seed", split_seed, "train/val/test split seed");
    train->add_option("--patience", patience, "early-stopping patience (epochs)");
    train->add_option("--dropout", dropout, "dropout rate");
    train->add_option("--batch", batch, "mini-batch size");
    train->add_option("--lr", lr, "Adam learning rate");
    train->add_option("--max-epochs", max_epochs, "epoch cap");
    train->add_option("--history", history_path, "history CSV path (default <out>.history.csv)");

    auto* eval = app.add_subcommand("eval", "evaluate a model, write report + charts");
    std::string eval_model, eval_data, eval_out, eval_subset = "test";
    std::uint64_t eval_split_seed = 1;
    eval->add_option("--model", eval_model, "model file")->required();
    eval->add_option("--data", eval_data, "dataset file")->required();
    eval->add_option("--out", eval_out, "output directory")->required();
    eval->add_option("--subset", eval_subset, "test | val | train | all (default test)");
    eval->add_option("--split-seed", eval_split_seed, "must match the train-time split seed");

    auto* report = app.add_subcommand("report", "combine eval reports into comparison charts");
    std::vector<std::string> report_in;
    std::string report_out;
    report->add_option("--in", report_in, "eval output directories")->required()->expected(-1);
    report->add_option("--out", report_out, "output directory")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    double eps = 1e-5;
    gradcheck->add_option("--eps", eps, "central-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const json cfg_file = load_config(config_path);
        if (gen->parsed()) {
            return run_gen(cfg_file, gen_out, gen_profile, gen_seed, snr_min, snr_max, snr_step,
                           impaired, frames_per_cell, threads);
        }
        if (train->parsed()) {
            return run_train(cfg_file, train_data, train_arch, train_out, history_path, train_seed,
                             split_seed, patience, dropout, batch, lr, max_epochs, threads);
        }
        if (eval->parsed()) {
            if (eval_subset != "test" && eval_subset != "val" && eval_subset != "train" &&
                eval_subset != "all") {
                throw modrec::ConfigError("eval: unknown subset '" + eval_subset + "'");
            }
            return run_eval(eval_model, eval_data, eval_out, eval_subset, eval_split_seed, threads);
        }
        if (report->parsed()) return run_report(report_in, report_out);
        if (gradcheck->parsed()) return run_gradcheck(eps);
    } catch (const modrec::Error& e) {
        std::fprintf(stderr, "modrec: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "modrec: %s\n", e.what());
        return 1;
    }
    return 0;
}
