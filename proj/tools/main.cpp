// Command-line front end: dataset generation, training, evaluation, the
// ablation grid, sensitivity sweeps, stationarity diagnostics, and
// trend/seasonality export. Every result table is CSV with a header row;
// reruns with the same config, seed, and manifest produce byte-identical
// files.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ttcnet/checkpoint.hpp"
#include "ttcnet/config.hpp"
#include "ttcnet/csv.hpp"
#include "ttcnet/datagen.hpp"
#include "ttcnet/decomposition.hpp"
#include "ttcnet/diagnostics.hpp"
#include "ttcnet/errors.hpp"
#include "ttcnet/harness.hpp"
#include "ttcnet/tensor_io.hpp"

namespace {

using namespace ttcnet;
namespace fs = std::filesystem;

struct Globals {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    bool deterministic = false;
};

/// Config file (or defaults) + command-line seed, finalized and validated.
RunConfig load_run_config(const Globals& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    cfg.train.seed = g.seed;
    finalize_config(cfg);
    validate_config(cfg);
    return cfg;
}

void prepare_out(const Globals& g) {
    fs::create_directories(g.out_dir);
}

std::string out_path(const Globals& g, const std::string& name) {
    return (fs::path(g.out_dir) / name).string();
}

/// Binary mode so line endings (and therefore bytes) match across platforms.
std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

std::size_t effective_workers(const Globals& g, std::size_t flag_value) {
    return g.deterministic ? 1 : flag_value;
}

std::vector<std::uint64_t> run_seeds(const Globals& g, std::size_t runs) {
    std::vector<std::uint64_t> seeds(runs);
    for (std::size_t k = 0; k < runs; ++k) seeds[k] = g.seed + k;
    return seeds;
}

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Consecutive non-overlapping [win, d] windows of a [n, d] series; the
/// trailing partial window is dropped.
std::vector<Tensor> chunk_series(const Tensor& series, std::size_t win) {
    const std::size_t n = series.shape()[0];
    const std::size_t d = series.shape()[1];
    std::vector<Tensor> out;
    for (std::size_t w0 = 0; w0 + win <= n; w0 += win) {
        Tensor w({win, d});
        for (std::size_t i = 0; i < win * d; ++i) w.data()[i] = series.data()[w0 * d + i];
        out.push_back(std::move(w));
    }
    return out;
}

ComponentSeries synthetic_series(const SeriesConfig& sc, std::uint64_t seed) {
    return gen_component_series(sc.trend_slope, sc.season_period, sc.season_amp, sc.noise_sigma,
                                sc.mean_drift, sc.var_drift, sc.length, sc.dims, seed);
}

/// CSV with columns t, dim_0..dim_{d-1}.
void write_series_csv(std::ostream& os, const Tensor& series) {
    const std::size_t n = series.shape()[0];
    const std::size_t d = series.shape()[1];
    std::vector<std::string> row;
    row.push_back("t");
    for (std::size_t j = 0; j < d; ++j) row.push_back("dim_" + std::to_string(j));
    write_csv_row(os, row);
    for (std::size_t t = 0; t < n; ++t) {
        row.clear();
        row.push_back(std::to_string(t));
        for (std::size_t j = 0; j < d; ++j) row.push_back(format_double(series.data()[t * d + j]));
        write_csv_row(os, row);
    }
}

// ---- Subcommands -----------------------------------------------------------

void cmd_gen_data(const Globals& g) {
    prepare_out(g);
    const RunConfig cfg = load_run_config(g);
    Stopwatch timer;
    const auto rows = build_dataset(cfg.data, cfg.train.seed, g.out_dir);
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    for (const auto& r : rows) {
        if (r.split == "train") ++n_train;
        else if (r.split == "val") ++n_val;
        else ++n_test;
    }
    std::cout << "wrote " << rows.size() << " clips (" << n_train << " train, " << n_val
              << " val, " << n_test << " test) in " << std::fixed << std::setprecision(1)
              << timer.seconds() << "s\n"
              << "manifest: " << out_path(g, "manifest.csv") << "\n";
}

void cmd_train(const Globals& g, const std::string& data_path) {
    prepare_out(g);
    const RunConfig cfg = load_run_config(g);
    const ClipDataset data = ClipDataset::load(data_path);
    ParamRegistry reg;
    Rng init(Rng::derive(cfg.train.seed, 0));
    TtcModel model(reg, cfg.model, init);

    Stopwatch timer;
    const TrainResult result = train(model, reg, data, cfg);
    {
        auto os = open_out(out_path(g, "history.csv"));
        write_history_csv(os, result.history);
    }
    {
        auto os = open_out(out_path(g, "history.txt"));
        write_history_text(os, result.history);
    }
    apply_checkpoint(result.best, reg);
    save_checkpoint(out_path(g, "checkpoint.bin"), cfg, reg);

    std::cout << "trained " << result.history.size() << " epochs in " << std::fixed
              << std::setprecision(1) << timer.seconds() << "s; best epoch "
              << result.best_epoch << ", val mse " << format_double(result.best_val_mse) << "\n"
              << "checkpoint: " << out_path(g, "checkpoint.bin") << "\n"
              << "history: " << out_path(g, "history.csv") << ", "
              << out_path(g, "history.txt") << "\n";
}

void cmd_eval(const Globals& g, const std::string& ckpt_path, const std::string& data_path,
              const std::string& split_str) {
    prepare_out(g);
    if (!g.config_path.empty()) {
        std::cout << "note: eval uses the configuration stored in the checkpoint\n";
    }
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const ClipDataset data = ClipDataset::load(data_path);
    const Split split = parse_split(split_str);
    const EvalReport report = evaluate(ck, data, split);
    {
        auto os = open_out(out_path(g, "eval.csv"));
        write_eval_csv(os, report);
    }
    std::cout << split_name(split) << " mse " << format_double(report.mse) << " over "
              << report.ids.size() << " clips\n"
              << "report: " << out_path(g, "eval.csv") << "\n";
}

void cmd_ablate(const Globals& g, const std::string& data_path, std::size_t runs,
                std::size_t workers) {
    prepare_out(g);
    const RunConfig cfg = load_run_config(g);
    const ClipDataset data = ClipDataset::load(data_path);
    const auto seeds = run_seeds(g, runs);

    Stopwatch timer;
    const auto rows = run_ablation(cfg, data, seeds, effective_workers(g, workers));
    {
        auto os = open_out(out_path(g, "ablation.csv"));
        write_ablation_csv(os, rows);
    }
    {
        auto os = open_out(out_path(g, "ablation_runs.csv"));
        write_ablation_runs_csv(os, rows, seeds);
    }

    std::cout << "  ID  MS   T   S  NS    mse_mean     mse_std\n";
    for (const auto& row : rows) {
        std::cout << std::setw(4) << row.spec.id;
        for (bool on : {row.spec.ms, row.spec.t, row.spec.s, row.spec.ns}) {
            std::cout << std::setw(4) << (on ? "+" : "-");
        }
        std::cout << "  " << std::setw(10) << format_double(row.mse_mean) << "  "
                  << std::setw(10) << format_double(row.mse_std) << "\n";
    }
    std::cout << runs << " run(s) per row in " << std::fixed << std::setprecision(1)
              << timer.seconds() << "s\n"
              << "tables: " << out_path(g, "ablation.csv") << ", "
              << out_path(g, "ablation_runs.csv") << "\n";
}

void cmd_sweep(const Globals& g, const std::string& data_path, const std::string& axis_str,
               std::vector<std::size_t> values, std::size_t runs, std::size_t workers) {
    prepare_out(g);
    const RunConfig cfg = load_run_config(g);
    const ClipDataset data = ClipDataset::load(data_path);
    const SweepAxis axis = parse_axis(axis_str);
    if (values.empty()) values = default_axis_values(axis);
    const auto seeds = run_seeds(g, runs);

    Stopwatch timer;
    const auto rows = run_sensitivity(cfg, axis, values, data, seeds, effective_workers(g, workers));
    {
        auto os = open_out(out_path(g, "sweep.csv"));
        write_sweep_csv(os, axis, rows);
    }

    for (const auto& row : rows) {
        std::cout << axis_name(axis) << "=" << row.value << ": mse "
                  << format_double(row.mse_mean) << " +/- " << format_double(row.mse_std) << "\n";
    }
    std::cout << values.size() << " value(s) x " << runs << " run(s) in " << std::fixed
              << std::setprecision(1) << timer.seconds() << "s\n"
              << "table: " << out_path(g, "sweep.csv") << "\n";
}

void cmd_diagnose(const Globals& g) {
    prepare_out(g);
    const RunConfig cfg = load_run_config(g);
    const SeriesConfig& sc = cfg.series;

    // Windows of each synthetic sequence are treated as independent
    // instances: the raw columns test their plain concatenation, the norm
    // columns the concatenation after per-window standardization.
    std::vector<Tensor> windows;
    for (std::size_t s = 0; s < sc.sequences; ++s) {
        const ComponentSeries series = synthetic_series(sc, Rng::derive(cfg.train.seed, s));
        auto chunks = chunk_series(series.z, sc.chunk);
        for (auto& c : chunks) windows.push_back(std::move(c));
    }

    Stopwatch timer;
    const StationarityReport report = stationarity_report(windows);
    {
        auto os = open_out(out_path(g, "stationarity.csv"));
        write_report_csv(os, report);
    }
    {
        auto os = open_out(out_path(g, "stationarity.txt"));
        write_report_text(os, report);
    }
    write_report_text(std::cout, report);
    std::cout << sc.sequences << " sequence(s), " << windows.size() << " windows of "
              << sc.chunk << " steps in " << std::fixed << std::setprecision(1)
              << timer.seconds() << "s\n"
              << "report: " << out_path(g, "stationarity.csv") << ", "
              << out_path(g, "stationarity.txt") << "\n";
}

void cmd_decompose(const Globals& g, const std::string& input_path, std::size_t window) {
    prepare_out(g);
    const RunConfig cfg = load_run_config(g);
    Tensor z;
    if (input_path.empty()) {
        z = synthetic_series(cfg.series, Rng::derive(cfg.train.seed, 0)).z;
    } else {
        z = load_tensor(input_path);
        if (z.shape().size() != 2) {
            throw InputError("decompose expects a rank-2 [n, d] tensor, got rank " +
                             std::to_string(z.shape().size()) + " from " + input_path);
        }
    }
    const std::size_t k = window > 0 ? window : cfg.model.window;
    const DecompositionResult result = decompose(z, k);
    {
        auto os = open_out(out_path(g, "trend.csv"));
        write_series_csv(os, result.trend);
    }
    {
        auto os = open_out(out_path(g, "seasonality.csv"));
        write_series_csv(os, result.seasonality);
    }
    std::cout << "decomposed [" << z.shape()[0] << ", " << z.shape()[1] << "] with window "
              << k << "\n"
              << "components: " << out_path(g, "trend.csv") << ", "
              << out_path(g, "seasonality.csv") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    Globals g;
    CLI::App app{"ttc: time-to-collision forecasting toolkit"};
    app.require_subcommand(1);
    app.add_option("--config", g.config_path, "config file (section.key = value lines)")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "run seed (default 0)");
    app.add_option("--out", g.out_dir, "output directory (default ./out)");
    app.add_flag("--deterministic", g.deterministic,
                 "run ablation/sweep rows on a single worker thread");

    std::string data_path, ckpt_path, input_path;
    std::string split_str = "test";
    std::string axis_str;
    std::vector<std::size_t> values;
    std::size_t runs = 3;
    std::size_t workers = 0;
    std::size_t window = 0;

    auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset into --out");
    auto* train_cmd = app.add_subcommand("train", "train a model, save best checkpoint + history");
    train_cmd->add_option("--data", data_path, "dataset manifest.csv")
        ->required()
        ->check(CLI::ExistingFile);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file from train")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", data_path, "dataset manifest.csv")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", split_str, "train, val, or test (default test)");
    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate all 14 toggle rows");
    ablate_cmd->add_option("--data", data_path, "dataset manifest.csv")
        ->required()
        ->check(CLI::ExistingFile);
    ablate_cmd->add_option("--runs", runs, "seeds per row (default 3)")
        ->check(CLI::PositiveNumber);
    ablate_cmd->add_option("--workers", workers, "worker threads, 0 = all cores");
    auto* sweep_cmd = app.add_subcommand("sweep", "sensitivity sweep along one model axis");
    sweep_cmd->add_option("--data", data_path, "dataset manifest.csv")
        ->required()
        ->check(CLI::ExistingFile);
    sweep_cmd
        ->add_option("--axis", axis_str, "spatial_scales, temporal_scales, or window_k")
        ->required();
    sweep_cmd->add_option("--values", values, "axis values (default: the standard grid)")
        ->delimiter(',');
    sweep_cmd->add_option("--runs", runs, "seeds per value (default 3)")
        ->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--workers", workers, "worker threads, 0 = all cores");
    auto* diag_cmd = app.add_subcommand(
        "diagnose", "stationarity tests on synthetic series, raw vs normalized");
    auto* dec_cmd = app.add_subcommand("decompose", "export trend/seasonality components as CSV");
    dec_cmd->add_option("--input", input_path, "rank-2 tensor file (default: synthetic series)")
        ->check(CLI::ExistingFile);
    dec_cmd->add_option("--window", window, "odd moving-average window (default: model.window)");
    for (auto* sub : {gen, train_cmd, eval_cmd, ablate_cmd, sweep_cmd, diag_cmd, dec_cmd}) {
        sub->fallthrough();
    }

    gen->callback([&] { cmd_gen_data(g); });
    train_cmd->callback([&] { cmd_train(g, data_path); });
    eval_cmd->callback([&] { cmd_eval(g, ckpt_path, data_path, split_str); });
    ablate_cmd->callback([&] { cmd_ablate(g, data_path, runs, workers); });
    sweep_cmd->callback([&] { cmd_sweep(g, data_path, axis_str, values, runs, workers); });
    diag_cmd->callback([&] { cmd_diagnose(g); });
    dec_cmd->callback([&] { cmd_decompose(g, input_path, window); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
