// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>
#include <thread>

#include "ttcnet/csv.hpp"
#include "ttcnet/datagen.hpp"
#include "ttcnet/errors.hpp"
#include "ttcnet/tensor_io.hpp"

namespace ttcnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Mean and sample standard deviation over the finite entries.
void finite_stats(const std::vector<double>& xs, double& mean, double& std_out) {
    std::vector<double> ok;
    for (double x : xs)
        if (std::isfinite(x)) ok.push_back(x);
    if (ok.empty()) {
        mean = kNaN;
        std_out = kNaN;
        return;
    }
    double sum = 0.0;
    for (double x : ok) sum += x;
    mean = sum / static_cast<double>(ok.size());
    if (ok.size() < 2) {
        std_out = 0.0;
        return;
    }
    double ss = 0.0;
    for (double x : ok) ss += (x - mean) * (x - mean);
    std_out = std::sqrt(ss / static_cast<double>(ok.size() - 1));
}

/// Runs `tasks` functions on up to `workers` threads. Each task writes only
/// to its own result slot, so the outcome is independent of scheduling.
void run_parallel(std::vector<std::function<void()>>& tasks, std::size_t workers) {
    if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    workers = std::min(workers, tasks.size());
    if (workers <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                tasks[i]();
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

// ---- ClipDataset -----------------------------------------------------------

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw InputError("unknown split '" + name + "' (expected train, val, or test)");
}

ClipDataset ClipDataset::load(const std::string& manifest_path) {
    const auto rows = load_manifest(manifest_path);
    const auto root = std::filesystem::path(manifest_path).parent_path();
    ClipDataset out;
    for (const auto& row : rows) {
        const Tensor frames = load_tensor((root / row.path).string());
        out.add(row.id, frames, row.ttc_label, parse_split(row.split));
    }
    return out;
}

void ClipDataset::add(const std::string& id, const Tensor& frames, double label, Split split) {
    if (!frames.defined() || frames.size() == 0) {
        throw InputError("dataset clip '" + id + "' is empty");
    }
    Stored s;
    s.id = id;
    s.shape = frames.shape();
    s.data.resize(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        s.data[i] = static_cast<float>(frames.data()[i]);
    }
    s.label = label;
    s.split = split;
    clips_.push_back(std::move(s));
}

const std::string& ClipDataset::id(std::size_t i) const { return clips_.at(i).id; }
double ClipDataset::label(std::size_t i) const { return clips_.at(i).label; }
Split ClipDataset::split(std::size_t i) const { return clips_.at(i).split; }

Tensor ClipDataset::frames(std::size_t i) const {
    const Stored& s = clips_.at(i);
    Tensor t(s.shape);
    for (std::size_t k = 0; k < s.data.size(); ++k) t.data()[k] = s.data[k];
    return t;
}

std::vector<std::size_t> ClipDataset::split_indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < clips_.size(); ++i)
        if (clips_[i].split == s) idx.push_back(i);
    return idx;
}

// ---- Training --------------------------------------------------------------

namespace {

Checkpoint snapshot_params(const RunConfig& cfg, const ParamRegistry& reg) {
    Checkpoint ck;
    ck.config = cfg;
    ck.tensors.reserve(reg.entries().size());
    for (const auto& [name, tensor] : reg.entries()) ck.tensors.emplace_back(name, tensor.clone());
    return ck;
}

double max_abs_param(const ParamRegistry& reg) {
    double m = 0.0;
    for (const auto& [name, tensor] : reg.entries())
        for (std::size_t i = 0; i < tensor.size(); ++i)
            m = std::max(m, std::abs(tensor.data()[i]));
    return m;
}

}  // namespace

TrainResult train(TtcModel& model, ParamRegistry& reg, const ClipDataset& data,
                  const RunConfig& cfg) {
    const TrainConfig& tc = cfg.train;
    std::vector<std::size_t> train_idx = data.split_indices(Split::Train);
    const std::vector<std::size_t> val_idx = data.split_indices(Split::Val);
    if (train_idx.empty() || val_idx.empty()) {
        throw InputError("training needs non-empty train and val splits (got " +
                         std::to_string(train_idx.size()) + " train, " +
                         std::to_string(val_idx.size()) + " val clips)");
    }

    Rng shuffle_rng(Rng::derive(tc.seed, 1));
    Rng drop_rng(Rng::derive(tc.seed, 2));
    Rng eval_rng(0);  // never drawn from: validation runs with dropout off
    double lr = tc.lr;

    auto& entries = reg.entries();
    const std::size_t n_entries = entries.size();
    std::vector<std::vector<double>> acc(n_entries), m1(n_entries), m2(n_entries);
    for (std::size_t j = 0; j < n_entries; ++j) {
        acc[j].assign(entries[j].second.size(), 0.0);
        if (tc.optimizer == Optimizer::Adam) {
            m1[j].assign(entries[j].second.size(), 0.0);
            m2[j].assign(entries[j].second.size(), 0.0);
        }
    }
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    std::size_t adam_step = 0;

    TrainResult out;
    out.best = snapshot_params(cfg, reg);  // 0-epoch training returns the init
    out.best_val_mse = std::numeric_limits<double>::infinity();
    out.best_epoch = 0;

    auto val_mse_now = [&] {
        double sq = 0.0;
        for (std::size_t i : val_idx) {
            const double r = model.predict(data.frames(i), false, eval_rng).item() - data.label(i);
            sq += r * r;
        }
        return sq / static_cast<double>(val_idx.size());
    };

    std::size_t since_best = 0;
    std::size_t plateau_count = 0;
    for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        shuffle_rng.shuffle(train_idx);
        double train_sq = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += tc.batch_size) {
            const std::size_t stop = std::min(start + tc.batch_size, train_idx.size());
            for (auto& a : acc) std::fill(a.begin(), a.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = train_idx[b];
                try {
                    Tape tape;
                    reg.watch_all(tape);
                    const Tensor pred = model.predict(data.frames(i), true, drop_rng);
                    if (!std::isfinite(pred.item())) {
                        throw NumericError("prediction is not finite");
                    }
                    const Tensor err = add_scalar(pred, -data.label(i));
                    const Tensor loss = mul(err, err);
                    tape.backward(loss);
                    const double r = pred.item() - data.label(i);
                    train_sq += r * r;
                    for (std::size_t j = 0; j < n_entries; ++j) {
                        const Tensor g = tape.grad(entries[j].second);
                        for (std::size_t k = 0; k < g.size(); ++k) acc[j][k] += g.data()[k];
                    }
                } catch (const NumericError& e) {
                    throw NumericError(
                        "training aborted on non-finite values: epoch " + std::to_string(epoch) +
                        ", clip '" + data.id(i) + "', lr " + format_double(lr) +
                        ", max|param| " + format_double(max_abs_param(reg)) + ": " + e.what());
                }
            }
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            ++adam_step;
            for (std::size_t j = 0; j < n_entries; ++j) {
                double* p = entries[j].second.data();
                for (std::size_t k = 0; k < acc[j].size(); ++k) {
                    const double g = acc[j][k] * inv_batch;
                    if (tc.optimizer == Optimizer::Adam) {
                        m1[j][k] = kBeta1 * m1[j][k] + (1.0 - kBeta1) * g;
                        m2[j][k] = kBeta2 * m2[j][k] + (1.0 - kBeta2) * g * g;
                        const double mh =
                            m1[j][k] / (1.0 - std::pow(kBeta1, static_cast<double>(adam_step)));
                        const double vh =
                            m2[j][k] / (1.0 - std::pow(kBeta2, static_cast<double>(adam_step)));
                        p[k] -= lr * mh / (std::sqrt(vh) + kEps);
                    } else {
                        p[k] -= lr * g;
                    }
                }
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mse = train_sq / static_cast<double>(train_idx.size());
        try {
            rec.val_mse = val_mse_now();
        } catch (const NumericError& e) {
            throw NumericError(
                "training aborted on non-finite values: epoch " + std::to_string(epoch) +
                ", validation pass, lr " + format_double(lr) + ", max|param| " +
                format_double(max_abs_param(reg)) + ": " + e.what());
        }
        rec.lr = lr;
        const bool improved = rec.val_mse < out.best_val_mse;
        if (improved) {
            out.best_val_mse = rec.val_mse;
            out.best_epoch = epoch;
            out.best = snapshot_params(cfg, reg);
            since_best = 0;
            plateau_count = 0;
        } else {
            ++since_best;
            ++plateau_count;
        }
        if (!improved && plateau_count >= tc.plateau_patience) {
            lr *= 0.5;
            rec.decayed = true;
            plateau_count = 0;
        }
        out.history.push_back(rec);
        if (since_best >= tc.early_stop_patience) break;
    }
    return out;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    write_csv_row(out, {"epoch", "train_mse", "val_mse", "lr", "decayed"});
    for (const auto& r : history) {
        write_csv_row(out, {std::to_string(r.epoch), format_double(r.train_mse),
                            format_double(r.val_mse), format_double(r.lr),
                            r.decayed ? "1" : "0"});
    }
}

void write_history_text(std::ostream& out, const std::vector<EpochRecord>& history) {
    for (const auto& r : history) {
        out << "epoch=" << r.epoch << " train_mse=" << format_double(r.train_mse)
            << " val_mse=" << format_double(r.val_mse) << " lr=" << format_double(r.lr)
            << " decayed=" << (r.decayed ? 1 : 0) << "\n";
    }
}

// ---- Evaluation ------------------------------------------------------------

EvalReport evaluate(const Predictor& predict, const ClipDataset& data, Split split,
                    std::uint64_t fingerprint, std::uint64_t seed) {
    const auto idx = data.split_indices(split);
    if (idx.empty()) {
        throw InputError(std::string("evaluation split '") + split_name(split) + "' is empty");
    }
    EvalReport rep;
    rep.fingerprint = fingerprint;
    rep.seed = seed;
    double sq = 0.0;
    for (std::size_t i : idx) {
        const double p = predict(data.frames(i));
        const double r = p - data.label(i);
        rep.ids.push_back(data.id(i));
        rep.labels.push_back(data.label(i));
        rep.predictions.push_back(p);
        rep.residuals.push_back(r);
        sq += r * r;
    }
    rep.mse = sq / static_cast<double>(idx.size());
    return rep;
}

EvalReport evaluate(const TtcModel& model, const ClipDataset& data, Split split,
                    std::uint64_t fingerprint, std::uint64_t seed) {
    Rng dummy(0);
    return evaluate(
        [&](const Tensor& frames) { return model.predict(frames, false, dummy).item(); }, data,
        split, fingerprint, seed);
}

EvalReport evaluate(const Checkpoint& ckpt, const ClipDataset& data, Split split) {
    ParamRegistry reg;
    Rng init(0);  // every tensor is overwritten by the checkpoint
    TtcModel model(reg, ckpt.config.model, init);
    apply_checkpoint(ckpt, reg);
    return evaluate(model, data, split, config_fingerprint(ckpt.config), ckpt.config.train.seed);
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
    write_csv_row(out, {"id", "label", "prediction", "residual"});
    for (std::size_t i = 0; i < report.ids.size(); ++i) {
        write_csv_row(out, {report.ids[i], format_double(report.labels[i]),
                            format_double(report.predictions[i]),
                            format_double(report.residuals[i])});
    }
}

// ---- Ablation grid ---------------------------------------------------------

const std::array<AblationSpec, 14>& ablation_grid() {
    //                         id    MS     T      S      NS
    static const std::array<AblationSpec, 14> grid = {{
        {1, true, true, true, true},
        {2, false, true, true, true},
        {3, true, false, true, true},
        {4, true, true, false, true},
        {5, true, true, true, false},
        {6, false, true, true, false},
        {7, true, false, true, false},
        {8, true, false, false, true},
        {9, true, true, false, false},
        {10, false, false, false, true},
        {11, false, false, true, false},
        {12, false, true, false, false},
        {13, true, false, false, false},
        {14, false, false, false, false},
    }};
    return grid;
}

namespace {

/// Trains one configuration from scratch with a run-specific seed and
/// returns its test MSE (best-validation parameters).
double train_and_test(const RunConfig& cfg, const ClipDataset& data, std::uint64_t run_seed) {
    ParamRegistry reg;
    Rng init(Rng::derive(run_seed, 0));
    TtcModel model(reg, cfg.model, init);
    TrainResult result = train(model, reg, data, cfg);
    apply_checkpoint(result.best, reg);
    return evaluate(model, data, Split::Test, config_fingerprint(cfg), run_seed).mse;
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& base, const ClipDataset& data,
                                      const std::vector<std::uint64_t>& seeds,
                                      std::size_t workers) {
    if (seeds.empty()) throw InputError("ablation needs at least one seed");
    const auto& grid = ablation_grid();
    std::vector<AblationRow> rows(grid.size());
    for (std::size_t r = 0; r < grid.size(); ++r) {
        rows[r].spec = grid[r];
        rows[r].run_mse.assign(seeds.size(), kNaN);
        rows[r].run_error.assign(seeds.size(), "");
    }

    std::vector<std::function<void()>> tasks;
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            tasks.push_back([&base, &data, &rows, &seeds, r, k] {
                const AblationSpec& sp = rows[r].spec;
                RunConfig cfg = base;
                cfg.model = base.model.with_toggles(sp.ms, sp.t, sp.s, sp.ns);
                const std::uint64_t run_seed =
                    Rng::derive(seeds[k], static_cast<std::uint64_t>(sp.id));
                cfg.train.seed = run_seed;
                try {
                    rows[r].run_mse[k] = train_and_test(cfg, data, run_seed);
                } catch (const std::exception& e) {
                    rows[r].run_error[k] = e.what();
                }
            });
        }
    }
    run_parallel(tasks, workers);

    for (auto& row : rows) finite_stats(row.run_mse, row.mse_mean, row.mse_std);
    return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    write_csv_row(out, {"ID", "MS", "T", "S", "NS", "mse_mean", "mse_std"});
    for (const auto& row : rows) {
        write_csv_row(out, {std::to_string(row.spec.id), row.spec.ms ? "1" : "0",
                            row.spec.t ? "1" : "0", row.spec.s ? "1" : "0",
                            row.spec.ns ? "1" : "0", format_double(row.mse_mean),
                            format_double(row.mse_std)});
    }
}

void write_ablation_runs_csv(std::ostream& out, const std::vector<AblationRow>& rows,
                             const std::vector<std::uint64_t>& seeds) {
    write_csv_row(out, {"ID", "seed", "mse", "error"});
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.run_mse.size(); ++k) {
            write_csv_row(out, {std::to_string(row.spec.id), std::to_string(seeds[k]),
                                format_double(row.run_mse[k]), row.run_error[k]});
        }
    }
}

// ---- Sensitivity sweeps ----------------------------------------------------

SweepAxis parse_axis(const std::string& name) {
    if (name == "spatial_scales") return SweepAxis::SpatialScales;
    if (name == "temporal_scales") return SweepAxis::TemporalScales;
    if (name == "window_k") return SweepAxis::WindowK;
    throw InputError("unknown sweep axis '" + name +
                     "' (expected spatial_scales, temporal_scales, or window_k)");
}

const char* axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::SpatialScales: return "spatial_scales";
        case SweepAxis::TemporalScales: return "temporal_scales";
        case SweepAxis::WindowK: return "window_k";
    }
    return "?";
}

std::vector<std::size_t> default_axis_values(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::SpatialScales: return {1, 2, 3, 4};
        case SweepAxis::TemporalScales: return {1, 2, 3, 4, 5};
        case SweepAxis::WindowK: return {1, 3, 7, 15};
    }
    return {};
}

namespace {

RunConfig config_for_value(const RunConfig& base, SweepAxis axis, std::size_t value) {
    RunConfig cfg = base;
    switch (axis) {
        case SweepAxis::SpatialScales: cfg.spatial_stages = value; break;
        case SweepAxis::TemporalScales: cfg.model.attention.num_scales = value; break;
        case SweepAxis::WindowK: cfg.model.window = value; break;
    }
    finalize_config(cfg);
    validate_config(cfg);
    return cfg;
}

}  // namespace

std::vector<SweepRow> run_sensitivity(const RunConfig& base, SweepAxis axis,
                                      const std::vector<std::size_t>& values,
                                      const ClipDataset& data,
                                      const std::vector<std::uint64_t>& seeds,
                                      std::size_t workers) {
    if (values.empty()) throw InputError("sensitivity sweep needs at least one value");
    if (seeds.empty()) throw InputError("sensitivity sweep needs at least one seed");

    // Validate every point before any training: a bad value must fail fast.
    std::vector<RunConfig> configs;
    for (std::size_t value : values) {
        RunConfig cfg = config_for_value(base, axis, value);
        ParamRegistry probe_reg;
        Rng probe_rng(0);
        TtcModel probe(probe_reg, cfg.model, probe_rng);  // ctor enforces model invariants
        configs.push_back(std::move(cfg));
    }

    std::vector<SweepRow> rows(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        rows[i].value = values[i];
        rows[i].run_mse.assign(seeds.size(), kNaN);
        rows[i].run_error.assign(seeds.size(), "");
    }

    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            tasks.push_back([&configs, &data, &rows, &seeds, i, k] {
                RunConfig cfg = configs[i];
                const std::uint64_t run_seed = Rng::derive(seeds[k], 1000 + i);
                cfg.train.seed = run_seed;
                try {
                    rows[i].run_mse[k] = train_and_test(cfg, data, run_seed);
                } catch (const std::exception& e) {
                    rows[i].run_error[k] = e.what();
                }
            });
        }
    }
    run_parallel(tasks, workers);

    for (auto& row : rows) finite_stats(row.run_mse, row.mse_mean, row.mse_std);
    return rows;
}

void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepRow>& rows) {
    write_csv_row(out, {"axis", "value", "mse_mean", "mse_std"});
    for (const auto& row : rows) {
        write_csv_row(out, {axis_name(axis), std::to_string(row.value),
                            format_double(row.mse_mean), format_double(row.mse_std)});
    }
}

}  // namespace ttcnet
