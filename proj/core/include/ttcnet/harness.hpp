// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ttcnet/checkpoint.hpp"
#include "ttcnet/config.hpp"
#include "ttcnet/model.hpp"
#include "ttcnet/tensor.hpp"

namespace ttcnet {

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split parse_split(const std::string& name);

/// In-memory clip store. Frames are cached as float32 (the on-disk payload
/// type) and widened to a double Tensor on access, so a full desk-scale
/// dataset stays a few hundred MB.
class ClipDataset {
public:
    ClipDataset() = default;

    /// Reads a manifest and loads every referenced clip tensor. Paths are
    /// resolved relative to the manifest's directory.
    static ClipDataset load(const std::string& manifest_path);

    /// Adds one clip (copied, narrowed to f32).
    void add(const std::string& id, const Tensor& frames, double label, Split split);

    std::size_t size() const { return clips_.size(); }
    const std::string& id(std::size_t i) const;
    double label(std::size_t i) const;
    Split split(std::size_t i) const;
    /// Materializes clip i as a fresh double tensor.
    Tensor frames(std::size_t i) const;

    /// Indices belonging to a split, in insertion (manifest) order.
    std::vector<std::size_t> split_indices(Split s) const;

private:
    struct Stored {
        std::string id;
        Shape shape;
        std::vector<float> data;
        double label = 0.0;
        Split split = Split::Train;
    };
    std::vector<Stored> clips_;
};

// ---- Training --------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;  ///< 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double lr = 0.0;     ///< rate used during this epoch
    bool decayed = false;  ///< plateau halving fired after this epoch
};

struct TrainResult {
    Checkpoint best;           ///< parameters at the best validation epoch
    double best_val_mse = 0.0;
    std::size_t best_epoch = 0;  ///< 0 when no epoch ran
    std::vector<EpochRecord> history;
};

/// Trains the model in place and returns the best-validation checkpoint plus
/// the per-epoch history. Uses cfg.train for the schedule and cfg.train.seed
/// for the derived shuffle/dropout streams; the model itself must already be
/// built from cfg.model. Validation MSE is the monitored metric: the
/// learning rate halves after `plateau_patience` epochs without improvement
/// and training stops early after `early_stop_patience`. A non-finite loss
/// aborts with a NumericError carrying a state dump.
TrainResult train(TtcModel& model, ParamRegistry& reg, const ClipDataset& data,
                  const RunConfig& cfg);

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);
/// Same records as `key=value` pairs, one line per epoch.
void write_history_text(std::ostream& out, const std::vector<EpochRecord>& history);

// ---- Evaluation ------------------------------------------------------------

struct EvalReport {
    double mse = 0.0;
    std::vector<std::string> ids;
    std::vector<double> labels;
    std::vector<double> predictions;
    std::vector<double> residuals;  ///< prediction - label, split order
    std::uint64_t fingerprint = 0;  ///< config fingerprint of the run
    std::uint64_t seed = 0;
};

using Predictor = std::function<double(const Tensor& frames)>;

/// Evaluates an arbitrary predictor over one split (the seam used to test
/// the metric itself).
EvalReport evaluate(const Predictor& predict, const ClipDataset& data, Split split,
                    std::uint64_t fingerprint, std::uint64_t seed);
/// Evaluates a model with dropout disabled.
EvalReport evaluate(const TtcModel& model, const ClipDataset& data, Split split,
                    std::uint64_t fingerprint, std::uint64_t seed);
/// Rebuilds the model a checkpoint describes (config text embedded in the
/// checkpoint), loads the weights, and evaluates it.
EvalReport evaluate(const Checkpoint& ckpt, const ClipDataset& data, Split split);

void write_eval_csv(std::ostream& out, const EvalReport& report);

// ---- Ablation grid ---------------------------------------------------------

struct AblationSpec {
    int id = 0;
    bool ms = false, t = false, s = false, ns = false;
};

/// The fixed 14-row toggle grid. Row 1 is the full model, row 14 disables
/// everything.
const std::array<AblationSpec, 14>& ablation_grid();

struct AblationRow {
    AblationSpec spec;
    std::vector<double> run_mse;        ///< per seed; NaN when the run failed
    std::vector<std::string> run_error;  ///< empty when the run succeeded
    double mse_mean = 0.0;  ///< over successful runs; NaN when none
    double mse_std = 0.0;   ///< sample std; 0 for a single run
};

/// Trains and evaluates every grid row once per seed. Per-row failures are
/// recorded in the row, never thrown. `workers` = 0 picks the hardware
/// concurrency; rows land in preallocated slots so results do not depend on
/// scheduling.
std::vector<AblationRow> run_ablation(const RunConfig& base, const ClipDataset& data,
                                      const std::vector<std::uint64_t>& seeds,
                                      std::size_t workers = 0);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
/// One row per (grid row, seed) attempt, including failures.
void write_ablation_runs_csv(std::ostream& out, const std::vector<AblationRow>& rows,
                             const std::vector<std::uint64_t>& seeds);

// ---- Sensitivity sweeps ----------------------------------------------------

enum class SweepAxis { SpatialScales, TemporalScales, WindowK };

SweepAxis parse_axis(const std::string& name);
const char* axis_name(SweepAxis axis);
/// The grids swept by default: spatial 1-4, temporal 1-5, window {1,3,7,15}.
std::vector<std::size_t> default_axis_values(SweepAxis axis);

struct SweepRow {
    std::size_t value = 0;
    std::vector<double> run_mse;
    std::vector<std::string> run_error;
    double mse_mean = 0.0;
    double mse_std = 0.0;
};

/// One train+eval per value per seed. Every value is validated against the
/// base config up front: an out-of-range value raises ConfigError before any
/// training starts.
std::vector<SweepRow> run_sensitivity(const RunConfig& base, SweepAxis axis,
                                      const std::vector<std::size_t>& values,
                                      const ClipDataset& data,
                                      const std::vector<std::uint64_t>& seeds,
                                      std::size_t workers = 0);

void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace ttcnet
