// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ttcnet/datagen.hpp"
#include "ttcnet/model.hpp"

namespace ttcnet {

enum class Optimizer { Adam, Sgd };

/// Optimization hyperparameters. The monitored metric for both the plateau
/// decay and early stopping is validation MSE.
struct TrainConfig {
    double lr = 1e-3;  // desk-scale step size; see README for the small-lr preset
    std::size_t plateau_patience = 5;    // epochs without improvement before halving lr
    std::size_t early_stop_patience = 15;  // epochs without improvement before stopping
    std::size_t max_epochs = 50;
    std::size_t batch_size = 16;
    Optimizer optimizer = Optimizer::Adam;
    /// Filled from the command line (--seed), never from the config file.
    std::uint64_t seed = 0;
};

/// Parameters of the synthetic component series used by `diagnose` and
/// `decompose` when no external input is given.
struct SeriesConfig {
    std::size_t sequences = 20;
    std::size_t length = 200;
    std::size_t dims = 8;
    double trend_slope = 0.02;
    std::size_t season_period = 16;
    double season_amp = 1.0;
    double noise_sigma = 0.1;
    double mean_drift = 2.0;
    double var_drift = 2.0;
    std::size_t chunk = 10;  ///< instance-window length used by diagnostics
};

/// Everything a run needs, grouped by config-file section.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    SeriesConfig series;
    // Scalar description of the spatial stage pyramid; finalize_config
    // expands these into model.spatial.stages. Stage i pools 2x2 (stage 0
    // none), doubles the width, and uses windowed attention everywhere but
    // the last, global stage.
    std::size_t spatial_stages = 3;
    std::size_t spatial_base_width = 32;
    std::size_t spatial_blocks = 1;
};

/// Rebuild derived structure (the spatial stage list) from the scalar keys.
/// The parsers call this automatically; call it again after editing the
/// scalars by hand. Throws ConfigError when the token grid cannot support
/// the requested stage count.
void finalize_config(RunConfig& cfg);

/// Config files are line-oriented UTF-8 text:
///
///     # comment
///     model.embed_dim = 128
///     train.lr = 0.001
///
/// One `section.key = value` per line; `#` starts a comment; blank lines are
/// skipped; later assignments override earlier ones. Unknown keys and
/// malformed values raise ConfigError with the offending line number. Only
/// values present in the file are changed — everything else keeps its
/// default.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// Apply one `section.key = value` line to an existing config (used for
/// command-line overrides). `where` names the source for error messages.
void apply_config_line(RunConfig& cfg, const std::string& line, const std::string& where);

/// Every known key rendered in declaration order, one line each, with values
/// formatted so that parsing the text reproduces the config bit-exactly.
std::string canonical_config_text(const RunConfig& cfg);

/// FNV-1a over the canonical text. Reports embed this so results can be
/// traced back to the exact configuration that produced them.
std::uint64_t config_fingerprint(const RunConfig& cfg);
std::string fingerprint_hex(std::uint64_t fp);

/// All recognized keys in declaration order (for docs and error messages).
std::vector<std::string> config_key_names();

/// Cross-field checks that individual setters cannot see (split fractions,
/// patience vs max epochs, ...). Throws ConfigError.
void validate_config(const RunConfig& cfg);

}  // namespace ttcnet
