// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttcnet/tensor.hpp"

namespace ttcnet {

// Synthetic approaching-object videos with analytic ground truth. A textured
// object closes on the camera at constant speed; under a pinhole projection
// its apparent width grows as w(t) = w0 * d0 / (d0 - v t), so the exact
// collision time d0 / v is known by construction and every clip can be
// labeled with its true time-to-collision.

enum class ObjectShape { Square, Disc };

/// Geometry and photometry of one rendered video.
struct SceneParams {
    double distance = 10.0;  ///< initial object distance (world units)
    double speed = 5.0;      ///< closing speed (world units per second)
    double size = 1.0;       ///< object world size
    ObjectShape shape = ObjectShape::Square;
    double object_intensity = 0.9;  ///< object gray level in [0, 1]
    double offset_x = 0.0;  ///< object center offset from frame center (px)
    double offset_y = 0.0;
    bool drifting_background = false;
    double drift_px_per_s = 4.0;  ///< background translation speed
    std::size_t fps = 30;
    double duration = 2.0;  ///< seconds
    std::size_t frame_size = 32;
    double noise = 0.0;  ///< additive pixel noise sigma
};

struct VideoSample {
    Tensor frames;  ///< [T, H, W, 3] in [0, 1]
    double time_of_collision = 0.0;
};

/// One labeled training example.
struct ClipSample {
    std::string id;
    Tensor frames;  ///< [T, H, W, 3]
    double ttc_label = 0.0;  ///< seconds from clip start to collision
};

enum class BackgroundMode { Static, Drifting, Mixed };

/// Dataset-level generation parameters (the `data.*` config section).
/// Collision times are drawn uniformly from [min_collision, max_collision]
/// and distances from [min_distance, max_distance]; the closing speed is
/// whatever makes those consistent.
struct DataConfig {
    std::size_t num_videos = 200;
    std::size_t frame_size = 32;
    std::size_t fps = 32;
    double duration = 2.0;
    double clip_len = 1.0;  ///< seconds per training clip
    double min_collision = 0.6;
    double max_collision = 1.9;
    double min_distance = 8.0;
    double max_distance = 14.0;
    double min_size = 0.7;
    double max_size = 1.4;
    BackgroundMode background = BackgroundMode::Mixed;
    double noise = 0.02;
    // Photometric jitter ranges used when duplicating minority-bin clips.
    double brightness_jitter = 0.1;
    double contrast_jitter = 0.1;
    double saturation_jitter = 0.1;
    double hue_jitter = 0.05;
    std::size_t balance_bins = 8;
    bool augment = true;
    double train_frac = 0.7;
    double val_frac = 0.15;
};

/// Exact apparent object width in pixels at time t (the projection law the
/// renderer follows). Unbounded as t approaches collision.
double apparent_width(const SceneParams& params, double t);

/// Render a video. Deterministic per (params, seed). Throws ParamError when
/// the implied collision time falls outside (0, duration].
VideoSample gen_approach_video(const SceneParams& params, std::uint64_t seed);

/// Cut a video into consecutive non-overlapping clips of clip_len seconds,
/// each labeled with time_of_collision minus its start time. Clips starting
/// after the collision are dropped; a clip starting exactly at it is kept
/// with label 0 (the hardest case). Trailing frames short of a full clip are
/// discarded. fps * clip_len must be integral.
std::vector<ClipSample> segment_clips(const Tensor& video, double time_of_collision,
                                      std::size_t fps = 30, double clip_len = 1.0,
                                      const std::string& id_prefix = "clip");

/// Synthetic embedding sequence with known trend and seasonal parts:
/// z = trend + seasonal + heteroscedastic noise. The trend combines a linear
/// slope with a quadratic mean drift; the noise standard deviation grows
/// linearly over time by var_drift. Ground-truth components are returned for
/// use as oracles. Requires n > 2 * season_period.
struct ComponentSeries {
    Tensor z;         ///< [n, d]
    Tensor trend;     ///< ground-truth trend component
    Tensor seasonal;  ///< ground-truth seasonal component
};
ComponentSeries gen_component_series(double trend_slope, std::size_t season_period,
                                     double season_amp, double noise_sigma, double mean_drift,
                                     double var_drift, std::size_t n, std::size_t d,
                                     std::uint64_t seed);

/// Equalize the label histogram by duplicating clips from under-filled bins
/// with photometric jitter (brightness, contrast, saturation, hue). Labels
/// are copied untouched; originals always survive unchanged.
std::vector<ClipSample> balance_and_augment(const std::vector<ClipSample>& samples,
                                            const DataConfig& cfg, std::uint64_t seed);

/// One row of a dataset manifest. Paths are relative to the manifest file.
struct ManifestRow {
    std::string id;
    std::string path;
    double ttc_label = 0.0;
    std::string split;  ///< "train" | "val" | "test"
};

/// Generate the full dataset under out_dir: clip tensors in out_dir/clips/
/// and out_dir/manifest.csv. Videos are split train/val/test by video (never
/// by clip) and the train split is balanced and augmented when configured.
/// Pure function of (cfg, seed): reruns produce byte-identical files.
std::vector<ManifestRow> build_dataset(const DataConfig& cfg, std::uint64_t seed,
                                       const std::string& out_dir);

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> load_manifest(const std::string& path);

}  // namespace ttcnet
