// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <vector>

#include "ttcnet/csv.hpp"
#include "ttcnet/errors.hpp"
#include "ttcnet/rng.hpp"
#include "ttcnet/tensor_io.hpp"

namespace ttcnet {

namespace {

// Pinhole focal length in pixels, fixed relative to the frame so that a
// unit-size object at distance 10 starts ~6 px wide on a 32 px frame.
double focal(const SceneParams& p) { return 2.0 * static_cast<double>(p.frame_size); }

constexpr std::size_t kLattice = 8;  // background value-noise grid

void check_params(const SceneParams& p) {
    if (p.speed <= 0.0) throw ParamError("scene: closing speed must be > 0");
    if (p.distance <= 0.0) throw ParamError("scene: initial distance must be > 0");
    if (p.size <= 0.0) throw ParamError("scene: object size must be > 0");
    if (p.fps == 0) throw ParamError("scene: fps must be >= 1");
    if (p.duration <= 0.0) throw ParamError("scene: duration must be > 0");
    if (p.frame_size < 4) throw ParamError("scene: frame size must be >= 4");
    if (p.noise < 0.0) throw ParamError("scene: noise level must be >= 0");
    if (p.object_intensity < 0.0 || p.object_intensity > 1.0) {
        throw ParamError("scene: object intensity must lie in [0, 1]");
    }
    const double t_col = p.distance / p.speed;
    if (t_col > p.duration) {
        throw ParamError("scene: collision at " + std::to_string(t_col) +
                         " s falls outside the " + std::to_string(p.duration) + " s video");
    }
}

struct BackgroundTexture {
    double lattice[kLattice][kLattice];
    double tint[3];
    double drift_dx = 0.0, drift_dy = 0.0;  // lattice units per second

    // Bilinear sample of the periodic lattice at pixel (x, y) and time t.
    double sample(double x, double y, double t, std::size_t frame_size, std::size_t ch) const {
        const double scale = static_cast<double>(kLattice) / static_cast<double>(frame_size);
        double gx = x * scale + drift_dx * t;
        double gy = y * scale + drift_dy * t;
        gx -= std::floor(gx / kLattice) * kLattice;
        gy -= std::floor(gy / kLattice) * kLattice;
        const std::size_t x0 = static_cast<std::size_t>(gx) % kLattice;
        const std::size_t y0 = static_cast<std::size_t>(gy) % kLattice;
        const std::size_t x1 = (x0 + 1) % kLattice;
        const std::size_t y1 = (y0 + 1) % kLattice;
        const double fx = gx - std::floor(gx);
        const double fy = gy - std::floor(gy);
        const double v = (1 - fy) * ((1 - fx) * lattice[y0][x0] + fx * lattice[y0][x1]) +
                         fy * ((1 - fx) * lattice[y1][x0] + fx * lattice[y1][x1]);
        return std::clamp(v + tint[ch], 0.0, 1.0);
    }
};

BackgroundTexture make_background(const SceneParams& p, Rng& rng) {
    BackgroundTexture bg;
    for (std::size_t y = 0; y < kLattice; ++y) {
        for (std::size_t x = 0; x < kLattice; ++x) {
            bg.lattice[y][x] = rng.uniform(0.35, 0.65);
        }
    }
    for (int c = 0; c < 3; ++c) bg.tint[c] = rng.uniform(-0.05, 0.05);
    if (p.drifting_background) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double scale = static_cast<double>(kLattice) / static_cast<double>(p.frame_size);
        bg.drift_dx = std::cos(angle) * p.drift_px_per_s * scale;
        bg.drift_dy = std::sin(angle) * p.drift_px_per_s * scale;
    }
    return bg;
}

}  // namespace

double apparent_width(const SceneParams& params, double t) {
    const double d = params.distance - params.speed * t;
    if (d <= 1e-9) return std::numeric_limits<double>::infinity();
    return focal(params) * params.size / d;
}

VideoSample gen_approach_video(const SceneParams& params, std::uint64_t seed) {
    check_params(params);
    Rng rng(seed);
    const std::size_t n = params.frame_size;
    const std::size_t frames = static_cast<std::size_t>(
        std::llround(static_cast<double>(params.fps) * params.duration));
    if (frames == 0) throw ParamError("scene: duration shorter than one frame");

    BackgroundTexture bg = make_background(params, rng);
    const double cx = static_cast<double>(n) / 2.0 + params.offset_x;
    const double cy = static_cast<double>(n) / 2.0 + params.offset_y;

    VideoSample out;
    out.time_of_collision = params.distance / params.speed;
    out.frames = Tensor(Shape{frames, n, n, 3});
    double* px = out.frames.data();

    for (std::size_t f = 0; f < frames; ++f) {
        const double t = static_cast<double>(f) / static_cast<double>(params.fps);
        const double half = apparent_width(params, t) / 2.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double x = static_cast<double>(j) + 0.5;
                const double y = static_cast<double>(i) + 0.5;
                bool inside;
                if (std::isinf(half)) {
                    inside = true;  // at/after collision the object fills the view
                } else if (params.shape == ObjectShape::Square) {
                    inside = std::abs(x - cx) <= half && std::abs(y - cy) <= half;
                } else {
                    inside = std::hypot(x - cx, y - cy) <= half;
                }
                for (std::size_t c = 0; c < 3; ++c) {
                    *px++ = inside ? params.object_intensity : bg.sample(x, y, t, n, c);
                }
            }
        }
    }
    if (params.noise > 0.0) {
        double* data = out.frames.data();
        for (std::size_t i = 0; i < out.frames.size(); ++i) {
            data[i] = std::clamp(data[i] + params.noise * rng.normal(), 0.0, 1.0);
        }
    }
    return out;
}

std::vector<ClipSample> segment_clips(const Tensor& video, double time_of_collision,
                                      std::size_t fps, double clip_len,
                                      const std::string& id_prefix) {
    if (!video.defined() || video.size() == 0 || video.dim(0) == 0) {
        throw InputError("segment_clips: empty video");
    }
    if (video.rank() != 4) {
        throw DimensionError("segment_clips: expected a [T, H, W, 3] video tensor");
    }
    if (fps == 0 || clip_len <= 0.0) throw ConfigError("segment_clips: fps and clip_len must be positive");
    const double fpc_exact = static_cast<double>(fps) * clip_len;
    const std::size_t fpc = static_cast<std::size_t>(fpc_exact);
    if (static_cast<double>(fpc) != fpc_exact || fpc == 0) {
        throw ConfigError("segment_clips: fps * clip_len must be a whole number of frames");
    }

    const std::size_t total = video.dim(0);
    const std::size_t per_frame = video.dim(1) * video.dim(2) * video.dim(3);
    std::vector<ClipSample> clips;
    for (std::size_t c = 0; (c + 1) * fpc <= total; ++c) {
        const double start = static_cast<double>(c) * clip_len;
        const double ttc = time_of_collision - start;
        if (ttc < 0.0) break;  // clips beginning after the collision carry no target
        ClipSample clip;
        clip.id = id_prefix + "c" + std::to_string(c);
        clip.ttc_label = ttc;
        clip.frames = Tensor(Shape{fpc, video.dim(1), video.dim(2), video.dim(3)});
        const double* src = video.data() + c * fpc * per_frame;
        std::copy(src, src + fpc * per_frame, clip.frames.data());
        clips.push_back(std::move(clip));
    }
    return clips;
}

ComponentSeries gen_component_series(double trend_slope, std::size_t season_period,
                                     double season_amp, double noise_sigma, double mean_drift,
                                     double var_drift, std::size_t n, std::size_t d,
                                     std::uint64_t seed) {
    if (season_period == 0) throw ParamError("component series: season period must be >= 1");
    if (n <= 2 * season_period) {
        throw ParamError("component series: need n > 2 * season_period, got n = " +
                         std::to_string(n));
    }
    if (d == 0) throw ParamError("component series: need at least one dimension");

    Rng rng(seed);
    std::vector<double> dir(d), phase(d), drift(d);
    for (std::size_t c = 0; c < d; ++c) {
        dir[c] = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        phase[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        drift[c] = rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    }

    ComponentSeries out;
    out.z = Tensor(Shape{n, d});
    out.trend = Tensor(Shape{n, d});
    out.seasonal = Tensor(Shape{n, d});
    const double span = static_cast<double>(n - 1);
    for (std::size_t t = 0; t < n; ++t) {
        const double tc = static_cast<double>(t);
        const double frac = tc / span;
        for (std::size_t c = 0; c < d; ++c) {
            const double trend = trend_slope * (tc - span / 2.0) * dir[c] +
                                 mean_drift * frac * frac * drift[c];
            const double seasonal =
                season_amp *
                std::sin(2.0 * std::numbers::pi * tc / static_cast<double>(season_period) +
                         phase[c]);
            const double sigma = noise_sigma * (1.0 + var_drift * frac);
            const double noise = sigma > 0.0 ? sigma * rng.normal() : 0.0;
            out.trend.data()[t * d + c] = trend;
            out.seasonal.data()[t * d + c] = seasonal;
            out.z.data()[t * d + c] = trend + seasonal + noise;
        }
    }
    return out;
}

namespace {

Tensor jittered(const Tensor& frames, const DataConfig& cfg, Rng& rng) {
    // Draw all four factors unconditionally so the stream stays aligned, but
    // skip exact-identity transforms: a zero-range jitter must reproduce the
    // source bit for bit.
    const double contrast = rng.uniform(-cfg.contrast_jitter, cfg.contrast_jitter);
    const double saturation = rng.uniform(-cfg.saturation_jitter, cfg.saturation_jitter);
    const double hue = rng.uniform(-cfg.hue_jitter, cfg.hue_jitter);
    const double brightness = rng.uniform(-cfg.brightness_jitter, cfg.brightness_jitter);

    Tensor out = frames.clone();
    double* p = out.data();
    const std::size_t pixels = out.size() / 3;
    for (std::size_t i = 0; i < pixels; ++i) {
        double r = p[3 * i], g = p[3 * i + 1], b = p[3 * i + 2];
        if (contrast != 0.0) {
            r = (r - 0.5) * (1.0 + contrast) + 0.5;
            g = (g - 0.5) * (1.0 + contrast) + 0.5;
            b = (b - 0.5) * (1.0 + contrast) + 0.5;
        }
        if (saturation != 0.0) {
            const double gray = (r + g + b) / 3.0;
            r = gray + (r - gray) * (1.0 + saturation);
            g = gray + (g - gray) * (1.0 + saturation);
            b = gray + (b - gray) * (1.0 + saturation);
        }
        if (hue != 0.0) {
            // Cheap hue-like shift: blend toward the channel-rotated pixel.
            const double w = std::abs(hue);
            const double rr = hue > 0 ? g : b;
            const double gg = hue > 0 ? b : r;
            const double bb = hue > 0 ? r : g;
            r = (1.0 - w) * r + w * rr;
            g = (1.0 - w) * g + w * gg;
            b = (1.0 - w) * b + w * bb;
        }
        if (brightness != 0.0) {
            r += brightness;
            g += brightness;
            b += brightness;
        }
        p[3 * i] = std::clamp(r, 0.0, 1.0);
        p[3 * i + 1] = std::clamp(g, 0.0, 1.0);
        p[3 * i + 2] = std::clamp(b, 0.0, 1.0);
    }
    return out;
}

}  // namespace

std::vector<ClipSample> balance_and_augment(const std::vector<ClipSample>& samples,
                                            const DataConfig& cfg, std::uint64_t seed) {
    if (samples.empty()) throw InputError("balance_and_augment: no samples");
    if (cfg.balance_bins == 0) throw ConfigError("balance_and_augment: need at least one bin");

    double lo = samples[0].ttc_label, hi = samples[0].ttc_label;
    for (const ClipSample& s : samples) {
        lo = std::min(lo, s.ttc_label);
        hi = std::max(hi, s.ttc_label);
    }
    std::vector<ClipSample> out = samples;
    if (hi <= lo) return out;  // single label value: nothing to equalize

    const std::size_t bins = cfg.balance_bins;
    auto bin_of = [&](double label) {
        const double rel = (label - lo) / (hi - lo);
        return std::min(bins - 1, static_cast<std::size_t>(rel * static_cast<double>(bins)));
    };
    std::vector<std::vector<std::size_t>> members(bins);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        members[bin_of(samples[i].ttc_label)].push_back(i);
    }
    std::size_t target = 0;
    for (const auto& m : members) target = std::max(target, m.size());

    Rng rng(seed);
    for (std::size_t b = 0; b < bins; ++b) {
        if (members[b].empty()) continue;
        for (std::size_t k = members[b].size(); k < target; ++k) {
            const ClipSample& src = samples[members[b][rng.index(members[b].size())]];
            ClipSample dup;
            dup.id = src.id + "-aug" + std::to_string(k - members[b].size());
            dup.ttc_label = src.ttc_label;
            dup.frames = jittered(src.frames, cfg, rng);
            out.push_back(std::move(dup));
        }
    }
    return out;
}

namespace {

std::string video_id(std::size_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "v%04zu", v);
    return std::string(buf);
}

SceneParams draw_scene(const DataConfig& cfg, std::size_t v, Rng& rng) {
    SceneParams p;
    p.fps = cfg.fps;
    p.duration = cfg.duration;
    p.frame_size = cfg.frame_size;
    p.noise = cfg.noise;
    const double t_col = rng.uniform(cfg.min_collision, cfg.max_collision);
    p.distance = rng.uniform(cfg.min_distance, cfg.max_distance);
    p.speed = p.distance / t_col;
    p.size = rng.uniform(cfg.min_size, cfg.max_size);
    p.shape = rng.index(2) == 0 ? ObjectShape::Square : ObjectShape::Disc;
    // Keep the object clearly separated from the mid-range background.
    p.object_intensity = rng.uniform() < 0.5 ? rng.uniform(0.8, 0.95) : rng.uniform(0.05, 0.2);
    const double max_off = static_cast<double>(cfg.frame_size) / 8.0;
    p.offset_x = rng.uniform(-max_off, max_off);
    p.offset_y = rng.uniform(-max_off, max_off);
    switch (cfg.background) {
        case BackgroundMode::Static: p.drifting_background = false; break;
        case BackgroundMode::Drifting: p.drifting_background = true; break;
        case BackgroundMode::Mixed: p.drifting_background = (v % 2 == 1); break;
    }
    p.drift_px_per_s = rng.uniform(2.0, 6.0);
    return p;
}

}  // namespace

std::vector<ManifestRow> build_dataset(const DataConfig& cfg, std::uint64_t seed,
                                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "clips");

    // Split by video, never by clip: clips of one video share a split so no
    // rendering of the same scene leaks across train/test.
    std::vector<std::size_t> order(cfg.num_videos);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(Rng::derive(seed, 1000000));
    split_rng.shuffle(order);
    const std::size_t n_train = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.train_frac * static_cast<double>(cfg.num_videos))));
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(cfg.val_frac * static_cast<double>(cfg.num_videos)));
    std::vector<std::string> split_of(cfg.num_videos);
    for (std::size_t i = 0; i < order.size(); ++i) {
        split_of[order[i]] = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    }

    std::vector<ClipSample> train_clips;
    std::vector<std::pair<ClipSample, std::string>> other_clips;  // clip, split
    for (std::size_t v = 0; v < cfg.num_videos; ++v) {
        Rng param_rng(Rng::derive(seed, 2 * v));
        const SceneParams scene = draw_scene(cfg, v, param_rng);
        VideoSample video = gen_approach_video(scene, Rng::derive(seed, 2 * v + 1));
        auto clips = segment_clips(video.frames, video.time_of_collision, cfg.fps, cfg.clip_len,
                                   video_id(v));
        for (ClipSample& clip : clips) {
            if (split_of[v] == "train") {
                train_clips.push_back(std::move(clip));
            } else {
                other_clips.emplace_back(std::move(clip), split_of[v]);
            }
        }
    }
    if (cfg.augment) {
        train_clips = balance_and_augment(train_clips, cfg, Rng::derive(seed, 1000001));
    }

    std::vector<ManifestRow> rows;
    auto emit = [&](const ClipSample& clip, const std::string& split) {
        ManifestRow row;
        row.id = clip.id;
        row.path = "clips/" + clip.id + ".cnt";
        row.ttc_label = clip.ttc_label;
        row.split = split;
        save_tensor((fs::path(out_dir) / row.path).string(), clip.frames);
        rows.push_back(std::move(row));
    };
    for (const ClipSample& clip : train_clips) emit(clip, "train");
    for (const auto& [clip, split] : other_clips) emit(clip, split);

    write_manifest((fs::path(out_dir) / "manifest.csv").string(), rows);
    return rows;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open manifest for writing: " + path);
    write_csv_row(out, {"id", "path", "ttc_label", "split"});
    for (const ManifestRow& r : rows) {
        write_csv_row(out, {r.id, r.path, format_double(r.ttc_label), r.split});
    }
    if (!out) throw IoError("manifest write failed: " + path);
}

std::vector<ManifestRow> load_manifest(const std::string& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> expected = {"id", "path", "ttc_label", "split"};
    if (table.header != expected) {
        throw InputError("manifest header must be id,path,ttc_label,split: " + path);
    }
    std::vector<ManifestRow> rows;
    for (const auto& r : table.rows) {
        ManifestRow row;
        row.id = r[0];
        row.path = r[1];
        row.ttc_label = parse_double(r[2], "manifest ttc_label");
        row.split = r[3];
        if (row.split != "train" && row.split != "val" && row.split != "test") {
            throw InputError("manifest split must be train/val/test, got '" + row.split + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ttcnet
