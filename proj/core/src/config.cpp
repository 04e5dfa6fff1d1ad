// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>

#include "ttcnet/csv.hpp"
#include "ttcnet/errors.hpp"

namespace ttcnet {

namespace {

std::string_view trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value,
                            const std::string& expected, const std::string& where) {
    throw ConfigError(where + ": key '" + key + "' expects " + expected + ", got '" +
                      std::string(value) + "'");
}

struct Key {
    std::string name;
    std::function<void(RunConfig&, std::string_view, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

using SizeRef = std::function<std::size_t&(RunConfig&)>;
using DoubleRef = std::function<double&(RunConfig&)>;
using BoolRef = std::function<bool&(RunConfig&)>;

Key size_key(std::string name, SizeRef ref) {
    return Key{
        name,
        [name, ref](RunConfig& c, std::string_view v, const std::string& where) {
            std::uint64_t parsed = 0;
            auto res = std::from_chars(v.data(), v.data() + v.size(), parsed);
            if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
                bad_value(name, v, "a non-negative integer", where);
            }
            ref(c) = static_cast<std::size_t>(parsed);
        },
        [ref](const RunConfig& c) {
            return std::to_string(ref(const_cast<RunConfig&>(c)));
        }};
}

Key double_key(std::string name, DoubleRef ref) {
    return Key{
        name,
        [name, ref](RunConfig& c, std::string_view v, const std::string& where) {
            double parsed = 0.0;
            auto res = std::from_chars(v.data(), v.data() + v.size(), parsed);
            if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
                bad_value(name, v, "a number", where);
            }
            ref(c) = parsed;
        },
        [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

Key bool_key(std::string name, BoolRef ref) {
    return Key{
        name,
        [name, ref](RunConfig& c, std::string_view v, const std::string& where) {
            if (v == "true") ref(c) = true;
            else if (v == "false") ref(c) = false;
            else bad_value(name, v, "'true' or 'false'", where);
        },
        [ref](const RunConfig& c) {
            return ref(const_cast<RunConfig&>(c)) ? "true" : "false";
        }};
}

Key optimizer_key() {
    return Key{
        "train.optimizer",
        [](RunConfig& c, std::string_view v, const std::string& where) {
            if (v == "adam") c.train.optimizer = Optimizer::Adam;
            else if (v == "sgd") c.train.optimizer = Optimizer::Sgd;
            else bad_value("train.optimizer", v, "'adam' or 'sgd'", where);
        },
        [](const RunConfig& c) {
            return std::string(c.train.optimizer == Optimizer::Adam ? "adam" : "sgd");
        }};
}

Key background_key() {
    return Key{
        "data.background",
        [](RunConfig& c, std::string_view v, const std::string& where) {
            if (v == "static") c.data.background = BackgroundMode::Static;
            else if (v == "drifting") c.data.background = BackgroundMode::Drifting;
            else if (v == "mixed") c.data.background = BackgroundMode::Mixed;
            else bad_value("data.background", v, "'static', 'drifting', or 'mixed'", where);
        },
        [](const RunConfig& c) {
            switch (c.data.background) {
                case BackgroundMode::Static: return std::string("static");
                case BackgroundMode::Drifting: return std::string("drifting");
                default: return std::string("mixed");
            }
        }};
}

// Every recognized key, in the order canonical_config_text emits them.
const std::vector<Key>& key_table() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        auto S = [](auto ref) { return SizeRef(ref); };
        auto D = [](auto ref) { return DoubleRef(ref); };
        auto B = [](auto ref) { return BoolRef(ref); };

        k.push_back(size_key("model.frame_size",
                             S([](RunConfig& c) -> std::size_t& { return c.model.spatial.frame_size; })));
        k.push_back(size_key("model.patch_size",
                             S([](RunConfig& c) -> std::size_t& { return c.model.spatial.patch_size; })));
        k.push_back(size_key("model.embed_dim",
                             S([](RunConfig& c) -> std::size_t& { return c.model.spatial.embed_dim; })));
        k.push_back(size_key("model.spatial_heads",
                             S([](RunConfig& c) -> std::size_t& { return c.model.spatial.num_heads; })));
        k.push_back(size_key("model.spatial_ff_mult",
                             S([](RunConfig& c) -> std::size_t& { return c.model.spatial.ff_mult; })));
        k.push_back(size_key("model.spatial_stages",
                             S([](RunConfig& c) -> std::size_t& { return c.spatial_stages; })));
        k.push_back(size_key("model.spatial_base_width",
                             S([](RunConfig& c) -> std::size_t& { return c.spatial_base_width; })));
        k.push_back(size_key("model.spatial_blocks",
                             S([](RunConfig& c) -> std::size_t& { return c.spatial_blocks; })));
        k.push_back(size_key("model.encoder_layers",
                             S([](RunConfig& c) -> std::size_t& { return c.model.encoder_layers; })));
        k.push_back(size_key("model.decoder_layers",
                             S([](RunConfig& c) -> std::size_t& { return c.model.decoder_layers; })));
        k.push_back(size_key("model.attention_heads",
                             S([](RunConfig& c) -> std::size_t& { return c.model.attention.num_heads; })));
        k.push_back(size_key("model.base_segment_len",
                             S([](RunConfig& c) -> std::size_t& { return c.model.attention.base_segment_len; })));
        k.push_back(size_key("model.num_scales",
                             S([](RunConfig& c) -> std::size_t& { return c.model.attention.num_scales; })));
        k.push_back(bool_key("model.allow_padding",
                             B([](RunConfig& c) -> bool& { return c.model.attention.allow_padding; })));
        k.push_back(bool_key("model.learned_fusion",
                             B([](RunConfig& c) -> bool& { return c.model.attention.learned_fusion; })));
        k.push_back(size_key("model.ff_width",
                             S([](RunConfig& c) -> std::size_t& { return c.model.ff_width; })));
        k.push_back(size_key("model.window",
                             S([](RunConfig& c) -> std::size_t& { return c.model.window; })));
        k.push_back(size_key("model.input_window",
                             S([](RunConfig& c) -> std::size_t& { return c.model.input_window; })));
        k.push_back(size_key("model.encoder_window",
                             S([](RunConfig& c) -> std::size_t& { return c.model.encoder_window; })));
        k.push_back(size_key("model.decoder_window",
                             S([](RunConfig& c) -> std::size_t& { return c.model.decoder_window; })));
        k.push_back(size_key("model.seq_len",
                             S([](RunConfig& c) -> std::size_t& { return c.model.seq_len; })));
        k.push_back(size_key("model.frame_stride",
                             S([](RunConfig& c) -> std::size_t& { return c.model.frame_stride; })));
        k.push_back(double_key("model.dropout",
                               D([](RunConfig& c) -> double& { return c.model.dropout_rate; })));
        k.push_back(size_key("model.head_hidden",
                             S([](RunConfig& c) -> std::size_t& { return c.model.head_hidden; })));
        k.push_back(size_key("model.projector_hidden",
                             S([](RunConfig& c) -> std::size_t& { return c.model.projector_hidden; })));
        k.push_back(bool_key("model.multi_scale",
                             B([](RunConfig& c) -> bool& { return c.model.multi_scale; })));
        k.push_back(bool_key("model.trend",
                             B([](RunConfig& c) -> bool& { return c.model.trend; })));
        k.push_back(bool_key("model.seasonal",
                             B([](RunConfig& c) -> bool& { return c.model.seasonal; })));
        k.push_back(bool_key("model.nonstationary",
                             B([](RunConfig& c) -> bool& { return c.model.nonstationary; })));

        k.push_back(double_key("train.lr",
                               D([](RunConfig& c) -> double& { return c.train.lr; })));
        k.push_back(size_key("train.plateau_patience",
                             S([](RunConfig& c) -> std::size_t& { return c.train.plateau_patience; })));
        k.push_back(size_key("train.early_stop_patience",
                             S([](RunConfig& c) -> std::size_t& { return c.train.early_stop_patience; })));
        k.push_back(size_key("train.max_epochs",
                             S([](RunConfig& c) -> std::size_t& { return c.train.max_epochs; })));
        k.push_back(size_key("train.batch_size",
                             S([](RunConfig& c) -> std::size_t& { return c.train.batch_size; })));
        k.push_back(optimizer_key());

        k.push_back(size_key("data.num_videos",
                             S([](RunConfig& c) -> std::size_t& { return c.data.num_videos; })));
        k.push_back(size_key("data.frame_size",
                             S([](RunConfig& c) -> std::size_t& { return c.data.frame_size; })));
        k.push_back(size_key("data.fps",
                             S([](RunConfig& c) -> std::size_t& { return c.data.fps; })));
        k.push_back(double_key("data.duration",
                               D([](RunConfig& c) -> double& { return c.data.duration; })));
        k.push_back(double_key("data.clip_len",
                               D([](RunConfig& c) -> double& { return c.data.clip_len; })));
        k.push_back(double_key("data.min_collision",
                               D([](RunConfig& c) -> double& { return c.data.min_collision; })));
        k.push_back(double_key("data.max_collision",
                               D([](RunConfig& c) -> double& { return c.data.max_collision; })));
        k.push_back(double_key("data.min_distance",
                               D([](RunConfig& c) -> double& { return c.data.min_distance; })));
        k.push_back(double_key("data.max_distance",
                               D([](RunConfig& c) -> double& { return c.data.max_distance; })));
        k.push_back(double_key("data.min_size",
                               D([](RunConfig& c) -> double& { return c.data.min_size; })));
        k.push_back(double_key("data.max_size",
                               D([](RunConfig& c) -> double& { return c.data.max_size; })));
        k.push_back(background_key());
        k.push_back(double_key("data.noise",
                               D([](RunConfig& c) -> double& { return c.data.noise; })));
        k.push_back(double_key("data.brightness_jitter",
                               D([](RunConfig& c) -> double& { return c.data.brightness_jitter; })));
        k.push_back(double_key("data.contrast_jitter",
                               D([](RunConfig& c) -> double& { return c.data.contrast_jitter; })));
        k.push_back(double_key("data.saturation_jitter",
                               D([](RunConfig& c) -> double& { return c.data.saturation_jitter; })));
        k.push_back(double_key("data.hue_jitter",
                               D([](RunConfig& c) -> double& { return c.data.hue_jitter; })));
        k.push_back(size_key("data.balance_bins",
                             S([](RunConfig& c) -> std::size_t& { return c.data.balance_bins; })));
        k.push_back(bool_key("data.augment",
                             B([](RunConfig& c) -> bool& { return c.data.augment; })));
        k.push_back(double_key("data.train_frac",
                               D([](RunConfig& c) -> double& { return c.data.train_frac; })));
        k.push_back(double_key("data.val_frac",
                               D([](RunConfig& c) -> double& { return c.data.val_frac; })));

        k.push_back(size_key("series.sequences",
                             S([](RunConfig& c) -> std::size_t& { return c.series.sequences; })));
        k.push_back(size_key("series.length",
                             S([](RunConfig& c) -> std::size_t& { return c.series.length; })));
        k.push_back(size_key("series.dims",
                             S([](RunConfig& c) -> std::size_t& { return c.series.dims; })));
        k.push_back(double_key("series.trend_slope",
                               D([](RunConfig& c) -> double& { return c.series.trend_slope; })));
        k.push_back(size_key("series.season_period",
                             S([](RunConfig& c) -> std::size_t& { return c.series.season_period; })));
        k.push_back(double_key("series.season_amp",
                               D([](RunConfig& c) -> double& { return c.series.season_amp; })));
        k.push_back(double_key("series.noise_sigma",
                               D([](RunConfig& c) -> double& { return c.series.noise_sigma; })));
        k.push_back(double_key("series.mean_drift",
                               D([](RunConfig& c) -> double& { return c.series.mean_drift; })));
        k.push_back(double_key("series.var_drift",
                               D([](RunConfig& c) -> double& { return c.series.var_drift; })));
        k.push_back(size_key("series.chunk",
                             S([](RunConfig& c) -> std::size_t& { return c.series.chunk; })));
        return k;
    }();
    return table;
}

const Key* find_key(std::string_view name) {
    for (const Key& k : key_table()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& raw, const std::string& where) {
    std::string_view line = raw;
    if (std::size_t hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) return;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError(where + ": expected 'section.key = value', got '" + std::string(line) +
                          "'");
    }
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key before '='");
    if (value.empty()) throw ConfigError(where + ": missing value for key '" + std::string(key) + "'");
    const Key* entry = find_key(key);
    if (!entry) throw ConfigError(where + ": unknown config key '" + std::string(key) + "'");
    entry->set(cfg, value, where);
}

namespace {

RunConfig parse_stream(std::istream& in, const std::string& source) {
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        apply_config_line(cfg, line, source + ":" + std::to_string(lineno));
    }
    finalize_config(cfg);
    return cfg;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_stream(in, "config");
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return parse_stream(in, path);
}

void finalize_config(RunConfig& cfg) {
    SpatialConfig& sp = cfg.model.spatial;
    if (cfg.spatial_stages == 0) throw ConfigError("model.spatial_stages must be >= 1");
    if (cfg.spatial_base_width == 0) throw ConfigError("model.spatial_base_width must be >= 1");
    if (cfg.spatial_blocks == 0) throw ConfigError("model.spatial_blocks must be >= 1");
    if (sp.patch_size == 0 || sp.frame_size % sp.patch_size != 0) {
        throw ConfigError("model.frame_size must be a positive multiple of model.patch_size");
    }
    const std::size_t side0 = sp.frame_size / sp.patch_size;
    // Each stage after the first pools 2x2, so the token grid must survive
    // spatial_stages - 1 halvings.
    if (side0 >> (cfg.spatial_stages - 1) == 0 ||
        side0 % (std::size_t{1} << (cfg.spatial_stages - 1)) != 0) {
        throw ConfigError("token grid of side " + std::to_string(side0) + " cannot support " +
                          std::to_string(cfg.spatial_stages) + " pooling stages");
    }
    sp.stages.clear();
    for (std::size_t i = 0; i < cfg.spatial_stages; ++i) {
        SpatialStageConfig stage;
        stage.pool = i == 0 ? 1 : 2;
        stage.width = cfg.spatial_base_width << i;
        stage.global_attention = (i + 1 == cfg.spatial_stages);
        const std::size_t side = side0 >> i;
        stage.mask_unit = stage.global_attention ? 1 : std::max<std::size_t>(1, side / 2);
        stage.blocks = cfg.spatial_blocks;
        sp.stages.push_back(stage);
    }
}

std::string canonical_config_text(const RunConfig& cfg) {
    std::string out;
    for (const Key& k : key_table()) {
        out += k.name;
        out += " = ";
        out += k.get(cfg);
        out += '\n';
    }
    return out;
}

std::uint64_t config_fingerprint(const RunConfig& cfg) {
    const std::string text = canonical_config_text(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
    return std::string(buf);
}

std::vector<std::string> config_key_names() {
    std::vector<std::string> names;
    for (const Key& k : key_table()) names.push_back(k.name);
    return names;
}

void validate_config(const RunConfig& cfg) {
    const TrainConfig& t = cfg.train;
    if (t.lr < 0.0) throw ConfigError("train.lr must be >= 0");
    if (t.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (t.max_epochs == 0) throw ConfigError("train.max_epochs must be >= 1");
    if (t.plateau_patience >= t.max_epochs || t.early_stop_patience >= t.max_epochs) {
        throw ConfigError("train patiences must be smaller than train.max_epochs");
    }

    const DataConfig& d = cfg.data;
    if (d.num_videos == 0) throw ConfigError("data.num_videos must be >= 1");
    if (d.fps == 0) throw ConfigError("data.fps must be >= 1");
    if (d.clip_len <= 0.0 || d.duration < d.clip_len) {
        throw ConfigError("data.duration must cover at least one clip of data.clip_len seconds");
    }
    const double fpc = static_cast<double>(d.fps) * d.clip_len;
    if (fpc != static_cast<double>(static_cast<std::size_t>(fpc))) {
        throw ConfigError("data.fps * data.clip_len must be an integer frame count");
    }
    if (!(d.min_collision > 0.0) || d.min_collision > d.max_collision ||
        d.max_collision > d.duration) {
        throw ConfigError(
            "collision times must satisfy 0 < data.min_collision <= data.max_collision <= "
            "data.duration");
    }
    if (!(d.min_distance > 0.0) || d.min_distance > d.max_distance) {
        throw ConfigError("distances must satisfy 0 < data.min_distance <= data.max_distance");
    }
    if (!(d.min_size > 0.0) || d.min_size > d.max_size) {
        throw ConfigError("object sizes must satisfy 0 < data.min_size <= data.max_size");
    }
    if (d.noise < 0.0) throw ConfigError("data.noise must be >= 0");
    if (d.balance_bins == 0) throw ConfigError("data.balance_bins must be >= 1");
    if (!(d.train_frac > 0.0) || d.val_frac < 0.0 || d.train_frac + d.val_frac > 1.0) {
        throw ConfigError("split fractions must satisfy train_frac > 0, val_frac >= 0, sum <= 1");
    }
    if (d.frame_size != cfg.model.spatial.frame_size) {
        throw ConfigError("data.frame_size (" + std::to_string(d.frame_size) +
                          ") must match model.frame_size (" +
                          std::to_string(cfg.model.spatial.frame_size) + ")");
    }
    if (cfg.model.frame_stride > 0) {
        const std::size_t frames = static_cast<std::size_t>(fpc);
        const std::size_t usable = (frames + cfg.model.frame_stride - 1) / cfg.model.frame_stride;
        if (usable != cfg.model.seq_len) {
            throw ConfigError("clips of " + std::to_string(frames) + " frames at stride " +
                              std::to_string(cfg.model.frame_stride) + " give " +
                              std::to_string(usable) + " embeddings, but model.seq_len is " +
                              std::to_string(cfg.model.seq_len));
        }
    }

    const SeriesConfig& s = cfg.series;
    if (s.sequences == 0 || s.dims == 0) {
        throw ConfigError("series.sequences and series.dims must be >= 1");
    }
    if (s.season_period == 0 || s.length <= 2 * s.season_period) {
        throw ConfigError("series.length must exceed twice series.season_period");
    if (s.chunk < 2 || s.chunk > s.length)
        throw ConfigError("series.chunk must be in [2, series.length]");
    }
}

}  // namespace ttcnet
