// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "ttcnet/csv.hpp"
#include "ttcnet/errors.hpp"
#include "ttcnet/stationarity.hpp"

namespace ttcnet {

namespace {

constexpr std::size_t kMinSamples = 20;

void check_series(const std::vector<double>& y, const char* what) {
    if (y.size() < kMinSamples) {
        throw InputError(std::string(what) + ": need at least " + std::to_string(kMinSamples) +
                         " observations, got " + std::to_string(y.size()));
    }
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*lo == *hi) {
        throw NumericError(std::string(what) + ": series is constant");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite input");
    }
}

struct Anchor {
    double stat;
    double p;
};

// Asymptotic quantiles of the studentized unit-root statistic in the
// constant-only regression (classic Dickey-Fuller tables): stat -> p.
constexpr Anchor kAdfAnchors[] = {
    {-3.43, 0.010}, {-3.12, 0.025}, {-2.86, 0.050}, {-2.57, 0.100}, {-1.57, 0.500},
    {-0.44, 0.900}, {-0.07, 0.950}, {0.23, 0.975},  {0.60, 0.990},
};

// Tabulated critical points of the level-stationarity statistic.
constexpr Anchor kKpssAnchors[] = {
    {0.347, 0.100},
    {0.463, 0.050},
    {0.574, 0.025},
    {0.739, 0.010},
};

double interpolate_p(double stat, const Anchor* anchors, std::size_t n, double p_lo,
                     double p_hi) {
    // Anchors are ordered by stat; p may run in either direction.
    if (stat <= anchors[0].stat) {
        // Extrapolate along the first segment, clamped.
        const double slope =
            (anchors[1].p - anchors[0].p) / (anchors[1].stat - anchors[0].stat);
        return std::clamp(anchors[0].p + slope * (stat - anchors[0].stat), p_lo, p_hi);
    }
    if (stat >= anchors[n - 1].stat) {
        const double slope = (anchors[n - 1].p - anchors[n - 2].p) /
                             (anchors[n - 1].stat - anchors[n - 2].stat);
        return std::clamp(anchors[n - 1].p + slope * (stat - anchors[n - 1].stat), p_lo, p_hi);
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (stat <= anchors[i].stat) {
            const double f = (stat - anchors[i - 1].stat) / (anchors[i].stat - anchors[i - 1].stat);
            return std::clamp(anchors[i - 1].p + f * (anchors[i].p - anchors[i - 1].p), p_lo,
                              p_hi);
        }
    }
    return p_hi;
}

struct OlsFit {
    double gamma_t = 0.0;  // t-ratio of the lagged-level coefficient
    double ssr = 0.0;
    Eigen::Index nobs = 0;
};

// Regression dy_t = a + g y_{t-1} + sum f_i dy_{t-i}, over delta indices
// [first_row, n-2]. Column 1 holds the lagged level.
OlsFit adf_ols(const std::vector<double>& y, const std::vector<double>& dy, std::size_t lag,
               std::size_t first_row, bool want_t) {
    const std::size_t rows = dy.size() - first_row;
    const std::size_t cols = 2 + lag;
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd b(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = first_row + r;  // index into dy
        X(r, 0) = 1.0;
        X(r, 1) = y[t];  // level entering dy_t = y[t+1] - y[t]
        for (std::size_t i = 1; i <= lag; ++i) X(r, 1 + i) = dy[t - i];
        b(r) = dy[t];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < static_cast<Eigen::Index>(cols)) {
        throw NumericError("unit-root regression is degenerate (collinear design)");
    }
    Eigen::VectorXd coef = qr.solve(b);
    Eigen::VectorXd resid = b - X * coef;
    OlsFit fit;
    fit.ssr = resid.squaredNorm();
    fit.nobs = static_cast<Eigen::Index>(rows);
    if (want_t) {
        const std::size_t dof = rows - cols;
        if (dof == 0) throw NumericError("unit-root regression has no residual degrees of freedom");
        const double sigma2 = fit.ssr / static_cast<double>(dof);
        Eigen::MatrixXd xtx_inv =
            (X.transpose() * X).fullPivLu().inverse();
        const double se = std::sqrt(sigma2 * xtx_inv(1, 1));
        if (!(se > 0.0) || !std::isfinite(se)) {
            throw NumericError("unit-root regression produced a degenerate standard error");
        }
        fit.gamma_t = coef(1) / se;
    }
    return fit;
}

std::size_t default_adf_maxlag(std::size_t n) {
    std::size_t lag = static_cast<std::size_t>(
        12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25));
    // Keep enough observations to fit the largest candidate with slack.
    while (lag > 0 && (n - 1) < 2 * lag + 6) --lag;
    return lag;
}

}  // namespace

UnitRootResult adf_test(const std::vector<double>& y, std::size_t max_lag) {
    check_series(y, "adf_test");
    const std::size_t n = y.size();
    if ((n - 1) < max_lag + 4) {
        throw InputError("adf_test: series too short for max_lag " + std::to_string(max_lag));
    }
    std::vector<double> dy(n - 1);
    for (std::size_t t = 0; t + 1 < n; ++t) dy[t] = y[t + 1] - y[t];

    // Lag order by minimum AIC, every candidate fit on the sample the
    // longest lag allows so the criteria are comparable.
    std::size_t best_lag = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        OlsFit fit = adf_ols(y, dy, lag, max_lag, /*want_t=*/false);
        const double nobs = static_cast<double>(fit.nobs);
        const double aic = nobs * std::log(fit.ssr / nobs) + 2.0 * static_cast<double>(lag + 2);
        if (aic < best_aic) {
            best_aic = aic;
            best_lag = lag;
        }
    }

    OlsFit fit = adf_ols(y, dy, best_lag, best_lag, /*want_t=*/true);
    UnitRootResult out;
    out.stat = fit.gamma_t;
    out.lags = best_lag;
    out.p = interpolate_p(out.stat, kAdfAnchors, std::size(kAdfAnchors), 1e-4, 0.9999);
    return out;
}

UnitRootResult adf_test(const std::vector<double>& y) {
    check_series(y, "adf_test");
    return adf_test(y, default_adf_maxlag(y.size()));
}

UnitRootResult kpss_test(const std::vector<double>& y, std::size_t bandwidth) {
    check_series(y, "kpss_test");
    const std::size_t n = y.size();
    if (bandwidth >= n) throw InputError("kpss_test: bandwidth must be smaller than the series");

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> e(n);
    for (std::size_t t = 0; t < n; ++t) e[t] = y[t] - mean;

    double cum = 0.0, s2_sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        cum += e[t];
        s2_sum += cum * cum;
    }
    const double eta = s2_sum / (static_cast<double>(n) * static_cast<double>(n));

    double lrv = 0.0;
    for (double v : e) lrv += v * v;
    lrv /= static_cast<double>(n);
    for (std::size_t j = 1; j <= bandwidth; ++j) {
        double gamma = 0.0;
        for (std::size_t t = j; t < n; ++t) gamma += e[t] * e[t - j];
        gamma /= static_cast<double>(n);
        lrv += 2.0 * (1.0 - static_cast<double>(j) / (static_cast<double>(bandwidth) + 1.0)) *
               gamma;
    }
    if (!(lrv > 0.0)) {
        throw NumericError("kpss_test: long-run variance is not positive");
    }

    UnitRootResult out;
    out.stat = eta / lrv;
    out.lags = bandwidth;
    out.p = interpolate_p(out.stat, kKpssAnchors, std::size(kKpssAnchors), 0.01, 0.10);
    return out;
}

UnitRootResult kpss_test(const std::vector<double>& y) {
    check_series(y, "kpss_test");
    const std::size_t bw = static_cast<std::size_t>(
        4.0 * std::pow(static_cast<double>(y.size()) / 100.0, 0.25));
    return kpss_test(y, std::min(bw, y.size() - 1));
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return (v[n / 2 - 1] + hi) / 2.0;
}

UnitRootResult median_result(const std::vector<DimDiagnostics>& dims,
                             UnitRootResult DimDiagnostics::* field) {
    std::vector<double> stats, ps;
    for (const DimDiagnostics& d : dims) {
        stats.push_back((d.*field).stat);
        ps.push_back((d.*field).p);
    }
    UnitRootResult out;
    out.stat = median_of(stats);
    out.p = median_of(ps);
    out.lags = (dims.front().*field).lags;
    return out;
}

}  // namespace

StationarityReport stationarity_report(const std::vector<Tensor>& sequences,
                                       const Normalizer& normalizer) {
    if (sequences.empty()) throw InputError("stationarity_report: no sequences");
    for (const Tensor& s : sequences) {
        if (!s.defined() || s.rank() != 2) {
            throw DimensionError("stationarity_report: sequences must be [n, d] tensors");
        }
        if (s.dim(1) != sequences.front().dim(1)) {
            throw DimensionError("stationarity_report: sequences disagree on dimension count");
        }
    }
    const std::size_t d = sequences.front().dim(1);

    std::vector<Tensor> normalized;
    normalized.reserve(sequences.size());
    for (const Tensor& s : sequences) {
        normalized.push_back(normalizer ? normalizer(s) : s);
    }

    auto column = [](const std::vector<Tensor>& seqs, std::size_t c) {
        std::vector<double> out;
        for (const Tensor& s : seqs) {
            const std::size_t n = s.dim(0), dd = s.dim(1);
            for (std::size_t t = 0; t < n; ++t) out.push_back(s.data()[t * dd + c]);
        }
        return out;
    };

    StationarityReport report;
    for (std::size_t c = 0; c < d; ++c) {
        DimDiagnostics dd;
        const std::vector<double> raw = column(sequences, c);
        const std::vector<double> norm = column(normalized, c);
        dd.adf_raw = adf_test(raw);
        dd.kpss_raw = kpss_test(raw);
        dd.adf_norm = adf_test(norm);
        dd.kpss_norm = kpss_test(norm);
        report.dims.push_back(dd);
    }
    report.median.adf_raw = median_result(report.dims, &DimDiagnostics::adf_raw);
    report.median.kpss_raw = median_result(report.dims, &DimDiagnostics::kpss_raw);
    report.median.adf_norm = median_result(report.dims, &DimDiagnostics::adf_norm);
    report.median.kpss_norm = median_result(report.dims, &DimDiagnostics::kpss_norm);
    return report;
}

StationarityReport stationarity_report(const std::vector<Tensor>& sequences) {
    return stationarity_report(sequences,
                               [](const Tensor& z) { return normalize(z).first; });
}

namespace {

std::vector<std::string> report_row(const std::string& label, const DimDiagnostics& d) {
    return {label,
            format_double(d.adf_raw.stat),
            format_double(d.adf_raw.p),
            format_double(d.kpss_raw.stat),
            format_double(d.kpss_raw.p),
            format_double(d.adf_norm.stat),
            format_double(d.adf_norm.p),
            format_double(d.kpss_norm.stat),
            format_double(d.kpss_norm.p)};
}

}  // namespace

void write_report_csv(std::ostream& os, const StationarityReport& report) {
    write_csv_row(os, {"dim", "adf_stat_raw", "adf_p_raw", "kpss_stat_raw", "kpss_p_raw",
                       "adf_stat_norm", "adf_p_norm", "kpss_stat_norm", "kpss_p_norm"});
    for (std::size_t c = 0; c < report.dims.size(); ++c) {
        write_csv_row(os, report_row(std::to_string(c), report.dims[c]));
    }
    write_csv_row(os, report_row("median", report.median));
}

void write_report_text(std::ostream& os, const StationarityReport& report) {
    auto line = [&os](const std::string& label, const DimDiagnostics& d) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "%-8s %10.4f %8.4f %10.4f %8.4f   %10.4f %8.4f %10.4f %8.4f\n",
                      label.c_str(), d.adf_raw.stat, d.adf_raw.p, d.kpss_raw.stat, d.kpss_raw.p,
                      d.adf_norm.stat, d.adf_norm.p, d.kpss_norm.stat, d.kpss_norm.p);
        os << buf;
    };
    os << "                ----------- raw -----------   -------- normalized --------\n";
    os << "dim        adf_stat    adf_p  kpss_stat   kpss_p     adf_stat    adf_p  kpss_stat"
          "   kpss_p\n";
    for (std::size_t c = 0; c < report.dims.size(); ++c) {
        line(std::to_string(c), report.dims[c]);
    }
    line("median", report.median);
}

}  // namespace ttcnet
