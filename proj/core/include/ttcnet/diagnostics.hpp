// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "ttcnet/tensor.hpp"

namespace ttcnet {

// Complementary stationarity tests over embedding-sequence dimensions. The
// unit-root test asks "is there strong evidence against a stochastic trend?"
// (small p: the series looks stationary); the level-stationarity test asks
// the reverse question (small p: the series does not look level-stationary).
// Running both before and after per-sequence normalization quantifies how
// much non-stationarity the normalization removes.

struct UnitRootResult {
    double stat = 0.0;
    double p = 0.0;
    std::size_t lags = 0;  ///< chosen lag order / kernel bandwidth
};

/// Augmented unit-root regression with a constant and no deterministic
/// trend: dy_t = a + g*y_{t-1} + sum_i f_i*dy_{t-i} + e_t. The statistic is
/// the t-ratio of g; its p-value comes from linear interpolation of
/// tabulated quantiles of the constant-case asymptotic distribution
/// (clamped to [1e-4, 0.9999]). The lag order is chosen by minimum AIC over
/// 0..max_lag with all candidates fit on a common sample, then the reported
/// regression is refit on the longest sample the chosen lag allows.
/// Requires n >= 20; constant input raises NumericError.
UnitRootResult adf_test(const std::vector<double>& y, std::size_t max_lag);

/// As above with the conventional data-driven cap
/// max_lag = floor(12 * (n/100)^(1/4)), reduced if the sample cannot
/// support it.
UnitRootResult adf_test(const std::vector<double>& y);

/// Level-stationarity statistic: n^{-2} * sum of squared partial sums of the
/// demeaned series over its Bartlett-kernel long-run variance. p-values are
/// interpolated from the tabulated critical points
/// {0.347: 0.10, 0.463: 0.05, 0.574: 0.025, 0.739: 0.01} and therefore
/// always reported inside [0.01, 0.10]. Requires n >= 20; constant input
/// (zero long-run variance) raises NumericError.
UnitRootResult kpss_test(const std::vector<double>& y, std::size_t bandwidth);

/// As above with bandwidth = floor(4 * (n/100)^(1/4)).
UnitRootResult kpss_test(const std::vector<double>& y);

struct DimDiagnostics {
    UnitRootResult adf_raw, kpss_raw;
    UnitRootResult adf_norm, kpss_norm;
};

struct StationarityReport {
    std::vector<DimDiagnostics> dims;  ///< one entry per embedding dimension
    DimDiagnostics median;             ///< field-wise median over dimensions
};

/// Maps one [n, d] sequence to its normalized form.
using Normalizer = std::function<Tensor(const Tensor&)>;

/// Run both tests per dimension over a set of embedding sequences, raw and
/// normalized. Sequences are normalized individually, then concatenated
/// along time per dimension for testing — normalization that aligns the
/// sequences' levels and scales makes the concatenation more stationary,
/// which is exactly the effect being measured. An empty normalizer means
/// identity (both column groups then match).
StationarityReport stationarity_report(const std::vector<Tensor>& sequences,
                                       const Normalizer& normalizer);

/// Default normalizer: per-sequence standardization (normalize()).
StationarityReport stationarity_report(const std::vector<Tensor>& sequences);

/// CSV table: one row per dimension plus a final "median" row.
void write_report_csv(std::ostream& os, const StationarityReport& report);

/// Aligned human-readable table of the same numbers.
void write_report_text(std::ostream& os, const StationarityReport& report);

}  // namespace ttcnet
