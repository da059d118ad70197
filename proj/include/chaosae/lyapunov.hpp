#pragma once

// Largest Lyapunov exponent from divergence curves: twin-trajectory pairs
// (raw or passed through an autoencoder) and a nearest-neighbour estimator
// on delay-embedded scalar series.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "chaosae/csv.hpp"
#include "chaosae/datapipe.hpp"
#include "chaosae/dynamics.hpp"
#include "chaosae/error.hpp"
#include "chaosae/neuralnet.hpp"

namespace chaosae {

/// ln d(i) per step; NaN marks steps where the distance is exactly zero.
struct DivergenceCurve {
    std::vector<double> log_distances;
    double dt = 0.0;
    double initial_separation = 0.0;

    std::size_t size() const { return log_distances.size(); }
    bool usable(std::size_t i) const { return std::isfinite(log_distances[i]); }
};

inline DivergenceCurve divergence_curve(std::span<const double> a, std::span<const double> b, double dt) {
    if (a.size() != b.size()) throw InvalidInput("divergence curve needs series of equal length");
    if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
    DivergenceCurve c;
    c.dt = dt;
    c.initial_separation = a.empty() ? 0.0 : std::abs(a[0] - b[0]);
    c.log_distances.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        c.log_distances[i] = d > 0.0 ? std::log(d) : std::numeric_limits<double>::quiet_NaN();
    }
    return c;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares of y against t = i * dt over usable i in [start, end).
inline LineFit fit_line(std::span<const double> y, double dt, std::size_t start, std::size_t end) {
    end = std::min(end, y.size());
    double n = 0.0, st = 0.0, sy = 0.0;
    for (std::size_t i = start; i < end; ++i) {
        if (!std::isfinite(y[i])) continue;
        n += 1.0;
        st += static_cast<double>(i) * dt;
        sy += y[i];
    }
    if (n < 2.0) throw InvalidInput("fit window [" + std::to_string(start) + ", " + std::to_string(end) +
                                    ") has fewer than two usable points");
    const double mt = st / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = start; i < end; ++i) {
        if (!std::isfinite(y[i])) continue;
        const double dx = static_cast<double>(i) * dt - mt;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mt;
    f.points = static_cast<std::size_t>(n);
    return f;
}

/// Slope of ln d against time over [fit_start, fit_end), per unit time.
inline double fit_lambda(const DivergenceCurve& curve, std::size_t fit_start, std::size_t fit_end) {
    if (fit_start >= fit_end) throw InvalidInput("fit_start must precede fit_end");
    return fit_line(curve.log_distances, curve.dt, fit_start, fit_end).slope;
}

/// Where to fit. Automatic mode starts at `fit_start` (or, with a positive
/// `skip_fraction`, where the curve has climbed that fraction of the way to
/// saturation) and ends at the first step where the mean log divergence has
/// climbed `rise_fraction` of the way from its starting level to saturation.
struct FitPolicy {
    bool automatic = true;
    double rise_fraction = 0.6;
    double skip_fraction = 0.0;
    std::size_t fit_start = 0;
    std::size_t fit_end = 0; // manual mode only

    bool operator==(const FitPolicy&) const = default;
};

struct FitRegion {
    std::size_t start = 0;
    std::size_t end = 0;
};

inline FitRegion choose_fit_region(std::span<const double> mean_curve, double saturation_level, const FitPolicy& policy) {
    if (!policy.automatic) {
        if (policy.fit_start >= policy.fit_end) throw InvalidInput("manual fit region needs fit_start < fit_end");
        return {policy.fit_start, std::min(policy.fit_end, mean_curve.size())};
    }
    if (!(policy.rise_fraction > 0.0 && policy.rise_fraction <= 1.0)) throw InvalidInput("rise_fraction must lie in (0, 1]");
    if (!(policy.skip_fraction >= 0.0 && policy.skip_fraction < policy.rise_fraction))
        throw InvalidInput("skip_fraction must lie in [0, rise_fraction)");
    std::size_t first = policy.fit_start;
    while (first < mean_curve.size() && !std::isfinite(mean_curve[first])) ++first;
    if (first >= mean_curve.size()) throw InvalidInput("divergence curve has no usable points");
    const double base = mean_curve[first];
    const double threshold = base + policy.rise_fraction * (saturation_level - base);
    if (policy.skip_fraction > 0.0) {
        const double skip_level = base + policy.skip_fraction * (saturation_level - base);
        while (first < mean_curve.size() && !(std::isfinite(mean_curve[first]) && mean_curve[first] >= skip_level)) ++first;
        if (first + 1 >= mean_curve.size()) throw InvalidInput("divergence curve never leaves its initial level");
    }
    std::size_t end = mean_curve.size();
    for (std::size_t i = first + 1; i < mean_curve.size(); ++i) {
        if (std::isfinite(mean_curve[i]) && mean_curve[i] > threshold) {
            end = i;
            break;
        }
    }
    return {first, end};
}

/// Pointwise mean of usable entries across curves.
inline std::vector<double> mean_log_divergence(const std::vector<DivergenceCurve>& curves) {
    std::size_t len = 0;
    for (const auto& c : curves) len = std::max(len, c.size());
    std::vector<double> mean(len, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < len; ++i) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& c : curves)
            if (i < c.size() && c.usable(i)) {
                s += c.log_distances[i];
                ++n;
            }
        if (n) mean[i] = s / static_cast<double>(n);
    }
    return mean;
}

struct LLEEstimate {
    double mean_lambda = 0.0; // per time unit
    double std_lambda = 0.0;  // sample std across curves (0 for a single curve)
    std::size_t fit_start = 0;
    std::size_t fit_end = 0;
    std::size_t num_curves = 0;
    std::vector<double> slopes;
    std::vector<double> mean_curve; // mean ln d per step, for plotting
    double dt = 0.0;
};

inline std::pair<double, double> mean_and_sample_std(std::span<const double> v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

/// Fits every curve over one common region chosen on their mean curve.
/// `saturation_level` is the ln-distance plateau used by the automatic policy.
inline LLEEstimate estimate_from_curves(const std::vector<DivergenceCurve>& curves, double saturation_level,
                                        const FitPolicy& policy) {
    if (curves.empty()) throw InvalidInput("no divergence curves to fit");
    LLEEstimate est;
    est.dt = curves.front().dt;
    est.mean_curve = mean_log_divergence(curves);
    const auto region = choose_fit_region(est.mean_curve, saturation_level, policy);
    est.fit_start = region.start;
    est.fit_end = region.end;
    for (const auto& c : curves) est.slopes.push_back(fit_lambda(c, region.start, region.end));
    est.num_curves = curves.size();
    std::tie(est.mean_lambda, est.std_lambda) = mean_and_sample_std(est.slopes);
    return est;
}

/// Twin-pair estimate from already-built coordinate series pairs. The
/// saturation level is the mean ln(max - min) of the first series of each pair.
inline LLEEstimate lle_from_pairs(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs, double dt,
                                  const FitPolicy& policy) {
    std::vector<DivergenceCurve> curves;
    double sat = 0.0;
    for (const auto& [a, b] : pairs) {
        curves.push_back(divergence_curve(a, b, dt));
        auto [lo, hi] = std::minmax_element(a.begin(), a.end());
        sat += std::log(std::max(*hi - *lo, std::numeric_limits<double>::min()));
    }
    sat /= static_cast<double>(std::max<std::size_t>(1, pairs.size()));
    return estimate_from_curves(curves, sat, policy);
}

struct LLESettings {
    std::size_t repeats = 10;
    double displacement = 1e-7;
    FitPolicy fit;
    bool operator==(const LLESettings&) const = default;
};

/// M twin pairs from distinct seeded attractor points, displaced and measured on `coordinate`.
inline LLEEstimate lle_estimate(const SystemSpec& spec, std::size_t coordinate, const IntegrationConfig& cfg,
                                const LLESettings& s) {
    if (s.repeats < 1) throw InvalidInput("repeats must be >= 1");
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (std::size_t r = 0; r < s.repeats; ++r) {
        auto [a, b] = twin_trajectories(spec, cfg, s.displacement, coordinate, r + 1);
        pairs.emplace_back(a.coordinate(coordinate), b.coordinate(coordinate));
    }
    return lle_from_pairs(pairs, cfg.dt, s.fit);
}

/// As lle_estimate, but both twin series go through reconstruct_series first.
/// `coordinate_norm` replaces the model's normalization when the measured
/// coordinate differs from the one the model was trained on.
inline LLEEstimate lle_of_reconstructed(const AutoencoderModel& model, const SystemSpec& spec, std::size_t coordinate,
                                        const IntegrationConfig& cfg, const LLESettings& s, std::size_t stride,
                                        std::optional<NormParams> coordinate_norm = std::nullopt) {
    if (s.repeats < 1) throw InvalidInput("repeats must be >= 1");
    AutoencoderModel m = model;
    if (coordinate_norm) m.norm = *coordinate_norm;
    const auto w = m.window_size();
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (std::size_t r = 0; r < s.repeats; ++r) {
        auto [a, b] = twin_trajectories(spec, cfg, s.displacement, coordinate, r + 1);
        pairs.emplace_back(reconstruct_series(m, a.coordinate(coordinate), w, stride),
                           reconstruct_series(m, b.coordinate(coordinate), w, stride));
    }
    return lle_from_pairs(pairs, cfg.dt, s.fit);
}

struct RosensteinConfig {
    EmbeddingConfig embedding{7, 1};
    std::size_t theiler_window = 50;
    std::size_t horizon = 1000;              // steps each neighbour pair is followed
    std::size_t max_reference_points = 2000; // evenly subsampled
    std::size_t segments = 5;                // groups of reference points used for the std
    FitPolicy fit{true, 0.8, 0.3};
};

/// Nearest-neighbour divergence on the delay embedding: each reference point is
/// paired with its closest point more than `theiler_window` steps away and the
/// pair is followed forward. The slope comes from the mean ln d curve; the std
/// from per-segment mean curves fitted over the same region.
inline LLEEstimate rosenstein_nn_estimate(std::span<const double> series, double dt, const RosensteinConfig& cfg) {
    if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
    if (cfg.horizon < 2) throw InvalidInput("horizon must be >= 2");
    const Matrix x = delay_embed(series, cfg.embedding);
    const auto rows = static_cast<std::size_t>(x.rows());
    if (rows <= cfg.horizon + cfg.theiler_window + 1) throw InvalidInput("series too short for the requested horizon");
    const std::size_t usable = rows - cfg.horizon;
    const std::size_t n_ref = std::min(cfg.max_reference_points, usable);

    std::vector<std::vector<double>> logs; // per pair ln d_j(i)
    for (std::size_t r = 0; r < n_ref; ++r) {
        const std::size_t j = r * usable / n_ref;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_k = usable;
        for (std::size_t k = 0; k < usable; ++k) {
            if ((j > k ? j - k : k - j) <= cfg.theiler_window) continue;
            const double d = (x.row(static_cast<Eigen::Index>(j)) - x.row(static_cast<Eigen::Index>(k))).squaredNorm();
            if (d > 0.0 && d < best) {
                best = d;
                best_k = k;
            }
        }
        if (best_k == usable) continue;
        std::vector<double> l(cfg.horizon);
        for (std::size_t i = 0; i < cfg.horizon; ++i) {
            const double d = (x.row(static_cast<Eigen::Index>(j + i)) - x.row(static_cast<Eigen::Index>(best_k + i))).norm();
            l[i] = d > 0.0 ? std::log(d) : std::numeric_limits<double>::quiet_NaN();
        }
        logs.push_back(std::move(l));
    }
    if (logs.empty()) throw InvalidInput("no valid nearest-neighbour pairs");

    auto mean_of = [&](std::size_t from, std::size_t to) {
        std::vector<DivergenceCurve> group;
        for (std::size_t p = from; p < to; ++p) group.push_back({logs[p], dt, 0.0});
        return mean_log_divergence(group);
    };

    LLEEstimate est;
    est.dt = dt;
    est.num_curves = logs.size();
    est.mean_curve = mean_of(0, logs.size());
    double sat = -std::numeric_limits<double>::infinity();
    for (double v : est.mean_curve)
        if (std::isfinite(v)) sat = std::max(sat, v);
    const auto region = choose_fit_region(est.mean_curve, sat, cfg.fit);
    est.fit_start = region.start;
    est.fit_end = region.end;
    est.mean_lambda = fit_line(est.mean_curve, dt, region.start, region.end).slope;

    const std::size_t segs = std::clamp<std::size_t>(cfg.segments, 1, logs.size());
    for (std::size_t s = 0; s < segs; ++s) {
        const auto seg_curve = mean_of(s * logs.size() / segs, (s + 1) * logs.size() / segs);
        est.slopes.push_back(fit_line(seg_curve, dt, region.start, region.end).slope);
    }
    est.std_lambda = mean_and_sample_std(est.slopes).second;
    return est;
}

/// One row of an LLE table in long form.
struct LLERow {
    std::string system;
    std::string sequence;      // "input" or "reconstructed"
    std::string alpha_or_w;    // empty for input rows
    std::string coordinate;    // label as printed, e.g. "x" or "19"
    std::optional<LLEEstimate> estimate;
};

/// `system,sequence,alpha_or_W,coordinate,lle_mean,lle_std,fit_start,fit_end,M`.
inline void write_lle_csv(std::ostream& os, const std::vector<LLERow>& rows) {
    os << "system,sequence,alpha_or_W,coordinate,lle_mean,lle_std,fit_start,fit_end,M\n";
    for (const auto& r : rows) {
        os << r.system << ',' << r.sequence << ',' << r.alpha_or_w << ',' << r.coordinate << ',';
        if (r.estimate)
            os << csv::format_double(r.estimate->mean_lambda) << ',' << csv::format_double(r.estimate->std_lambda) << ','
               << r.estimate->fit_start << ',' << r.estimate->fit_end << ',' << r.estimate->num_curves;
        else
            os << "nan,nan,,,";
        os << '\n';
    }
}

} // namespace chaosae
