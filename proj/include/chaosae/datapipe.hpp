#pragma once

// Series preparation: min-max normalization, train/test split, sliding
// windows, delay embedding, and overlap-averaged stitching.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "chaosae/csv.hpp"
#include "chaosae/error.hpp"
#include "chaosae/types.hpp"

namespace chaosae {

struct NormParams {
    double min = 0.0;
    double max = 1.0;

    void validate() const {
        if (!(max > min) || !std::isfinite(min) || !std::isfinite(max))
            throw InvalidInput("NormParams needs finite max > min");
    }
    double apply(double x) const { return (x - min) / (max - min); }
    double invert(double y) const { return y * (max - min) + min; }

    bool operator==(const NormParams&) const = default;
};

inline std::pair<std::vector<double>, NormParams> normalize(std::span<const double> series) {
    if (series.empty()) throw DegenerateInput("cannot normalize an empty series");
    auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    NormParams norm{*lo, *hi};
    if (!(norm.max > norm.min)) throw DegenerateInput("cannot normalize a constant series");
    std::vector<double> out(series.size());
    std::transform(series.begin(), series.end(), out.begin(), [&](double x) { return norm.apply(x); });
    return {std::move(out), norm};
}

inline std::vector<double> normalize_with(std::span<const double> series, const NormParams& norm) {
    norm.validate();
    std::vector<double> out(series.size());
    std::transform(series.begin(), series.end(), out.begin(), [&](double x) { return norm.apply(x); });
    return out;
}

inline std::vector<double> denormalize(std::span<const double> series, const NormParams& norm) {
    norm.validate();
    std::vector<double> out(series.size());
    std::transform(series.begin(), series.end(), out.begin(), [&](double y) { return norm.invert(y); });
    return out;
}

/// Contiguous prefix of floor(train_fraction * N) points, remainder as test.
inline std::pair<std::vector<double>, std::vector<double>> split(std::span<const double> series, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidInput("train_fraction must lie in (0, 1)");
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(series.size())));
    if (n_train == 0 || n_train == series.size()) throw InvalidInput("split leaves an empty segment");
    return {std::vector<double>(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(n_train)),
            std::vector<double>(series.begin() + static_cast<std::ptrdiff_t>(n_train), series.end())};
}

struct WindowedDataset {
    Matrix windows; // num_windows x W
    std::size_t window_size = 0;
    std::size_t stride = 1;
    NormParams norm;
    std::size_t source_coordinate = 0;

    std::size_t size() const { return static_cast<std::size_t>(windows.rows()); }
};

inline std::size_t window_count(std::size_t length, std::size_t w, std::size_t stride) {
    return (length - w) / stride + 1;
}

/// Window k covers [k*stride, k*stride + W).
inline WindowedDataset make_windows(std::span<const double> series, std::size_t w, std::size_t stride,
                                    NormParams norm = {}, std::size_t source_coordinate = 0) {
    if (w == 0) throw InvalidInput("window size must be >= 1");
    if (stride == 0) throw InvalidInput("stride must be >= 1");
    if (w > series.size())
        throw InvalidInput("window size " + std::to_string(w) + " exceeds series length " + std::to_string(series.size()));
    WindowedDataset ds;
    ds.window_size = w;
    ds.stride = stride;
    ds.norm = norm;
    ds.source_coordinate = source_coordinate;
    const auto k = window_count(series.size(), w, stride);
    ds.windows.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(w));
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < w; ++c)
            ds.windows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = series[r * stride + c];
    return ds;
}

struct EmbeddingConfig {
    std::size_t m = 7;
    std::size_t tau = 1;

    void validate() const {
        if (m < 1) throw InvalidInput("embedding dimension must be >= 1");
        if (tau < 1) throw InvalidInput("time lag must be >= 1");
    }
    bool operator==(const EmbeddingConfig&) const = default;
};

/// Row i is [x_i, x_{i+tau}, ..., x_{i+(m-1)tau}]; N - (m-1)tau rows.
inline Matrix delay_embed(std::span<const double> series, const EmbeddingConfig& cfg) {
    cfg.validate();
    const std::size_t span_len = (cfg.m - 1) * cfg.tau;
    if (series.size() <= span_len)
        throw InvalidInput("series of length " + std::to_string(series.size()) + " too short for embedding");
    const std::size_t rows = series.size() - span_len;
    Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cfg.m));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < cfg.m; ++k)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = series[i + k * cfg.tau];
    return out;
}

/// Places window r at offset starts[r] in a series of `length` points; positions
/// covered by several windows get the mean of all covering values.
inline std::vector<double> stitch_at(const Matrix& windows, std::span<const std::size_t> starts, std::size_t length) {
    if (windows.rows() == 0) throw InvalidInput("cannot stitch zero windows");
    if (starts.size() != static_cast<std::size_t>(windows.rows())) throw InvalidInput("one start offset per window");
    const auto w = static_cast<std::size_t>(windows.cols());
    std::vector<double> sum(length, 0.0);
    std::vector<std::size_t> count(length, 0);
    for (std::size_t r = 0; r < starts.size(); ++r) {
        if (starts[r] + w > length) throw InvalidInput("window extends beyond the stitched length");
        for (std::size_t c = 0; c < w; ++c) {
            sum[starts[r] + c] += windows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            ++count[starts[r] + c];
        }
    }
    for (std::size_t i = 0; i < length; ++i) {
        if (count[i] == 0) throw InvalidInput("stitch leaves position " + std::to_string(i) + " uncovered");
        sum[i] /= static_cast<double>(count[i]);
    }
    return sum;
}

inline std::vector<double> stitch(const Matrix& windows, std::size_t stride) {
    if (windows.rows() == 0) throw InvalidInput("cannot stitch zero windows");
    if (stride == 0) throw InvalidInput("stride must be >= 1");
    const auto k = static_cast<std::size_t>(windows.rows());
    std::vector<std::size_t> starts(k);
    for (std::size_t r = 0; r < k; ++r) starts[r] = r * stride;
    return stitch_at(windows, starts, (k - 1) * stride + static_cast<std::size_t>(windows.cols()));
}

struct PreparedData {
    WindowedDataset train;
    WindowedDataset test;
};

/// Normalizes the whole series, splits it in temporal order, then windows each part.
inline PreparedData prepare_training_data(std::span<const double> series, std::size_t w, std::size_t stride,
                                          double train_fraction = 0.8, std::size_t source_coordinate = 0) {
    auto [normalized, norm] = normalize(series);
    auto [train, test] = split(normalized, train_fraction);
    return {make_windows(train, w, stride, norm, source_coordinate), make_windows(test, w, stride, norm, source_coordinate)};
}

// Dataset persistence: one window per CSV row plus a JSON sidecar.

inline nlohmann::json dataset_sidecar(const WindowedDataset& ds) {
    return {{"W", ds.window_size},
            {"stride", ds.stride},
            {"norm", {{"min", ds.norm.min}, {"max", ds.norm.max}}},
            {"source_coordinate", ds.source_coordinate}};
}

inline void write_dataset(const WindowedDataset& ds, const std::string& csv_path, const std::string& json_path) {
    {
        auto os = csv::open_out(csv_path);
        for (Eigen::Index r = 0; r < ds.windows.rows(); ++r) {
            for (Eigen::Index c = 0; c < ds.windows.cols(); ++c) {
                if (c) os << ',';
                os << csv::format_double(ds.windows(r, c));
            }
            os << '\n';
        }
        if (!os) throw IoError("write failed for '" + csv_path + "'");
    }
    auto js = csv::open_out(json_path);
    js << dataset_sidecar(ds).dump(2) << '\n';
}

inline WindowedDataset read_dataset(const std::string& csv_path, const std::string& json_path) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(csv::read_file(json_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("dataset sidecar: ") + e.what(), e.byte);
    }
    WindowedDataset ds;
    try {
        ds.window_size = meta.at("W").get<std::size_t>();
        ds.stride = meta.at("stride").get<std::size_t>();
        ds.norm = {meta.at("norm").at("min").get<double>(), meta.at("norm").at("max").get<double>()};
        ds.source_coordinate = meta.at("source_coordinate").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset sidecar: ") + e.what(), 0);
    }
    std::istringstream is(csv::read_file(csv_path));
    std::string line;
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = csv::split_fields(line);
        if (f.size() != ds.window_size) throw InvalidInput("dataset row " + std::to_string(rows) + " has wrong width");
        for (auto v : f) values.push_back(csv::parse_double(v));
        ++rows;
    }
    ds.windows = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(ds.window_size));
    return ds;
}

} // namespace chaosae
