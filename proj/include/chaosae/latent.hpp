#pragma once

// Effective latent dimension: active-node counting and the regularization /
// window-size sweeps.

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaosae/datapipe.hpp"
#include "chaosae/error.hpp"
#include "chaosae/neuralnet.hpp"

namespace chaosae {

/// Number of components with |value| > alpha (strict).
inline std::size_t count_active(std::span<const double> latent, double alpha) {
    if (!(alpha >= 0.0)) throw InvalidInput("alpha must be >= 0");
    std::size_t n = 0;
    for (double v : latent)
        if (std::abs(v) > alpha) ++n;
    return n;
}

struct LatentStats {
    double mean_active_nodes = 0.0;
    double std_active_nodes = 0.0; // population std over windows
    double test_loss = 0.0;        // MSE + L1
    double test_mse = 0.0;
    double alpha = 0.0;
    std::size_t window_size = 0;
};

inline LatentStats latent_stats(const AutoencoderModel& model, const WindowedDataset& test_set, double alpha) {
    if (test_set.window_size != model.window_size()) throw InvalidInput("test set window size does not match the model");
    if (test_set.size() == 0) throw InvalidInput("empty test set");
    constexpr Eigen::Index chunk = 4096;
    double sum = 0.0, sum_sq = 0.0, sq_err = 0.0, l1 = 0.0;
    for (Eigen::Index s = 0; s < test_set.windows.rows(); s += chunk) {
        const Eigen::Index n = std::min(chunk, test_set.windows.rows() - s);
        Matrix part = test_set.windows.middleRows(s, n);
        auto r = forward(model, part);
        sq_err += (part - r.output).squaredNorm();
        l1 += r.latent.cwiseAbs().sum();
        for (Eigen::Index i = 0; i < n; ++i) {
            const RowVector row = r.latent.row(i);
            const auto c = static_cast<double>(count_active({row.data(), static_cast<std::size_t>(row.size())}, alpha));
            sum += c;
            sum_sq += c * c;
        }
    }
    const double rows = static_cast<double>(test_set.size());
    LatentStats st;
    st.mean_active_nodes = sum / rows;
    st.std_active_nodes = std::sqrt(std::max(0.0, sum_sq / rows - st.mean_active_nodes * st.mean_active_nodes));
    st.test_mse = sq_err / (rows * static_cast<double>(test_set.window_size));
    st.test_loss = st.test_mse + alpha * l1 / rows;
    st.alpha = alpha;
    st.window_size = test_set.window_size;
    return st;
}

/// Shared inputs of a sweep: the physical-units training series and fixed settings.
struct SweepSetup {
    std::vector<double> series;
    std::size_t source_coordinate = 0;
    std::size_t window_size = 30;
    std::size_t train_stride = 1;
    double train_fraction = 0.8;
    TrainConfig train;
    Activation output_activation = Activation::linear;
};

struct SweepCell {
    double parameter = 0.0; // alpha or W
    std::optional<LatentStats> stats;
    std::optional<AutoencoderModel> model;
    TrainReport report;
    std::vector<LayerSpec> layout;
    std::string error; // non-empty when the cell failed
};

using CellCallback = std::function<void(std::size_t, const SweepCell&)>;

/// Trains one fresh model at (W, alpha) and reads out its latent statistics.
inline SweepCell run_cell(const SweepSetup& setup, std::size_t w, double alpha, double parameter) {
    SweepCell cell;
    cell.parameter = parameter;
    try {
        auto data = prepare_training_data(setup.series, w, setup.train_stride, setup.train_fraction, setup.source_coordinate);
        cell.layout = default_layout(w, 10, setup.output_activation);
        auto model = make_model(cell.layout, 2, setup.train.seed, data.train.norm);
        TrainConfig cfg = setup.train;
        cfg.alpha = alpha;
        auto [trained, report] = train(std::move(model), data.train, data.test, cfg);
        cell.stats = latent_stats(trained, data.test, alpha);
        cell.model = std::move(trained);
        cell.report = std::move(report);
    } catch (const Error& e) {
        cell.error = e.what();
    }
    return cell;
}

inline std::vector<SweepCell> sweep_alpha(const SweepSetup& setup, std::span<const double> alphas,
                                          const CellCallback& on_cell = {}) {
    if (alphas.empty()) throw ConfigError("alpha grid is empty");
    std::vector<SweepCell> cells;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        cells.push_back(run_cell(setup, setup.window_size, alphas[i], alphas[i]));
        if (on_cell) on_cell(i, cells.back());
    }
    return cells;
}

/// Hidden widths scale as round(22 W / 30) and round(15 W / 30); latent width stays 10.
inline std::vector<SweepCell> sweep_window(const SweepSetup& setup, std::span<const std::size_t> windows,
                                           const CellCallback& on_cell = {}) {
    if (windows.empty()) throw ConfigError("window grid is empty");
    for (auto w : windows)
        if (w < 2) throw ConfigError("window sizes must be >= 2");
    std::vector<SweepCell> cells;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        cells.push_back(run_cell(setup, windows[i], setup.train.alpha, static_cast<double>(windows[i])));
        if (on_cell) on_cell(i, cells.back());
    }
    return cells;
}

/// `alpha_or_W,mean_active,std_active,test_mse,test_total_loss`; failed cells carry nan.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
    os << "alpha_or_W,mean_active,std_active,test_mse,test_total_loss\n";
    for (const auto& c : cells) {
        os << csv::format_double(c.parameter);
        if (c.stats)
            os << ',' << csv::format_double(c.stats->mean_active_nodes) << ',' << csv::format_double(c.stats->std_active_nodes)
               << ',' << csv::format_double(c.stats->test_mse) << ',' << csv::format_double(c.stats->test_loss);
        else
            os << ",nan,nan,nan,nan";
        os << '\n';
    }
}

} // namespace chaosae
