#pragma once

// Dense autoencoder with explicit backpropagation, Adam, Xavier-uniform
// initialization and an L1 activity penalty on the latent layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "chaosae/csv.hpp"
#include "chaosae/datapipe.hpp"
#include "chaosae/error.hpp"
#include "chaosae/types.hpp"

namespace chaosae {

enum class Activation { sigmoid, relu, linear };

inline std::string to_string(Activation a) {
    switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::linear: return "linear";
    }
    return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    throw InvalidInput("unknown activation '" + s + "'");
}

template <class Derived>
Matrix activate(const Eigen::MatrixBase<Derived>& z, Activation a) {
    switch (a) {
    case Activation::sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::linear: break;
    }
    return z;
}

/// d activation / dz, written in terms of the pre-activation `z` and output `a`.
/// The relu subgradient at z == 0 is 0.
inline Matrix activation_slope(const Matrix& z, const Matrix& a, Activation act) {
    switch (act) {
    case Activation::sigmoid: return (a.array() * (1.0 - a.array())).matrix();
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::linear: break;
    }
    return Matrix::Ones(z.rows(), z.cols());
}

struct LayerSpec {
    std::size_t input_size = 1;
    std::size_t output_size = 1;
    Activation activation = Activation::linear;
    bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
    LayerSpec spec;
    Matrix weights;  // input_size x output_size
    RowVector bias;  // output_size
};

struct TrainConfig {
    std::size_t epochs = 7500;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double alpha = 1e-5;
    std::uint64_t seed = 42;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-7;

    void validate() const {
        if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be > 0");
        if (!(alpha >= 0.0)) throw InvalidInput("alpha must be >= 0");
    }
    bool operator==(const TrainConfig&) const = default;
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
            {"alpha", c.alpha},           {"seed", c.seed},             {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2}, {"adam_epsilon", c.adam_epsilon}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    return c;
}

struct AutoencoderModel {
    std::vector<DenseLayer> layers;
    std::size_t latent_layer_index = 0;
    NormParams norm;
    std::optional<TrainConfig> train_config; // echo of the settings used to train, if any

    std::size_t window_size() const { return layers.empty() ? 0 : layers.front().spec.input_size; }
    std::size_t latent_width() const { return layers.at(latent_layer_index).spec.output_size; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    void validate() const {
        if (layers.empty()) throw InvalidInput("model has no layers");
        if (latent_layer_index >= layers.size()) throw InvalidInput("latent layer index out of range");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& l = layers[k];
            if (l.spec.input_size < 1 || l.spec.output_size < 1) throw InvalidInput("layer sizes must be >= 1");
            if (static_cast<std::size_t>(l.weights.rows()) != l.spec.input_size ||
                static_cast<std::size_t>(l.weights.cols()) != l.spec.output_size ||
                static_cast<std::size_t>(l.bias.size()) != l.spec.output_size)
                throw InvalidInput("layer " + std::to_string(k) + " parameter shapes disagree with its spec");
            if (k > 0 && layers[k - 1].spec.output_size != l.spec.input_size)
                throw InvalidInput("layer " + std::to_string(k) + " does not chain with its predecessor");
        }
        if (layers.front().spec.input_size != layers.back().spec.output_size)
            throw InvalidInput("autoencoder output width must equal input width");
    }
};

/// Symmetric layout: W -> encoder hidden... -> latent -> mirrored hidden... -> W.
/// The last encoder entry is the latent layer.
inline std::vector<LayerSpec> mirror_layout(std::size_t w, const std::vector<std::pair<std::size_t, Activation>>& encoder,
                                            Activation output_activation = Activation::linear) {
    if (encoder.empty()) throw InvalidInput("encoder needs at least a latent layer");
    std::vector<LayerSpec> out;
    std::size_t in = w;
    for (const auto& [size, act] : encoder) {
        out.push_back({in, size, act});
        in = size;
    }
    for (std::size_t k = encoder.size() - 1; k-- > 0;) {
        out.push_back({in, encoder[k].first, encoder[k].second});
        in = encoder[k].first;
    }
    out.push_back({in, w, output_activation});
    return out;
}

/// 30 -> 22(sigmoid) -> 15(relu) -> 10(relu, latent) -> 15(relu) -> 22(sigmoid) -> 30(linear),
/// hidden widths scaled by W/30 for other window sizes.
inline std::vector<LayerSpec> default_layout(std::size_t w = 30, std::size_t latent = 10,
                                             Activation output_activation = Activation::linear) {
    auto scaled = [w](double base) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(base * static_cast<double>(w) / 30.0)));
    };
    return mirror_layout(w, {{scaled(22), Activation::sigmoid}, {scaled(15), Activation::relu}, {latent, Activation::relu}},
                         output_activation);
}

/// Uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)).
inline Matrix init_xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    if (fan_in < 1 || fan_out < 1) throw InvalidInput("xavier init needs positive fan-in and fan-out");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    return w;
}

inline AutoencoderModel make_model(const std::vector<LayerSpec>& layout, std::size_t latent_layer_index,
                                   std::uint64_t seed, NormParams norm = {}) {
    std::mt19937_64 rng(seed);
    AutoencoderModel m;
    m.latent_layer_index = latent_layer_index;
    m.norm = norm;
    for (const auto& spec : layout) {
        DenseLayer l;
        l.spec = spec;
        l.weights = init_xavier(spec.input_size, spec.output_size, rng);
        l.bias = RowVector::Zero(static_cast<Eigen::Index>(spec.output_size));
        m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
}

inline AutoencoderModel make_default_model(std::size_t w, std::uint64_t seed, NormParams norm = {},
                                           Activation output_activation = Activation::linear) {
    return make_model(default_layout(w, 10, output_activation), 2, seed, norm);
}

struct ForwardCache {
    std::vector<Matrix> pre;  // z_k = a_{k-1} W_k + b_k
    std::vector<Matrix> post; // a_k = act(z_k)
};

struct ForwardResult {
    Matrix latent;
    Matrix output;
    ForwardCache cache;
};

inline ForwardResult forward(const AutoencoderModel& model, const Matrix& batch) {
    if (model.layers.empty()) throw InvalidInput("model has no layers");
    if (static_cast<std::size_t>(batch.cols()) != model.window_size())
        throw InvalidInput("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                           std::to_string(model.window_size()));
    ForwardResult r;
    r.cache.pre.reserve(model.layers.size());
    r.cache.post.reserve(model.layers.size());
    const Matrix* in = &batch;
    for (const auto& layer : model.layers) {
        Matrix z = *in * layer.weights;
        z.rowwise() += layer.bias;
        r.cache.post.push_back(activate(z, layer.spec.activation));
        r.cache.pre.push_back(std::move(z));
        in = &r.cache.post.back();
    }
    r.latent = r.cache.post[model.latent_layer_index];
    r.output = r.cache.post.back();
    return r;
}

struct LossParts {
    double mse = 0.0;    // batch mean of per-sample (1/W) sum (x - x_hat)^2
    double l1 = 0.0;     // batch mean of alpha * sum |h|
    double total() const { return mse + l1; }
};

inline LossParts loss_parts(const Matrix& batch, const Matrix& output, const Matrix& latent, double alpha) {
    if (batch.rows() != output.rows() || batch.cols() != output.cols() || latent.rows() != batch.rows())
        throw InvalidInput("loss operands have mismatched shapes");
    const double b = static_cast<double>(batch.rows());
    LossParts p;
    p.mse = (batch - output).squaredNorm() / (static_cast<double>(batch.cols()) * b);
    p.l1 = alpha * latent.cwiseAbs().sum() / b;
    return p;
}

inline double loss(const Matrix& batch, const Matrix& output, const Matrix& latent, double alpha) {
    return loss_parts(batch, output, latent, alpha).total();
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<RowVector> biases;
};

/// Exact gradient of the batch-mean loss. The L1 term enters through the
/// latent activation as alpha * sign(h) / B.
inline Gradients backward(const AutoencoderModel& model, const Matrix& batch, const ForwardCache& cache, double alpha) {
    const std::size_t n_layers = model.layers.size();
    if (cache.post.size() != n_layers || cache.pre.size() != n_layers)
        throw InvalidInput("forward cache does not match the model");
    const double b = static_cast<double>(batch.rows());
    const double w = static_cast<double>(batch.cols());

    Gradients g;
    g.weights.resize(n_layers);
    g.biases.resize(n_layers);

    Matrix grad_a = (2.0 / (w * b)) * (cache.post.back() - batch);
    for (std::size_t k = n_layers; k-- > 0;) {
        const auto& layer = model.layers[k];
        if (k == model.latent_layer_index && alpha != 0.0)
            grad_a += (alpha / b) * cache.post[k].unaryExpr([](double h) { return double((h > 0.0) - (h < 0.0)); });
        Matrix delta = grad_a.cwiseProduct(activation_slope(cache.pre[k], cache.post[k], layer.spec.activation));
        const Matrix& input = k == 0 ? batch : cache.post[k - 1];
        g.weights[k] = input.transpose() * delta;
        g.biases[k] = delta.colwise().sum();
        if (k > 0) grad_a = delta * layer.weights.transpose();
    }
    return g;
}

struct AdamState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<RowVector> m_biases, v_biases;
    std::size_t step = 0;

    explicit AdamState(const AutoencoderModel& model) {
        for (const auto& l : model.layers) {
            m_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            v_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            m_biases.push_back(RowVector::Zero(l.bias.size()));
            v_biases.push_back(RowVector::Zero(l.bias.size()));
        }
    }
};

/// Bias-corrected Adam update of one parameter block at step t >= 1.
template <class P, class G, class S>
void adam_update(Eigen::MatrixBase<P>& param, const Eigen::MatrixBase<G>& grad, Eigen::MatrixBase<S>& m,
                 Eigen::MatrixBase<S>& v, const TrainConfig& cfg, std::size_t t) {
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseAbs2();
    param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_epsilon);
}

inline void adam_step(AutoencoderModel& model, const Gradients& g, AdamState& state, const TrainConfig& cfg) {
    const std::size_t t = ++state.step;
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        adam_update(model.layers[k].weights, g.weights[k], state.m_weights[k], state.v_weights[k], cfg, t);
        adam_update(model.layers[k].bias, g.biases[k], state.m_biases[k], state.v_biases[k], cfg, t);
    }
}

/// Loss of `model` over a whole dataset, evaluated in chunks.
inline LossParts evaluate(const AutoencoderModel& model, const Matrix& windows, double alpha) {
    if (windows.rows() == 0) return {};
    constexpr Eigen::Index chunk = 4096;
    double sq = 0.0, l1 = 0.0;
    for (Eigen::Index start = 0; start < windows.rows(); start += chunk) {
        const Eigen::Index n = std::min(chunk, windows.rows() - start);
        Matrix part = windows.middleRows(start, n);
        auto r = forward(model, part);
        sq += (part - r.output).squaredNorm();
        l1 += r.latent.cwiseAbs().sum();
    }
    const double rows = static_cast<double>(windows.rows());
    return {sq / (rows * static_cast<double>(windows.cols())), alpha * l1 / rows};
}

struct TrainReport {
    std::vector<double> train_loss; // mean per-sample total loss seen during the epoch
    std::vector<double> test_loss;  // total loss (MSE + L1) on the test set after the epoch
    std::vector<double> test_mse;   // MSE only
    double final_test_mse = 0.0;
};

/// Called after every epoch with (epoch index, train loss, test loss).
using EpochCallback = std::function<void(std::size_t, double, double)>;

inline std::pair<AutoencoderModel, TrainReport> train(AutoencoderModel model, const WindowedDataset& train_set,
                                                      const WindowedDataset& test_set, const TrainConfig& cfg,
                                                      const EpochCallback& on_epoch = {}) {
    cfg.validate();
    model.validate();
    if (train_set.window_size != model.window_size() || test_set.window_size != model.window_size())
        throw InvalidInput("dataset window size does not match the model");
    if (!(train_set.norm == test_set.norm)) throw InvalidInput("train and test sets use different normalization");
    if (train_set.size() == 0) throw InvalidInput("empty training set");

    TrainReport report;
    AdamState state(model);
    std::mt19937_64 rng(cfg.seed);
    std::vector<Eigen::Index> order(train_set.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto w = static_cast<Eigen::Index>(model.window_size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            Matrix batch(static_cast<Eigen::Index>(n), w);
            for (std::size_t i = 0; i < n; ++i) batch.row(static_cast<Eigen::Index>(i)) = train_set.windows.row(order[start + i]);
            auto fw = forward(model, batch);
            epoch_loss += loss(batch, fw.output, fw.latent, cfg.alpha) * static_cast<double>(n);
            adam_step(model, backward(model, batch, fw.cache, cfg.alpha), state, cfg);
        }
        epoch_loss /= static_cast<double>(order.size());
        const auto test = evaluate(model, test_set.windows, cfg.alpha);
        if (!std::isfinite(epoch_loss) || !std::isfinite(test.total())) throw TrainingDiverged("loss became non-finite", epoch);
        report.train_loss.push_back(epoch_loss);
        report.test_loss.push_back(test.total());
        report.test_mse.push_back(test.mse);
        if (on_epoch) on_epoch(epoch, epoch_loss, test.total());
    }
    report.final_test_mse = report.test_mse.empty() ? evaluate(model, test_set.windows, cfg.alpha).mse : report.test_mse.back();
    model.train_config = cfg;
    return {std::move(model), report};
}

/// Runs a physical-units series through the model: normalize, window, encode/decode,
/// stitch with overlap averaging, denormalize. When (length - W) is not a multiple
/// of stride an extra window anchored at the series end covers the tail.
inline std::vector<double> reconstruct_series(const AutoencoderModel& model, std::span<const double> series,
                                              std::size_t w, std::size_t stride) {
    if (w != model.window_size()) throw InvalidInput("window size does not match the model");
    if (series.size() < w) throw InvalidInput("series shorter than the window size");
    if (stride == 0) throw InvalidInput("stride must be >= 1");
    const auto normalized = normalize_with(series, model.norm);
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + w <= series.size(); s += stride) starts.push_back(s);
    if (starts.back() + w != series.size()) starts.push_back(series.size() - w);
    Matrix windows(static_cast<Eigen::Index>(starts.size()), static_cast<Eigen::Index>(w));
    for (std::size_t r = 0; r < starts.size(); ++r)
        for (std::size_t c = 0; c < w; ++c)
            windows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = normalized[starts[r] + c];
    constexpr Eigen::Index chunk = 4096;
    Matrix out(windows.rows(), windows.cols());
    for (Eigen::Index s = 0; s < windows.rows(); s += chunk) {
        const Eigen::Index n = std::min(chunk, windows.rows() - s);
        out.middleRows(s, n) = forward(model, Matrix(windows.middleRows(s, n))).output;
    }
    return denormalize(stitch_at(out, starts, series.size()), model.norm);
}

// Model files: JSON, weights stored row-major (input_size x output_size) per layer.

inline constexpr int model_format_version = 1;

inline nlohmann::json model_to_json(const AutoencoderModel& m) {
    nlohmann::json j;
    j["format_version"] = model_format_version;
    j["layer_specs"] = nlohmann::json::array();
    j["weights"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    for (const auto& l : m.layers) {
        j["layer_specs"].push_back({{"input_size", l.spec.input_size},
                                    {"output_size", l.spec.output_size},
                                    {"activation", to_string(l.spec.activation)}});
        j["weights"].push_back(std::vector<double>(l.weights.data(), l.weights.data() + l.weights.size()));
        j["biases"].push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
    }
    j["latent_layer_index"] = m.latent_layer_index;
    j["norm"] = {{"min", m.norm.min}, {"max", m.norm.max}};
    j["train_config_echo"] = m.train_config ? to_json(*m.train_config) : nlohmann::json(nullptr);
    return j;
}

inline AutoencoderModel model_from_json(const nlohmann::json& j) {
    AutoencoderModel m;
    try {
        const int version = j.at("format_version").get<int>();
        if (version != model_format_version)
            throw UnsupportedVersion("model format_version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(model_format_version) + ")");
        const auto& specs = j.at("layer_specs");
        const auto& weights = j.at("weights");
        const auto& biases = j.at("biases");
        if (weights.size() != specs.size() || biases.size() != specs.size())
            throw ParseError("model file: layer_specs, weights and biases differ in length", 0);
        for (std::size_t k = 0; k < specs.size(); ++k) {
            DenseLayer l;
            l.spec.input_size = specs[k].at("input_size").get<std::size_t>();
            l.spec.output_size = specs[k].at("output_size").get<std::size_t>();
            l.spec.activation = activation_from_string(specs[k].at("activation").get<std::string>());
            auto wv = weights[k].get<std::vector<double>>();
            auto bv = biases[k].get<std::vector<double>>();
            if (wv.size() != l.spec.input_size * l.spec.output_size || bv.size() != l.spec.output_size)
                throw ParseError("model file: layer " + std::to_string(k) + " has wrong parameter count", 0);
            l.weights = Eigen::Map<Matrix>(wv.data(), static_cast<Eigen::Index>(l.spec.input_size),
                                           static_cast<Eigen::Index>(l.spec.output_size));
            l.bias = Eigen::Map<RowVector>(bv.data(), static_cast<Eigen::Index>(bv.size()));
            m.layers.push_back(std::move(l));
        }
        m.latent_layer_index = j.at("latent_layer_index").get<std::size_t>();
        m.norm = {j.at("norm").at("min").get<double>(), j.at("norm").at("max").get<double>()};
        if (j.contains("train_config_echo") && !j["train_config_echo"].is_null())
            m.train_config = train_config_from_json(j["train_config_echo"]);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what(), 0);
    }
    try {
        m.validate();
    } catch (const InvalidInput& e) {
        throw ParseError(std::string("model file: ") + e.what(), 0);
    }
    return m;
}

inline AutoencoderModel parse_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model file: ") + e.what(), e.byte);
    }
    return model_from_json(j);
}

inline void save_model(const AutoencoderModel& m, const std::string& path) {
    auto os = csv::open_out(path);
    os << model_to_json(m).dump() << '\n';
    if (!os) throw IoError("write failed for '" + path + "'");
}

inline AutoencoderModel load_model(const std::string& path) { return parse_model(csv::read_file(path)); }

/// Loss curves as `epoch,train_loss,test_loss,test_mse`.
inline void write_loss_curve_csv(std::ostream& os, const TrainReport& r) {
    os << "epoch,train_loss,test_loss,test_mse\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e)
        os << e + 1 << ',' << csv::format_double(r.train_loss[e]) << ',' << csv::format_double(r.test_loss[e]) << ','
           << csv::format_double(r.test_mse[e]) << '\n';
}

} // namespace chaosae
