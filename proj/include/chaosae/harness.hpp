#pragma once

// Experiment orchestration behind the command-line tool: layered configuration,
// the simulate / train / sweep / lle / report pipelines and their file outputs.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "chaosae/csv.hpp"
#include "chaosae/datapipe.hpp"
#include "chaosae/dynamics.hpp"
#include "chaosae/error.hpp"
#include "chaosae/latent.hpp"
#include "chaosae/lyapunov.hpp"
#include "chaosae/neuralnet.hpp"
#include "chaosae/plot.hpp"

namespace chaosae::harness {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Scale { paper, desk };

inline std::string to_string(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

inline Scale scale_from_string(const std::string& s) {
    if (s == "paper") return Scale::paper;
    if (s == "desk") return Scale::desk;
    throw ConfigError("scale must be 'paper' or 'desk', got '" + s + "'");
}

struct LLEConfig {
    double displacement = 1e-7;
    std::size_t repeats = 10;
    FitPolicy fit;
    std::size_t theiler_window = 50;
    std::size_t embedding_dim = 0; // 0: 7 for three-variable systems, 9 for Lorenz96
    std::size_t nn_horizon = 1000;
    bool operator==(const LLEConfig&) const = default;
};

struct ExperimentConfig {
    SystemSpec system;
    IntegrationConfig integration;
    std::size_t coordinate = 0;
    std::size_t coordinate_base = 0; // 1: `coordinate` counts from one
    std::size_t window_size = 30;
    std::size_t train_stride = 1;
    std::size_t reconstruct_stride = 0; // 0: non-overlapping (stride = W)
    double train_fraction = 0.8;
    TrainConfig train;
    Activation output_activation = Activation::linear;
    std::vector<double> alpha_grid{1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
    std::vector<std::size_t> window_grid{9, 16, 23, 30, 37};
    LLEConfig lle;
    std::string output_dir = "out";
    Scale scale = Scale::paper;

    std::size_t coordinate_index() const {
        if (coordinate_base == 1) {
            if (coordinate == 0) throw ConfigError("coordinate 0 is invalid with coordinate_base 1");
            return coordinate - 1;
        }
        return coordinate;
    }

    bool operator==(const ExperimentConfig&) const = default;
};

/// Full-scale settings (Lorenz63, x coordinate); desk scale keeps 50000 retained
/// steps, trains 600 epochs and uses 5 twin pairs.
inline ExperimentConfig default_config(Scale scale = Scale::paper) {
    ExperimentConfig c;
    c.scale = scale;
    if (scale == Scale::desk) {
        c.integration.total_steps = c.integration.transient_steps + 50000;
        c.train.epochs = 600;
        c.lle.repeats = 5;
    }
    return c;
}

inline json system_params_json(const SystemSpec& s) {
    return std::visit(
        [](const auto& p) -> json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, RosslerParams>) return {{"a", p.a}, {"b", p.b}, {"c", p.c}};
            else if constexpr (std::is_same_v<P, Lorenz63Params>) return {{"sigma", p.sigma}, {"rho", p.rho}, {"beta", p.beta}};
            else return {{"n", p.n}, {"F", p.forcing}};
        },
        s.params());
}

inline json to_json(const ExperimentConfig& c) {
    json fit = {{"automatic", c.lle.fit.automatic},
                {"rise_fraction", c.lle.fit.rise_fraction},
                {"skip_fraction", c.lle.fit.skip_fraction},
                {"fit_start", c.lle.fit.fit_start},
                {"fit_end", c.lle.fit.fit_end}};
    return {
        {"system", {{"kind", c.system.name()}, {"params", system_params_json(c.system)}}},
        {"integration",
         {{"dt", c.integration.dt},
          {"total_steps", c.integration.total_steps},
          {"transient_steps", c.integration.transient_steps},
          {"initial_state", c.integration.initial_state},
          {"seed", c.integration.seed}}},
        {"coordinate", c.coordinate},
        {"coordinate_base", c.coordinate_base},
        {"window_size", c.window_size},
        {"train_stride", c.train_stride},
        {"reconstruct_stride", c.reconstruct_stride},
        {"train_fraction", c.train_fraction},
        {"train", chaosae::to_json(c.train)},
        {"output_activation", chaosae::to_string(c.output_activation)},
        {"alpha_grid", c.alpha_grid},
        {"window_grid", c.window_grid},
        {"lle",
         {{"displacement", c.lle.displacement},
          {"repeats", c.lle.repeats},
          {"theiler_window", c.lle.theiler_window},
          {"embedding_dim", c.lle.embedding_dim},
          {"nn_horizon", c.lle.nn_horizon},
          {"fit", fit}}},
        {"output_dir", c.output_dir},
        {"scale", to_string(c.scale)},
    };
}

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError("unknown configuration key '" + where + (where.empty() ? "" : ".") + key + "'");
    }
}

inline SystemSpec system_from_json(const json& j) {
    reject_unknown(j, {"kind", "params"}, "system");
    const auto kind = system_kind_from_string(j.at("kind").get<std::string>());
    const json p = j.value("params", json::object());
    switch (kind) {
    case SystemKind::rossler: {
        reject_unknown(p, {"a", "b", "c"}, "system.params");
        RosslerParams d;
        return SystemSpec::rossler({p.value("a", d.a), p.value("b", d.b), p.value("c", d.c)});
    }
    case SystemKind::lorenz96: {
        reject_unknown(p, {"n", "F"}, "system.params");
        Lorenz96Params d;
        return SystemSpec::lorenz96({p.value("n", d.n), p.value("F", d.forcing)});
    }
    default: {
        reject_unknown(p, {"sigma", "rho", "beta"}, "system.params");
        Lorenz63Params d;
        return SystemSpec::lorenz63({p.value("sigma", d.sigma), p.value("rho", d.rho), p.value("beta", d.beta)});
    }
    }
}

/// Leaf paths of a JSON object; arrays count as leaves.
inline void collect_leaves(const json& j, std::vector<std::string>& prefix, std::vector<std::vector<std::string>>& out) {
    for (const auto& [key, value] : j.items()) {
        prefix.push_back(key);
        if (value.is_object()) collect_leaves(value, prefix, out);
        else out.push_back(prefix);
        prefix.pop_back();
    }
}

inline std::string env_name(const std::vector<std::string>& path) {
    std::string name = "CHAOSAE";
    for (const auto& p : path) {
        name += '_';
        for (char ch : p) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return name;
}

inline json parse_env_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

/// Integer settings are all counts, so a negative integer anywhere except in an
/// initial state is a mistake that unsigned conversion would otherwise hide.
inline void reject_negative_integers(const json& j, const std::string& where) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items())
            if (key != "initial_state") reject_negative_integers(value, where.empty() ? key : where + "." + key);
    } else if (j.is_array()) {
        for (const auto& v : j) reject_negative_integers(v, where);
    } else if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0) {
        throw ConfigError("'" + where + "' must not be negative");
    }
}

/// Overlays `patch` on `base`; a change of system kind resets the parameter block.
inline void overlay(json& base, const json& patch) {
    if (!patch.is_object()) throw ConfigError("configuration root must be a JSON object");
    if (patch.contains("system") && patch["system"].is_object() && patch["system"].contains("kind") &&
        patch["system"]["kind"] != base["system"]["kind"]) {
        const auto kind = system_kind_from_string(patch["system"]["kind"].get<std::string>());
        base["system"]["params"] = system_params_json(SystemSpec::with_defaults(kind));
    }
    base.merge_patch(patch);
}

} // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
    try {
        detail::reject_unknown(j, {"system", "integration", "coordinate", "coordinate_base", "window_size", "train_stride",
                                   "reconstruct_stride", "train_fraction", "train", "output_activation", "alpha_grid",
                                   "window_grid", "lle", "output_dir", "scale"},
                               "");
        detail::reject_negative_integers(j, "");
        ExperimentConfig c = default_config(scale_from_string(j.value("scale", std::string("paper"))));
        if (j.contains("system")) c.system = detail::system_from_json(j["system"]);
        if (j.contains("integration")) {
            const auto& i = j["integration"];
            detail::reject_unknown(i, {"dt", "total_steps", "transient_steps", "initial_state", "seed"}, "integration");
            c.integration.dt = i.value("dt", c.integration.dt);
            c.integration.total_steps = i.value("total_steps", c.integration.total_steps);
            c.integration.transient_steps = i.value("transient_steps", c.integration.transient_steps);
            c.integration.initial_state = i.value("initial_state", c.integration.initial_state);
            c.integration.seed = i.value("seed", c.integration.seed);
        }
        c.coordinate = j.value("coordinate", c.coordinate);
        c.coordinate_base = j.value("coordinate_base", c.coordinate_base);
        c.window_size = j.value("window_size", c.window_size);
        c.train_stride = j.value("train_stride", c.train_stride);
        c.reconstruct_stride = j.value("reconstruct_stride", c.reconstruct_stride);
        c.train_fraction = j.value("train_fraction", c.train_fraction);
        if (j.contains("train")) {
            detail::reject_unknown(j["train"], {"epochs", "batch_size", "learning_rate", "alpha", "seed", "adam_beta1",
                                                "adam_beta2", "adam_epsilon"},
                                   "train");
            c.train = train_config_from_json(j["train"], c.train);
        }
        if (j.contains("output_activation")) c.output_activation = activation_from_string(j["output_activation"].get<std::string>());
        c.alpha_grid = j.value("alpha_grid", c.alpha_grid);
        c.window_grid = j.value("window_grid", c.window_grid);
        if (j.contains("lle")) {
            const auto& l = j["lle"];
            detail::reject_unknown(l, {"displacement", "repeats", "theiler_window", "embedding_dim", "nn_horizon", "fit"}, "lle");
            c.lle.displacement = l.value("displacement", c.lle.displacement);
            c.lle.repeats = l.value("repeats", c.lle.repeats);
            c.lle.theiler_window = l.value("theiler_window", c.lle.theiler_window);
            c.lle.embedding_dim = l.value("embedding_dim", c.lle.embedding_dim);
            c.lle.nn_horizon = l.value("nn_horizon", c.lle.nn_horizon);
            if (l.contains("fit")) {
                const auto& f = l["fit"];
                detail::reject_unknown(f, {"automatic", "rise_fraction", "skip_fraction", "fit_start", "fit_end"}, "lle.fit");
                c.lle.fit.automatic = f.value("automatic", c.lle.fit.automatic);
                c.lle.fit.rise_fraction = f.value("rise_fraction", c.lle.fit.rise_fraction);
                c.lle.fit.skip_fraction = f.value("skip_fraction", c.lle.fit.skip_fraction);
                c.lle.fit.fit_start = f.value("fit_start", c.lle.fit.fit_start);
                c.lle.fit.fit_end = f.value("fit_end", c.lle.fit.fit_end);
            }
        }
        c.output_dir = j.value("output_dir", c.output_dir);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
}

/// Command-line values that take precedence over file and environment.
struct Overrides {
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed; // sets both the integration and training seed
    std::optional<Scale> scale;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

/// Parses JSON text with comments allowed.
inline json parse_config_text(const std::string& text) {
    try {
        return json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
}

/// Layers, lowest precedence first: built-in defaults for the chosen scale,
/// the config file, CHAOSAE_* environment variables, command-line overrides.
/// An empty file gives the full-scale Lorenz63 setup.
inline ExperimentConfig resolve_config(const json& file, const Overrides& ov = {}, const EnvLookup& env = process_env) {
    Scale scale = Scale::paper;
    if (file.contains("scale")) scale = scale_from_string(file["scale"].get<std::string>());
    if (auto s = env("CHAOSAE_SCALE")) scale = scale_from_string(*s);
    if (ov.scale) scale = *ov.scale;

    json j = to_json(default_config(scale));
    if (!file.is_null()) detail::overlay(j, file);
    if (auto kind = env("CHAOSAE_SYSTEM_KIND")) detail::overlay(j, {{"system", {{"kind", *kind}}}});
    std::vector<std::string> prefix;
    std::vector<std::vector<std::string>> leaves;
    detail::collect_leaves(j, prefix, leaves);
    for (const auto& path : leaves) {
        if (auto v = env(detail::env_name(path))) {
            json* node = &j;
            for (const auto& p : path) node = &(*node)[p];
            *node = detail::parse_env_value(*v);
        }
    }
    j["scale"] = to_string(scale);
    if (ov.output_dir) j["output_dir"] = *ov.output_dir;
    if (ov.seed) {
        j["integration"]["seed"] = *ov.seed;
        j["train"]["seed"] = *ov.seed;
    }
    return config_from_json(j);
}

inline ExperimentConfig load_config(const std::optional<std::string>& path, const Overrides& ov = {},
                                    const EnvLookup& env = process_env) {
    json file = json::object();
    if (path) file = parse_config_text(csv::read_file(*path));
    return resolve_config(file, ov, env);
}

inline void validate_config(const ExperimentConfig& c) {
    try {
        c.system.validate();
        c.integration.validate(c.system);
        c.train.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    if (c.coordinate_base > 1) throw ConfigError("coordinate_base must be 0 or 1");
    if (c.coordinate_index() >= c.system.dimension())
        throw ConfigError("coordinate " + std::to_string(c.coordinate) + " is out of range for " + c.system.name());
    if (c.window_size < 2) throw ConfigError("window_size must be >= 2");
    if (c.train_stride < 1) throw ConfigError("train_stride must be >= 1");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (c.lle.repeats < 1) throw ConfigError("lle.repeats must be >= 1");
    if (!(c.lle.displacement > 0.0)) throw ConfigError("lle.displacement must be > 0");
}

/// Maps failures onto the process exit-code contract.
inline int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::numerical_blowup:
    case ErrorKind::training_diverged: return 2;
    case ErrorKind::io_error: return 3;
    default: return 1;
    }
}

// ---------------------------------------------------------------------------
// Pipelines

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline void write_json_file(const fs::path& path, const json& j) {
    auto os = csv::open_out(path.string());
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline json read_json_file(const fs::path& path) {
    try {
        return json::parse(csv::read_file(path.string()));
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path.string() + "': " + e.what(), e.byte);
    }
}

inline json trajectory_metadata(const ExperimentConfig& c, std::size_t rows) {
    json cols = json::array({"t"});
    for (std::size_t i = 0; i < c.system.dimension(); ++i) cols.push_back("x" + std::to_string(i));
    const json full = to_json(c);
    return {{"system", full["system"]}, {"integration", full["integration"]}, {"rows", rows}, {"columns", cols}};
}

inline fs::path trajectory_path(const ExperimentConfig& c) {
    return fs::path(c.output_dir) / ("trajectory_" + c.system.name() + ".csv");
}

/// Integrates and writes `trajectory_<system>.csv` plus its JSON metadata.
inline Trajectory simulate(const ExperimentConfig& c, std::ostream* log = nullptr) {
    validate_config(c);
    ensure_dir(c.output_dir);
    auto traj = integrate(c.system, c.integration);
    const auto path = trajectory_path(c);
    {
        auto os = csv::open_out(path.string());
        write_trajectory_csv(os, traj);
        if (!os) throw IoError("write failed for '" + path.string() + "'");
    }
    auto meta_path = path;
    write_json_file(meta_path.replace_extension(".json"), trajectory_metadata(c, traj.rows()));
    if (log) *log << "wrote " << path.string() << " (" << traj.rows() << " rows)\n";
    return traj;
}

/// Reuses a trajectory on disk when its metadata matches the configuration.
inline Trajectory load_or_simulate(const ExperimentConfig& c, std::ostream* log = nullptr) {
    const auto path = trajectory_path(c);
    auto meta_path = path;
    meta_path.replace_extension(".json");
    if (fs::exists(path) && fs::exists(meta_path)) {
        try {
            const auto meta = read_json_file(meta_path);
            const auto expected = trajectory_metadata(c, c.integration.retained_steps());
            if (meta == expected) {
                auto t = read_trajectory_csv(csv::read_file(path.string()), c.system, c.integration.dt);
                if (t.rows() == c.integration.retained_steps()) return t;
            }
        } catch (const Error&) {
        }
    }
    return simulate(c, log);
}

inline json layout_json(const std::vector<LayerSpec>& layout) {
    json a = json::array();
    for (const auto& l : layout) a.push_back({l.input_size, l.output_size, chaosae::to_string(l.activation)});
    return a;
}

inline json stats_json(const LatentStats& s) {
    return {{"mean_active_nodes", s.mean_active_nodes}, {"std_active_nodes", s.std_active_nodes}, {"test_mse", s.test_mse},
            {"test_total_loss", s.test_loss}, {"alpha", s.alpha}, {"window_size", s.window_size}};
}

inline void write_loss_outputs(const fs::path& dir, const TrainReport& r) {
    {
        auto os = csv::open_out((dir / "loss_curve.csv").string());
        write_loss_curve_csv(os, r);
    }
    std::vector<double> epochs(r.train_loss.size());
    for (std::size_t e = 0; e < epochs.size(); ++e) epochs[e] = static_cast<double>(e + 1);
    csv::write_dat((dir / "loss_train.dat").string(), epochs, r.train_loss);
    csv::write_dat((dir / "loss_test.dat").string(), epochs, r.test_loss);
}

struct TrainOutcome {
    AutoencoderModel model;
    TrainReport report;
    LatentStats stats;
};

/// Trains one model at the configured W and alpha; writes model.json and loss curves.
inline TrainOutcome train_pipeline(const ExperimentConfig& c, std::ostream* log = nullptr) {
    validate_config(c);
    ensure_dir(c.output_dir);
    const auto traj = load_or_simulate(c, log);
    const auto coord = c.coordinate_index();
    auto data = prepare_training_data(traj.coordinate(coord), c.window_size, c.train_stride, c.train_fraction, coord);
    const auto layout = default_layout(c.window_size, 10, c.output_activation);
    auto model = make_model(layout, 2, c.train.seed, data.train.norm);
    const std::size_t every = std::max<std::size_t>(1, c.train.epochs / 20);
    auto [trained, report] = train(std::move(model), data.train, data.test, c.train, [&](std::size_t e, double tr, double te) {
        if (log && (e % every == 0 || e + 1 == c.train.epochs))
            *log << "epoch " << e + 1 << "/" << c.train.epochs << " train " << tr << " test " << te << '\n';
    });
    const fs::path dir(c.output_dir);
    save_model(trained, (dir / "model.json").string());
    write_loss_outputs(dir, report);
    auto stats = latent_stats(trained, data.test, c.train.alpha);
    write_json_file(dir / "train_summary.json", {{"system", c.system.name()},
                                                 {"coordinate", coord},
                                                 {"architecture", layout_json(layout)},
                                                 {"epochs", c.train.epochs},
                                                 {"final_test_mse", report.final_test_mse},
                                                 {"latent", stats_json(stats)},
                                                 {"seed", c.train.seed}});
    return {std::move(trained), std::move(report), stats};
}

enum class SweepMode { alpha, window };

inline std::string to_string(SweepMode m) { return m == SweepMode::alpha ? "alpha" : "window"; }

inline SweepMode sweep_mode_from_string(const std::string& s) {
    if (s == "alpha") return SweepMode::alpha;
    if (s == "window") return SweepMode::window;
    throw ConfigError("sweep mode must be 'alpha' or 'window'");
}

inline fs::path cell_dir(const ExperimentConfig& c, SweepMode mode, std::size_t i) {
    return fs::path(c.output_dir) / ("sweep_" + to_string(mode)) / ("cell_" + std::to_string(i));
}

/// One training per grid cell. Failed cells are recorded and the sweep continues.
inline std::vector<SweepCell> sweep_pipeline(const ExperimentConfig& c, SweepMode mode, std::ostream* log = nullptr) {
    validate_config(c);
    if (mode == SweepMode::alpha && c.alpha_grid.empty()) throw ConfigError("alpha_grid is empty");
    if (mode == SweepMode::window && c.window_grid.empty()) throw ConfigError("window_grid is empty");
    for (auto w : c.window_grid)
        if (mode == SweepMode::window && w < 2) throw ConfigError("window_grid entries must be >= 2");
    ensure_dir(c.output_dir);
    const auto traj = load_or_simulate(c, log);
    const auto coord = c.coordinate_index();

    SweepSetup setup;
    setup.series = traj.coordinate(coord);
    setup.source_coordinate = coord;
    setup.window_size = c.window_size;
    setup.train_stride = c.train_stride;
    setup.train_fraction = c.train_fraction;
    setup.train = c.train;
    setup.output_activation = c.output_activation;

    auto on_cell = [&](std::size_t i, const SweepCell& cell) {
        const auto dir = cell_dir(c, mode, i);
        ensure_dir(dir);
        if (cell.model) {
            save_model(*cell.model, (dir / "model.json").string());
            write_loss_outputs(dir, cell.report);
        }
        if (log) {
            *log << "cell " << i << " (" << to_string(mode) << " = " << cell.parameter << "): ";
            if (cell.stats) *log << "active " << cell.stats->mean_active_nodes << ", test mse " << cell.stats->test_mse << '\n';
            else *log << "failed: " << cell.error << '\n';
        }
    };
    auto cells = mode == SweepMode::alpha ? sweep_alpha(setup, c.alpha_grid, on_cell) : sweep_window(setup, c.window_grid, on_cell);

    const fs::path dir(c.output_dir);
    const std::string stem = "sweep_" + to_string(mode);
    {
        auto os = csv::open_out((dir / (stem + ".csv")).string());
        write_sweep_csv(os, cells);
    }
    std::vector<double> xs, nodes, losses;
    json cell_meta = json::array();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& cell = cells[i];
        cell_meta.push_back({{"index", i},
                             {"parameter", cell.parameter},
                             {"status", cell.stats ? "ok" : "failed"},
                             {"error", cell.error},
                             {"architecture", layout_json(cell.layout)}});
        if (!cell.stats) continue;
        xs.push_back(cell.parameter);
        nodes.push_back(cell.stats->mean_active_nodes);
        losses.push_back(cell.stats->test_loss);
    }
    csv::write_dat((dir / (stem + "_nodes.dat")).string(), xs, nodes);
    csv::write_dat((dir / (stem + "_loss.dat")).string(), xs, losses);
    write_json_file(dir / (stem + ".json"), {{"mode", to_string(mode)},
                                             {"system", c.system.name()},
                                             {"coordinate", coord},
                                             {"seed", c.train.seed},
                                             {"epochs", c.train.epochs},
                                             {"fixed_window_size", c.window_size},
                                             {"fixed_alpha", c.train.alpha},
                                             {"hidden_scaling", "round(22*W/30), round(15*W/30), latent 10"},
                                             {"train_config", chaosae::to_json(c.train)},
                                             {"cells", cell_meta}});
    return cells;
}

struct CoordinateLabel {
    std::size_t index = 0;
    std::string label;
};

/// Coordinates reported in the LLE tables: x, y, z for three-variable
/// systems; three consecutive one-based labels for Lorenz96.
inline std::vector<CoordinateLabel> table_coordinates(const SystemSpec& spec, std::size_t lorenz96_first = 18) {
    if (spec.kind() != SystemKind::lorenz96) return {{0, "x"}, {1, "y"}, {2, "z"}};
    std::vector<CoordinateLabel> out;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto idx = (lorenz96_first + k) % spec.dimension();
        out.push_back({idx, std::to_string(idx + 1)});
    }
    return out;
}

inline LLESettings lle_settings(const ExperimentConfig& c) { return {c.lle.repeats, c.lle.displacement, c.lle.fit}; }

inline std::string format_param(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

/// Wide layout: one row per sequence, nine `mean (std)` cells (three per system).
inline void write_lle_table(std::ostream& os, const std::vector<LLERow>& rows, const std::vector<std::string>& param_order) {
    const std::vector<std::pair<std::string, std::vector<std::string>>> columns{
        {"rossler", {"x", "y", "z"}}, {"lorenz63", {"x", "y", "z"}}, {"lorenz96", {}}};
    std::vector<std::string> l96_labels;
    for (const auto& r : rows)
        if (r.system == "lorenz96" && std::find(l96_labels.begin(), l96_labels.end(), r.coordinate) == l96_labels.end())
            l96_labels.push_back(r.coordinate);
    if (l96_labels.empty()) l96_labels = {"19", "20", "21"};
    os << "sequence,alpha_or_W";
    for (const auto& [sys, labels] : columns)
        for (const auto& l : sys == "lorenz96" ? l96_labels : labels) os << ',' << sys << '_' << l;
    os << '\n';
    for (const auto& param : param_order) {
        std::string sequence;
        for (const auto& r : rows)
            if (r.alpha_or_w == param) sequence = r.sequence;
        os << sequence << ',' << param;
        for (const auto& [sys, labels] : columns) {
            for (const auto& l : sys == "lorenz96" ? l96_labels : labels) {
                os << ',';
                for (const auto& r : rows) {
                    if (r.system == sys && r.coordinate == l && r.alpha_or_w == param && r.estimate) {
                        char buf[64];
                        std::snprintf(buf, sizeof(buf), "\"%.2f (%.2f)\"", r.estimate->mean_lambda, r.estimate->std_lambda);
                        os << buf;
                    }
                }
            }
        }
        os << '\n';
    }
}

inline void dump_divergence(const fs::path& path, const LLEEstimate& e) {
    std::vector<double> t(e.mean_curve.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) * e.dt;
    csv::write_dat(path.string(), t, e.mean_curve);
}

enum class LLEMode { input, reconstructed };

inline LLEMode lle_mode_from_string(const std::string& s) {
    if (s == "input") return LLEMode::input;
    if (s == "reconstructed") return LLEMode::reconstructed;
    throw ConfigError("lle mode must be 'input' or 'reconstructed'");
}

/// Input mode: twin-pair estimates for all three systems (three coordinates
/// each) plus nearest-neighbour cross-checks for the configured system.
/// Reconstructed mode: one row per sweep cell, reading that cell's model.
inline std::vector<LLERow> lle_pipeline(const ExperimentConfig& c, LLEMode mode, SweepMode grid = SweepMode::alpha,
                                        std::ostream* log = nullptr) {
    validate_config(c);
    ensure_dir(c.output_dir);
    const fs::path dir(c.output_dir);
    ensure_dir(dir / "divergence");
    const auto settings = lle_settings(c);
    std::vector<LLERow> rows;
    std::vector<std::string> params;
    std::string stem;

    if (mode == LLEMode::input) {
        stem = "lle_input";
        params = {""};
        for (auto kind : {SystemKind::rossler, SystemKind::lorenz63, SystemKind::lorenz96}) {
            const auto spec = kind == c.system.kind() ? c.system : SystemSpec::with_defaults(kind);
            const auto first = kind == c.system.kind() && kind == SystemKind::lorenz96 ? c.coordinate_index() : 18;
            IntegrationConfig icfg = c.integration;
            if (kind != c.system.kind()) icfg.initial_state.clear();
            for (const auto& coord : table_coordinates(spec, first)) {
                auto est = lle_estimate(spec, coord.index, icfg, settings);
                if (log)
                    *log << spec.name() << ' ' << coord.label << ": " << est.mean_lambda << " (" << est.std_lambda << "), fit steps ["
                         << est.fit_start << ", " << est.fit_end << ")\n";
                dump_divergence(dir / "divergence" / ("input_" + spec.name() + "_" + coord.label + ".dat"), est);
                rows.push_back({spec.name(), "input", "", coord.label, std::move(est)});
            }
        }
        // Nearest-neighbour estimator on the configured system's training coordinate.
        const auto traj = load_or_simulate(c, log);
        RosensteinConfig rc;
        rc.embedding.m = c.lle.embedding_dim ? c.lle.embedding_dim : (c.system.kind() == SystemKind::lorenz96 ? 9 : 7);
        rc.theiler_window = c.lle.theiler_window;
        rc.horizon = c.lle.nn_horizon;
        if (!c.lle.fit.automatic) rc.fit = c.lle.fit;
        try {
            auto est = rosenstein_nn_estimate(traj.coordinate(c.coordinate_index()), c.integration.dt, rc);
            const auto labels = table_coordinates(c.system, c.coordinate_index());
            const auto label = c.system.kind() == SystemKind::lorenz96 ? labels.front().label : labels[c.coordinate_index()].label;
            rows.push_back({c.system.name(), "input_nn", "", label, std::move(est)});
        } catch (const InvalidInput& e) {
            if (log) *log << "nearest-neighbour estimate skipped: " << e.what() << '\n';
        }
    } else {
        stem = "lle_reconstructed_" + to_string(grid);
        const std::size_t cells = grid == SweepMode::alpha ? c.alpha_grid.size() : c.window_grid.size();
        if (cells == 0) throw ConfigError(to_string(grid) + " grid is empty");
        const auto traj = load_or_simulate(c, log);
        const auto coords = table_coordinates(c.system, c.system.kind() == SystemKind::lorenz96 ? c.coordinate_index() : 18);
        for (std::size_t i = 0; i < cells; ++i) {
            const auto model_path = cell_dir(c, grid, i) / "model.json";
            const std::string param =
                grid == SweepMode::alpha ? format_param(c.alpha_grid[i]) : std::to_string(c.window_grid[i]);
            if (!fs::exists(model_path))
                throw IoError("missing model for " + to_string(grid) + " cell " + std::to_string(i) + " (" + param + "): '" +
                              model_path.string() + "'");
            const auto model = load_model(model_path.string());
            const auto stride = c.reconstruct_stride ? c.reconstruct_stride : model.window_size();
            params.push_back(param);
            for (const auto& coord : coords) {
                const auto norm = normalize(traj.coordinate(coord.index)).second;
                auto est = lle_of_reconstructed(model, c.system, coord.index, c.integration, settings, stride, norm);
                if (log)
                    *log << to_string(grid) << '=' << param << ' ' << coord.label << ": " << est.mean_lambda << " ("
                         << est.std_lambda << ")\n";
                dump_divergence(dir / "divergence" /
                                    ("reconstructed_" + to_string(grid) + "_" + std::to_string(i) + "_" + coord.label + ".dat"),
                                est);
                rows.push_back({c.system.name(), "reconstructed", param, coord.label, std::move(est)});
            }
        }
    }
    {
        auto os = csv::open_out((dir / (stem + ".csv")).string());
        write_lle_csv(os, rows);
    }
    {
        std::vector<LLERow> table_rows;
        for (const auto& r : rows)
            if (r.sequence != "input_nn") table_rows.push_back(r);
        auto os = csv::open_out((dir / (stem + "_table.csv")).string());
        write_lle_table(os, table_rows, params);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Report

/// CSV with a header row to an array of objects; numeric cells become numbers,
/// nan becomes null, everything else stays a string.
inline json csv_records(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    json out = json::array();
    if (!std::getline(is, line)) return out;
    std::vector<std::string> header;
    for (auto f : csv::split_fields(line)) header.emplace_back(f);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto fields = csv::split_fields(line);
        json rec = json::object();
        for (std::size_t k = 0; k < header.size(); ++k) {
            const std::string cell = k < fields.size() ? std::string(fields[k]) : std::string();
            if (cell.empty()) {
                rec[header[k]] = cell;
                continue;
            }
            try {
                const double v = csv::parse_double(cell);
                rec[header[k]] = std::isfinite(v) ? json(v) : json(nullptr);
            } catch (const InvalidInput&) {
                rec[header[k]] = cell;
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::pair<std::vector<double>, std::vector<double>> read_dat(const fs::path& path) {
    std::istringstream is(csv::read_file(path.string()));
    std::vector<double> x, y;
    std::string a, b;
    while (is >> a >> b) {
        x.push_back(csv::parse_double(a));
        y.push_back(csv::parse_double(b));
    }
    return {x, y};
}

/// Consolidated JSON of every stage output found in the output directory;
/// absent stages appear as null and are listed under "missing". Also writes
/// SVG plots for the curves that exist.
inline json report_pipeline(const ExperimentConfig& c, std::ostream* log = nullptr) {
    validate_config(c);
    const fs::path dir(c.output_dir);
    ensure_dir(dir);
    ensure_dir(dir / "plots");
    json missing = json::array();
    json plots = json::array();

    auto csv_or_null = [&](const std::string& name) -> json {
        if (!fs::exists(dir / name)) {
            missing.push_back(name);
            return nullptr;
        }
        return csv_records(csv::read_file((dir / name).string()));
    };
    auto json_or_null = [&](const std::string& name) -> json {
        if (!fs::exists(dir / name)) {
            missing.push_back(name);
            return nullptr;
        }
        return read_json_file(dir / name);
    };

    json report;
    report["format_version"] = 1;
    report["config"] = to_json(c);
    report["seeds"] = {{"integration", c.integration.seed}, {"train", c.train.seed}};
    report["training"] = {{"summary", json_or_null("train_summary.json")}, {"loss_curve", csv_or_null("loss_curve.csv")}};
    report["sweeps"] = json::object();
    for (auto mode : {SweepMode::alpha, SweepMode::window}) {
        const std::string stem = "sweep_" + to_string(mode);
        report["sweeps"][to_string(mode)] = {{"rows", csv_or_null(stem + ".csv")}, {"metadata", json_or_null(stem + ".json")}};
    }
    report["lle"] = {{"input", csv_or_null("lle_input.csv")},
                     {"reconstructed_alpha", csv_or_null("lle_reconstructed_alpha.csv")},
                     {"reconstructed_window", csv_or_null("lle_reconstructed_window.csv")}};

    if (fs::exists(dir / "loss_train.dat") && fs::exists(dir / "loss_test.dat")) {
        auto [e1, tr] = read_dat(dir / "loss_train.dat");
        auto [e2, te] = read_dat(dir / "loss_test.dat");
        plot::write_svg((dir / "plots" / "loss_curve.svg").string(),
                        {{"train", e1, tr, "#c0392b", true}, {"test", e2, te, "#000000", false}},
                        {"Loss during training", "epoch", "loss", false, true});
        plots.push_back("plots/loss_curve.svg");
    }
    for (auto mode : {SweepMode::alpha, SweepMode::window}) {
        const std::string stem = "sweep_" + to_string(mode);
        if (!fs::exists(dir / (stem + "_nodes.dat"))) continue;
        auto [x, nodes] = read_dat(dir / (stem + "_nodes.dat"));
        auto [x2, loss] = read_dat(dir / (stem + "_loss.dat"));
        const bool log_x = mode == SweepMode::alpha;
        const std::string xl = mode == SweepMode::alpha ? "alpha" : "W";
        plot::write_svg((dir / "plots" / (stem + "_nodes.svg")).string(), {{"active latent nodes", x, nodes, "#1f3a93", false}},
                        {"Active latent nodes", xl, "mean active nodes", log_x, false});
        plot::write_svg((dir / "plots" / (stem + "_loss.svg")).string(), {{"test loss", x2, loss, "#c0392b", true}},
                        {"Test loss", xl, "loss", log_x, true});
        plots.push_back("plots/" + stem + "_nodes.svg");
        plots.push_back("plots/" + stem + "_loss.svg");
    }
    if (fs::is_directory(dir / "divergence")) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir / "divergence"))
            if (entry.path().extension() == ".dat") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        const std::vector<std::string> palette{"#1f3a93", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#16a085"};
        std::vector<plot::Series> series;
        for (std::size_t i = 0; i < files.size(); ++i) {
            auto [t, l] = read_dat(files[i]);
            series.push_back({files[i].stem().string(), t, l, palette[i % palette.size()], false});
        }
        if (!series.empty()) {
            plot::write_svg((dir / "plots" / "divergence.svg").string(), series,
                            {"Mean log divergence", "time", "ln d", false, false});
            plots.push_back("plots/divergence.svg");
        }
    }
    report["missing"] = missing;
    report["plots"] = plots;
    write_json_file(dir / "report.json", report);
    if (log) *log << "wrote " << (dir / "report.json").string() << " (" << missing.size() << " missing inputs)\n";
    return report;
}

/// Structural check of a report document; returns the list of violations.
inline std::vector<std::string> validate_report(const json& r) {
    std::vector<std::string> problems;
    auto need = [&](const json& obj, const std::string& key, auto pred, const std::string& what) {
        if (!obj.is_object() || !obj.contains(key)) problems.push_back("missing '" + key + "'");
        else if (!pred(obj.at(key))) problems.push_back("'" + key + "' must be " + what);
    };
    auto is_obj = [](const json& v) { return v.is_object(); };
    auto is_arr = [](const json& v) { return v.is_array(); };
    auto arr_or_null = [](const json& v) { return v.is_array() || v.is_null(); };
    auto obj_or_null = [](const json& v) { return v.is_object() || v.is_null(); };
    need(r, "format_version", [](const json& v) { return v.is_number_integer() && v.get<int>() == 1; }, "1");
    need(r, "config", is_obj, "an object");
    need(r, "seeds", is_obj, "an object");
    need(r, "training", is_obj, "an object");
    need(r, "sweeps", is_obj, "an object");
    need(r, "lle", is_obj, "an object");
    need(r, "missing", is_arr, "an array");
    need(r, "plots", is_arr, "an array");
    if (!problems.empty()) return problems;
    need(r["training"], "summary", obj_or_null, "an object or null");
    need(r["training"], "loss_curve", arr_or_null, "an array or null");
    for (const char* m : {"alpha", "window"}) {
        need(r["sweeps"], m, is_obj, "an object");
        if (r["sweeps"].contains(m) && r["sweeps"][m].is_object()) {
            need(r["sweeps"][m], "rows", arr_or_null, "an array or null");
            need(r["sweeps"][m], "metadata", obj_or_null, "an object or null");
        }
    }
    for (const char* k : {"input", "reconstructed_alpha", "reconstructed_window"}) need(r["lle"], k, arr_or_null, "an array or null");
    return problems;
}

} // namespace chaosae::harness
