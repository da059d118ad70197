#pragma once

// Chaotic vector fields (Rössler, Lorenz63, Lorenz96) and a fixed-step
// classical Runge-Kutta integrator.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "chaosae/csv.hpp"
#include "chaosae/error.hpp"
#include "chaosae/types.hpp"

namespace chaosae {

enum class SystemKind { rossler, lorenz63, lorenz96 };

struct RosslerParams {
    double a = 0.1;
    double b = 0.1;
    double c = 14.0;
    bool operator==(const RosslerParams&) const = default;
};

struct Lorenz63Params {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    bool operator==(const Lorenz63Params&) const = default;
};

struct Lorenz96Params {
    std::size_t n = 40;
    double forcing = 8.15;
    bool operator==(const Lorenz96Params&) const = default;
};

inline std::string to_string(SystemKind k) {
    switch (k) {
    case SystemKind::rossler: return "rossler";
    case SystemKind::lorenz63: return "lorenz63";
    case SystemKind::lorenz96: return "lorenz96";
    }
    return "unknown";
}

inline SystemKind system_kind_from_string(const std::string& s) {
    if (s == "rossler") return SystemKind::rossler;
    if (s == "lorenz63") return SystemKind::lorenz63;
    if (s == "lorenz96") return SystemKind::lorenz96;
    throw InvalidInput("unknown system '" + s + "'");
}

/// A chaotic system together with its parameter values.
class SystemSpec {
public:
    using Params = std::variant<RosslerParams, Lorenz63Params, Lorenz96Params>;

    SystemSpec() : params_(Lorenz63Params{}) {}
    explicit SystemSpec(Params p) : params_(std::move(p)) { validate(); }

    static SystemSpec rossler(RosslerParams p = {}) { return SystemSpec(p); }
    static SystemSpec lorenz63(Lorenz63Params p = {}) { return SystemSpec(p); }
    static SystemSpec lorenz96(Lorenz96Params p = {}) { return SystemSpec(p); }
    static SystemSpec with_defaults(SystemKind k) {
        switch (k) {
        case SystemKind::rossler: return rossler();
        case SystemKind::lorenz96: return lorenz96();
        default: return lorenz63();
        }
    }

    SystemKind kind() const { return static_cast<SystemKind>(params_.index()); }
    std::string name() const { return to_string(kind()); }
    const Params& params() const { return params_; }

    std::size_t dimension() const {
        if (auto* p = std::get_if<Lorenz96Params>(&params_)) return p->n;
        return 3;
    }

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        std::visit(
            [&](const auto& p) {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, RosslerParams>) {
                    if (!finite(p.a) || !finite(p.b) || !finite(p.c))
                        throw InvalidInput("rossler parameters must be finite");
                } else if constexpr (std::is_same_v<P, Lorenz63Params>) {
                    if (!finite(p.sigma) || !finite(p.rho) || !finite(p.beta))
                        throw InvalidInput("lorenz63 parameters must be finite");
                } else {
                    if (p.n < 4) throw InvalidInput("lorenz96 needs n >= 4");
                    if (!finite(p.forcing)) throw InvalidInput("lorenz96 forcing must be finite");
                }
            },
            params_);
    }

    bool operator==(const SystemSpec&) const = default;

private:
    Params params_;
};

/// Writes f(state) into `out`, which must already have the system dimension.
inline void derivative_into(const SystemSpec& spec, const Vector& x, Vector& out) {
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, RosslerParams>) {
                out[0] = -x[1] - x[2];
                out[1] = x[0] + p.a * x[1];
                out[2] = p.b + x[2] * (x[0] - p.c);
            } else if constexpr (std::is_same_v<P, Lorenz63Params>) {
                out[0] = p.sigma * (x[1] - x[0]);
                out[1] = x[0] * (p.rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - p.beta * x[2];
            } else {
                const auto n = static_cast<Eigen::Index>(p.n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double xp1 = x[(i + 1) % n];
                    const double xm1 = x[(i + n - 1) % n];
                    const double xm2 = x[(i + n - 2) % n];
                    out[i] = (xp1 - xm2) * xm1 - x[i] + p.forcing;
                }
            }
        },
        spec.params());
}

inline Vector derivative(const SystemSpec& spec, const Vector& state) {
    if (static_cast<std::size_t>(state.size()) != spec.dimension())
        throw InvalidInput("state has " + std::to_string(state.size()) + " components, " + spec.name() +
                           " needs " + std::to_string(spec.dimension()));
    Vector out(state.size());
    derivative_into(spec, state, out);
    return out;
}

/// One classical RK4 step of dx/dt = field(x). `field(x, out)` fills out.
/// Throws NumericalBlowup tagged with `step` if any stage goes non-finite.
template <class Field>
Vector rk4_step(const Field& field, const Vector& x, double dt, std::size_t step = 0) {
    const auto n = x.size();
    Vector k1(n), k2(n), k3(n), k4(n);
    field(x, k1);
    field(x + 0.5 * dt * k1, k2);
    field(x + 0.5 * dt * k2, k3);
    field(x + dt * k3, k4);
    Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw NumericalBlowup("integration produced a non-finite state", step);
    return next;
}

inline Vector rk4_step(const SystemSpec& spec, const Vector& x, double dt, std::size_t step = 0) {
    if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
    if (static_cast<std::size_t>(x.size()) != spec.dimension()) throw InvalidInput("state dimension mismatch");
    return rk4_step([&](const Vector& s, Vector& out) { derivative_into(spec, s, out); }, x, dt, step);
}

/// Starting point used when the configuration does not supply one. Lorenz96
/// gets a small kick on component 0 because the uniform state is a fixed point.
inline Vector default_initial_state(const SystemSpec& spec) {
    if (auto* p = std::get_if<Lorenz96Params>(&spec.params())) {
        Vector s = Vector::Constant(static_cast<Eigen::Index>(p->n), p->forcing);
        s[0] += 0.01;
        return s;
    }
    return Vector::Ones(3);
}

struct IntegrationConfig {
    double dt = 0.005;
    std::size_t total_steps = 300000;
    std::size_t transient_steps = 50000;
    std::vector<double> initial_state; // empty: default_initial_state
    std::uint64_t seed = 42;

    std::size_t retained_steps() const { return total_steps - transient_steps; }

    void validate(const SystemSpec& spec) const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("dt must be positive and finite");
        if (transient_steps >= total_steps) throw InvalidInput("transient_steps must be smaller than total_steps");
        if (!initial_state.empty() && initial_state.size() != spec.dimension())
            throw InvalidInput("initial_state has " + std::to_string(initial_state.size()) + " components, " +
                               spec.name() + " needs " + std::to_string(spec.dimension()));
    }

    Vector start_state(const SystemSpec& spec) const {
        if (initial_state.empty()) return default_initial_state(spec);
        return Eigen::Map<const Vector>(initial_state.data(), static_cast<Eigen::Index>(initial_state.size()));
    }

    bool operator==(const IntegrationConfig&) const = default;
};

struct Trajectory {
    Matrix states;              // rows: retained steps, cols: state components
    double dt = 0.0;
    SystemSpec system;
    std::size_t first_step = 0; // absolute step index of row 0

    std::size_t rows() const { return static_cast<std::size_t>(states.rows()); }

    std::vector<double> coordinate(std::size_t c) const {
        if (c >= static_cast<std::size_t>(states.cols())) throw InvalidInput("coordinate out of range");
        std::vector<double> out(rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        return out;
    }
};

namespace detail {

/// Advances `x` by `steps` RK4 steps; `first_step` labels blowup diagnostics.
inline Vector advance(const SystemSpec& spec, Vector x, double dt, std::size_t steps, std::size_t first_step) {
    for (std::size_t i = 0; i < steps; ++i) x = rk4_step(spec, x, dt, first_step + i + 1);
    return x;
}

/// Records `rows` states starting at `x` (row 0 is `x` itself).
inline Trajectory record(const SystemSpec& spec, Vector x, double dt, std::size_t rows, std::size_t first_step) {
    Trajectory t;
    t.dt = dt;
    t.system = spec;
    t.first_step = first_step;
    t.states.resize(static_cast<Eigen::Index>(rows), x.size());
    for (std::size_t i = 0; i < rows; ++i) {
        if (i > 0) x = rk4_step(spec, x, dt, first_step + i);
        t.states.row(static_cast<Eigen::Index>(i)) = x.transpose();
    }
    return t;
}

} // namespace detail

/// Integrates from the configured start and drops the transient rows.
/// Row k holds the state after transient_steps + k steps.
inline Trajectory integrate(const SystemSpec& spec, const IntegrationConfig& cfg) {
    spec.validate();
    cfg.validate(spec);
    Vector x = detail::advance(spec, cfg.start_state(spec), cfg.dt, cfg.transient_steps, 0);
    return detail::record(spec, std::move(x), cfg.dt, cfg.retained_steps(), cfg.transient_steps);
}

/// Post-transient attractor point reached from the configured start, after a
/// seeded N(0, 0.01^2) perturbation of every component (replica `replica`).
inline Vector attractor_point(const SystemSpec& spec, const IntegrationConfig& cfg, std::uint64_t replica) {
    spec.validate();
    cfg.validate(spec);
    Vector x = cfg.start_state(spec);
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += noise(rng);
    return detail::advance(spec, std::move(x), cfg.dt, cfg.transient_steps, 0);
}

/// Two trajectories of retained_steps rows forked from one attractor point;
/// the second is displaced by `displacement` along `coordinate`.
inline std::pair<Trajectory, Trajectory> twin_trajectories(const SystemSpec& spec, const IntegrationConfig& cfg,
                                                           double displacement, std::size_t coordinate,
                                                           std::uint64_t replica = 0) {
    if (coordinate >= spec.dimension()) throw InvalidInput("coordinate out of range for " + spec.name());
    if (!(displacement >= 0.0) || !std::isfinite(displacement)) throw InvalidInput("displacement must be >= 0");
    spec.validate();
    cfg.validate(spec);
    Vector start = replica == 0 ? detail::advance(spec, cfg.start_state(spec), cfg.dt, cfg.transient_steps, 0)
                                : attractor_point(spec, cfg, replica);
    Vector shifted = start;
    shifted[static_cast<Eigen::Index>(coordinate)] += displacement;
    return {detail::record(spec, std::move(start), cfg.dt, cfg.retained_steps(), cfg.transient_steps),
            detail::record(spec, std::move(shifted), cfg.dt, cfg.retained_steps(), cfg.transient_steps)};
}

/// CSV with header `t,x0,x1,...`; t is the absolute step index times dt.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
    os << 't';
    for (Eigen::Index c = 0; c < t.states.cols(); ++c) os << ",x" << c;
    os << '\n';
    for (Eigen::Index r = 0; r < t.states.rows(); ++r) {
        os << csv::format_double(static_cast<double>(t.first_step + static_cast<std::size_t>(r)) * t.dt);
        for (Eigen::Index c = 0; c < t.states.cols(); ++c) os << ',' << csv::format_double(t.states(r, c));
        os << '\n';
    }
}

/// Reads the CSV written by write_trajectory_csv. Only states and timing are recovered.
inline Trajectory read_trajectory_csv(const std::string& text, const SystemSpec& spec, double dt) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("t,", 0) != 0) throw InvalidInput("trajectory CSV lacks header");
    const auto cols = csv::split_fields(line).size() - 1;
    std::vector<double> values;
    std::vector<double> times;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = csv::split_fields(line);
        if (f.size() != cols + 1) throw InvalidInput("trajectory CSV row has wrong field count");
        times.push_back(csv::parse_double(f[0]));
        for (std::size_t c = 1; c < f.size(); ++c) values.push_back(csv::parse_double(f[c]));
    }
    Trajectory t;
    t.system = spec;
    t.states = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(cols));
    t.dt = dt;
    if (!times.empty()) t.first_step = static_cast<std::size_t>(std::llround(times[0] / dt));
    return t;
}

} // namespace chaosae
