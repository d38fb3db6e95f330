#include "ambient/dynamics.hpp"

#include <cmath>
#include <string>

#include "ambient/errors.hpp"
#include "text_io.hpp"

namespace ambient {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

namespace {

constexpr cplx kJ(0.0, 1.0);

VectorXcd polar(const VectorXd& v, const VectorXd& theta) {
    VectorXcd out(v.size());
    for (Index i = 0; i < v.size(); ++i) out(i) = std::polar(v(i), theta(i));
    return out;
}

VectorXcd load_admittance(const SystemState& s) {
    VectorXcd y(s.g.size());
    y.real() = s.g;
    y.imag() = -s.b;
    return y;
}

}  // namespace

NetworkModel::NetworkModel(NetworkCase c, const PowerFlowOptions& pf) : case_(std::move(c)) {
    power_flow_ = solve_power_flow(case_, pf);
    ybus_ = build_ybus(case_.buses, case_.branches).complex();
    const Index n = ybus_.rows();
    const VectorXd& v = power_flow_.v;

    fixed_shunt_ = VectorXcd::Zero(n);
    for (const auto& bus : case_.buses) {
        const Index i = bus.id - 1;
        fixed_shunt_(i) += cplx(bus.p_load, -bus.q_load) / (v(i) * v(i));
    }

    const auto ng = static_cast<Index>(case_.generators.size());
    inertia_.resize(ng);
    damping_.resize(ng);
    x_d_prime_.resize(ng);
    for (Index k = 0; k < ng; ++k) {
        const auto& gen = case_.generators[static_cast<std::size_t>(k)];
        if (!(gen.inertia > 0.0) || gen.damping < 0.0 || !(gen.x_d_prime > 0.0)) {
            throw ConfigError("generator at bus " + std::to_string(gen.bus) +
                              ": requires M > 0, D >= 0, x'd > 0");
        }
        gen_pos_.push_back(gen.bus - 1);
        inertia_(k) = gen.inertia;
        damping_(k) = gen.damping;
        x_d_prime_(k) = gen.x_d_prime;
        fixed_shunt_(gen.bus - 1) += 1.0 / cplx(0.0, gen.x_d_prime);
    }
    p_m_ = power_flow_.mechanical_power;
    emf_ = power_flow_.machine_emf;

    const auto m = static_cast<Index>(case_.dynamic_loads.size());
    tau_g_.resize(m);
    tau_b_.resize(m);
    p_s_.resize(m);
    q_s_.resize(m);
    sigma_p_.resize(m);
    sigma_q_.resize(m);
    for (Index k = 0; k < m; ++k) {
        const auto& load = case_.dynamic_loads[static_cast<std::size_t>(k)];
        load_pos_.push_back(load.bus - 1);
        tau_g_(k) = load.tau_g;
        tau_b_(k) = load.tau_b;
        p_s_(k) = load.p_s;
        q_s_(k) = load.q_s;
        sigma_p_(k) = load.sigma_p;
        sigma_q_(k) = load.sigma_q;
    }

    equilibrium_.delta = power_flow_.machine_angle;
    equilibrium_.omega = VectorXd::Zero(ng);
    equilibrium_.g.resize(m);
    equilibrium_.b.resize(m);
    for (Index k = 0; k < m; ++k) {
        const double vk = v(load_pos_[static_cast<std::size_t>(k)]);
        equilibrium_.g(k) = p_s_(k) / (vk * vk);
        equilibrium_.b(k) = q_s_(k) / (vk * vk);
    }
    equilibrium_.v = v;
    equilibrium_.theta = power_flow_.theta;
    equilibrium_.t = 0.0;

    y_load_base_ = load_admittance(equilibrium_);
    MatrixXcd y_base = ybus_;
    y_base.diagonal() += fixed_shunt_;
    for (Index k = 0; k < m; ++k) {
        const Index i = load_pos_[static_cast<std::size_t>(k)];
        y_base(i, i) += y_load_base_(k);
    }
    Eigen::FullPivLU<MatrixXcd> lu(y_base);
    if (!lu.isInvertible()) {
        throw NumericalError("case '" + case_.name + "': singular network matrix");
    }
    z_base_ = lu.inverse();
    z_loads_ = z_base_(Eigen::all, load_pos_);
    z_load_block_ = z_base_(load_pos_, load_pos_);
}

VectorXcd NetworkModel::current_residual(const SystemState& s, const VectorXcd& v) const {
    VectorXcd f = ybus_ * v;
    f.array() += fixed_shunt_.array() * v.array();
    for (Index k = 0; k < load_count(); ++k) {
        const Index i = load_pos_[static_cast<std::size_t>(k)];
        f(i) += cplx(s.g(k), -s.b(k)) * v(i);
    }
    for (Index k = 0; k < generator_count(); ++k) {
        const Index i = gen_pos_[static_cast<std::size_t>(k)];
        f(i) -= std::polar(emf_(k), s.delta(k)) / cplx(0.0, x_d_prime_(k));
    }
    return f;
}

VectorXcd NetworkModel::solve_jacobian(const SystemState& s, const VectorXcd& rhs) const {
    const VectorXcd w = z_base_ * rhs;
    const Index m = load_count();
    if (m == 0) return w;
    const VectorXcd delta = load_admittance(s) - y_load_base_;
    MatrixXcd cap = delta.asDiagonal() * z_load_block_;
    cap.diagonal().array() += 1.0;
    const VectorXcd wl = w(load_pos_);
    const VectorXcd u = cap.partialPivLu().solve(delta.cwiseProduct(wl));
    return w - z_loads_ * u;
}

VectorXd generator_electrical_power(const SystemState& s, const NetworkModel& model) {
    const Index ng = model.generator_count();
    VectorXd pe(ng);
    for (Index k = 0; k < ng; ++k) {
        const Index i = model.generator_positions()[static_cast<std::size_t>(k)];
        const cplx e = std::polar(model.emf()(k), s.delta(k));
        const cplx vt = std::polar(s.v(i), s.theta(i));
        const cplx current = (e - vt) / cplx(0.0, model.x_d_prime()(k));
        pe(k) = (e * std::conj(current)).real();
    }
    return pe;
}

GeneratorRates generator_derivatives(const SystemState& s, const NetworkModel& model,
                                     const VectorXd& p_electrical) {
    GeneratorRates r;
    r.d_delta = s.omega;
    r.d_omega = (model.mechanical_power() - p_electrical -
                 model.damping().cwiseProduct(s.omega))
                    .cwiseQuotient(model.inertia());
    return r;
}

LoadRates load_drift(const SystemState& s, const NetworkModel& model) {
    const Index m = model.load_count();
    LoadRates r{VectorXd(m), VectorXd(m)};
    for (Index k = 0; k < m; ++k) {
        const double vk = s.v(model.load_positions()[static_cast<std::size_t>(k)]);
        const double v2 = vk * vk;
        r.dg(k) = -(s.g(k) * v2 - model.p_s()(k)) / model.tau_g()(k);
        r.db(k) = -(s.b(k) * v2 - model.q_s()(k)) / model.tau_b()(k);
    }
    return r;
}

LoadNoise::LoadNoise(std::uint64_t seed, Index load_count) {
    active_.reserve(static_cast<std::size_t>(load_count));
    reactive_.reserve(static_cast<std::size_t>(load_count));
    for (Index k = 0; k < load_count; ++k) {
        active_.emplace_back(seed, StreamDomain::load_active, static_cast<std::uint64_t>(k));
        reactive_.emplace_back(seed, StreamDomain::load_reactive, static_cast<std::uint64_t>(k));
    }
}

LoadRates load_noise_increment(const NetworkModel& model, double dt, LoadNoise& noise) {
    const Index m = model.load_count();
    const double sqrt_dt = std::sqrt(dt);
    LoadRates r{VectorXd(m), VectorXd(m)};
    for (Index k = 0; k < m; ++k) {
        r.dg(k) = model.p_s()(k) * model.sigma_p()(k) / model.tau_g()(k) * sqrt_dt * noise.active(k);
        r.db(k) =
            model.q_s()(k) * model.sigma_q()(k) / model.tau_b()(k) * sqrt_dt * noise.reactive(k);
    }
    return r;
}

namespace {

double max_power_mismatch(const VectorXcd& v, const VectorXcd& f) {
    double worst = 0.0;
    for (Index i = 0; i < v.size(); ++i) {
        const cplx ds = v(i) * std::conj(f(i));
        worst = std::max({worst, std::abs(ds.real()), std::abs(ds.imag())});
    }
    return worst;
}

}  // namespace

double network_mismatch(const SystemState& s, const NetworkModel& model) {
    const VectorXcd v = polar(s.v, s.theta);
    return max_power_mismatch(v, model.current_residual(s, v));
}

AlgebraicSolution solve_algebraic(const SystemState& s, const NetworkModel& model,
                                  const AlgebraicOptions& options) {
    const VectorXcd start = polar(s.v, s.theta);
    VectorXcd v = start;
    AlgebraicSolution out;
    while (true) {
        const VectorXcd f = model.current_residual(s, v);
        out.max_mismatch = max_power_mismatch(v, f);
        if (out.max_mismatch <= options.tolerance) break;
        if (out.iterations >= options.max_iterations || !std::isfinite(out.max_mismatch)) {
            throw NumericalError("algebraic network solve did not converge at t = " +
                                 detail::format_double(s.t) + " s (mismatch " +
                                 detail::format_double(out.max_mismatch) + " pu)");
        }
        v -= model.solve_jacobian(s, f);
        ++out.iterations;
    }
    out.v = out.iterations == 0 ? s.v : VectorXd(v.cwiseAbs());
    if (out.v.minCoeff() < options.min_voltage) {
        Index worst = 0;
        out.v.minCoeff(&worst);
        throw NumericalError("voltage collapse at bus " + std::to_string(worst + 1) + " (|V| = " +
                             detail::format_double(out.v(worst)) + " pu, t = " + detail::format_double(s.t) +
                             " s)");
    }
    // Unwrap against the warm start so angles stay continuous in time.
    if (out.iterations == 0) {
        out.theta = s.theta;
        return out;
    }
    out.theta.resize(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        out.theta(i) = s.theta(i) + std::arg(v(i) / start(i));
    }
    return out;
}

SystemState step(const SystemState& s, const NetworkModel& model, double dt, LoadNoise& noise,
                 const AlgebraicOptions& options) {
    const VectorXd pe = generator_electrical_power(s, model);
    const GeneratorRates gen = generator_derivatives(s, model, pe);
    const LoadRates drift = load_drift(s, model);
    const LoadRates diffusion = load_noise_increment(model, dt, noise);

    SystemState next = s;
    next.omega = s.omega + dt * gen.d_omega;
    next.delta = s.delta + dt * next.omega;
    next.g = s.g + dt * drift.dg + diffusion.dg;
    next.b = s.b + dt * drift.db + diffusion.db;
    next.t = s.t + dt;

    const AlgebraicSolution alg = solve_algebraic(next, model, options);
    next.v = alg.v;
    next.theta = alg.theta;
    return next;
}

Trajectory simulate(const NetworkModel& model, const SimulationOptions& options) {
    if (!(options.dt > 0.0) || !(options.duration >= 0.0) || options.record_stride < 1) {
        throw ConfigError("simulate: requires dt > 0, duration >= 0, record_stride >= 1");
    }
    const long long steps = std::llround(options.duration / options.dt);

    Trajectory traj;
    traj.dt = options.dt * options.record_stride;
    traj.seed = options.seed;
    traj.case_id = model.network_case().name;
    traj.bus_count = static_cast<int>(model.bus_count());
    for (const auto& gen : model.network_case().generators) traj.generator_buses.push_back(gen.bus);
    for (const auto& load : model.network_case().dynamic_loads) traj.load_buses.push_back(load.bus);
    traj.states.reserve(static_cast<std::size_t>(steps / options.record_stride + 1));

    LoadNoise noise(options.seed, model.load_count());
    SystemState s = model.equilibrium();
    traj.states.push_back(s);
    for (long long i = 1; i <= steps; ++i) {
        try {
            s = step(s, model, options.dt, noise, options.algebraic);
        } catch (const NumericalError& e) {
            throw NumericalError("step " + std::to_string(i) + ": " + e.what());
        }
        s.t = static_cast<double>(i) * options.dt;
        if (i % options.record_stride == 0) traj.states.push_back(s);
    }
    return traj;
}

}  // namespace ambient
