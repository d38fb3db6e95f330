#include "ambient/grid.hpp"

#include <cmath>
#include <string>

#include "ambient/errors.hpp"

namespace ambient {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

Branch Branch::from_impedance(int from, int to, double r, double x, double charging, double tap) {
    const cplx ys = 1.0 / cplx(r, x);
    return Branch{from, to, ys.real(), ys.imag(), charging, tap};
}

Eigen::MatrixXcd AdmittanceMatrix::complex() const {
    MatrixXcd y(G.rows(), G.cols());
    y.real() = G;
    y.imag() = B;
    return y;
}

AdmittanceMatrix build_ybus(std::span<const Bus> buses, std::span<const Branch> branches) {
    const auto n = static_cast<Eigen::Index>(buses.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (buses[i].id != i + 1) {
            throw ConfigError("bus ids must be contiguous 1..N in order; found id " +
                              std::to_string(buses[i].id) + " at position " +
                              std::to_string(i + 1));
        }
    }

    MatrixXcd y = MatrixXcd::Zero(n, n);
    std::vector<int> degree(static_cast<std::size_t>(n), 0);
    for (const auto& br : branches) {
        if (br.from_bus < 1 || br.from_bus > n || br.to_bus < 1 || br.to_bus > n) {
            throw ConfigError("branch " + std::to_string(br.from_bus) + "-" +
                              std::to_string(br.to_bus) + " references a missing bus");
        }
        if (br.from_bus == br.to_bus) {
            throw ConfigError("branch endpoints coincide at bus " + std::to_string(br.from_bus));
        }
        if (!(br.tap > 0.0)) {
            throw ConfigError("branch " + std::to_string(br.from_bus) + "-" +
                              std::to_string(br.to_bus) + " has non-positive tap");
        }
        const auto f = br.from_bus - 1;
        const auto t = br.to_bus - 1;
        const cplx ys(br.series_conductance, br.series_susceptance);
        const cplx half_charging(0.0, 0.5 * br.shunt_susceptance);
        y(f, f) += (ys + half_charging) / (br.tap * br.tap);
        y(t, t) += ys + half_charging;
        y(f, t) -= ys / br.tap;
        y(t, f) -= ys / br.tap;
        ++degree[static_cast<std::size_t>(f)];
        ++degree[static_cast<std::size_t>(t)];
    }
    if (n > 1) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (degree[static_cast<std::size_t>(i)] == 0) {
                throw ConfigError("isolated bus " + std::to_string(i + 1));
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, i) += cplx(buses[i].g_shunt, buses[i].b_shunt);
    }
    return AdmittanceMatrix{y.real(), y.imag()};
}

BusInjections bus_injections(const VectorXd& v, const VectorXd& theta, const AdmittanceMatrix& y) {
    const auto n = y.size();
    if (v.size() != n || theta.size() != n || y.B.rows() != n) {
        throw ConfigError("bus_injections: dimension mismatch");
    }
    BusInjections out{VectorXd::Zero(n), VectorXd::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double a = theta(i) - theta(k);
            const double vv = v(i) * v(k);
            out.p(i) += vv * (y.G(i, k) * std::cos(a) + y.B(i, k) * std::sin(a));
            out.q(i) += vv * (y.G(i, k) * std::sin(a) - y.B(i, k) * std::cos(a));
        }
    }
    return out;
}

BusInjections scheduled_injections(const NetworkCase& c) {
    const auto n = c.bus_count();
    BusInjections s{VectorXd::Zero(n), VectorXd::Zero(n)};
    for (const auto& bus : c.buses) {
        s.p(bus.id - 1) -= bus.p_load;
        s.q(bus.id - 1) -= bus.q_load;
    }
    for (const auto& load : c.dynamic_loads) {
        s.p(load.bus - 1) -= load.p_s;
        s.q(load.bus - 1) -= load.q_s;
    }
    for (const auto& gen : c.generators) {
        s.p(gen.bus - 1) += gen.p_m;
    }
    return s;
}

namespace {

VectorXcd polar(const VectorXd& v, const VectorXd& theta) {
    VectorXcd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = std::polar(v(i), theta(i));
    return out;
}

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkCase& c, const PowerFlowOptions& options) {
    const auto n = static_cast<Eigen::Index>(c.bus_count());
    const MatrixXcd y = build_ybus(c.buses, c.branches).complex();
    const BusInjections sched = scheduled_injections(c);

    std::vector<Eigen::Index> pv_pq;  // buses with a P equation
    std::vector<Eigen::Index> pq;     // buses with a Q equation
    int slack_count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (c.buses[i].kind) {
            case BusKind::slack: ++slack_count; break;
            case BusKind::generator: pv_pq.push_back(i); break;
            default:
                pv_pq.push_back(i);
                pq.push_back(i);
        }
    }
    if (slack_count != 1) {
        throw ConfigError("case '" + c.name + "' must have exactly one slack bus, found " +
                          std::to_string(slack_count));
    }

    VectorXd v(n), theta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = c.buses[i].voltage_magnitude;
        theta(i) = options.flat_start ? 0.0 : c.buses[i].initial_angle;
        if (options.flat_start && (c.buses[i].kind == BusKind::load_dynamic ||
                                   c.buses[i].kind == BusKind::load_static)) {
            v(i) = 1.0;
        }
    }

    const auto np = static_cast<Eigen::Index>(pv_pq.size());
    const auto nq = static_cast<Eigen::Index>(pq.size());
    VectorXd mismatch(np + nq);
    auto evaluate = [&](const VectorXcd& vc) {
        const VectorXcd s = vc.array() * (y * vc).conjugate().array();
        for (Eigen::Index r = 0; r < np; ++r) mismatch(r) = s(pv_pq[r]).real() - sched.p(pv_pq[r]);
        for (Eigen::Index r = 0; r < nq; ++r) mismatch(np + r) = s(pq[r]).imag() - sched.q(pq[r]);
        return mismatch.size() ? mismatch.cwiseAbs().maxCoeff() : 0.0;
    };

    PowerFlowSolution sol;
    VectorXcd vc = polar(v, theta);
    double worst = evaluate(vc);
    int iter = 0;
    while (worst > options.tolerance) {
        if (iter >= options.max_iterations || !std::isfinite(worst)) {
            throw NumericalError("power flow for '" + c.name + "' did not converge after " +
                                 std::to_string(iter) + " iterations (last mismatch " +
                                 std::to_string(worst) + " pu)");
        }
        // Complex-form derivatives of S = diag(V) conj(Y V).
        const VectorXcd ibus = y * vc;
        const VectorXcd vnorm = vc.array() / v.array().cast<cplx>();
        const MatrixXcd ds_dvm = vc.asDiagonal() * (y * vnorm.asDiagonal()).conjugate() +
                                 MatrixXcd(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
        const MatrixXcd ds_dva =
            cplx(0, 1) * vc.asDiagonal() *
            (MatrixXcd(ibus.asDiagonal()) - y * vc.asDiagonal()).conjugate();

        MatrixXd jac(np + nq, np + nq);
        for (Eigen::Index r = 0; r < np; ++r) {
            for (Eigen::Index k = 0; k < np; ++k) jac(r, k) = ds_dva(pv_pq[r], pv_pq[k]).real();
            for (Eigen::Index k = 0; k < nq; ++k) jac(r, np + k) = ds_dvm(pv_pq[r], pq[k]).real();
        }
        for (Eigen::Index r = 0; r < nq; ++r) {
            for (Eigen::Index k = 0; k < np; ++k) jac(np + r, k) = ds_dva(pq[r], pv_pq[k]).imag();
            for (Eigen::Index k = 0; k < nq; ++k) jac(np + r, np + k) = ds_dvm(pq[r], pq[k]).imag();
        }
        Eigen::FullPivLU<MatrixXd> lu(jac);
        if (!lu.isInvertible()) {
            throw NumericalError("power flow for '" + c.name + "': singular Jacobian at iteration " +
                                 std::to_string(iter));
        }
        const VectorXd dx = lu.solve(-mismatch);
        for (Eigen::Index r = 0; r < np; ++r) theta(pv_pq[r]) += dx(r);
        for (Eigen::Index r = 0; r < nq; ++r) v(pq[r]) += dx(np + r);
        vc = polar(v, theta);
        worst = evaluate(vc);
        ++iter;
    }
    if ((v.array() <= 0.0).any()) {
        throw NumericalError("power flow for '" + c.name + "' converged to a non-positive voltage");
    }

    sol.v = v;
    sol.theta = theta;
    const BusInjections inj = bus_injections(v, theta, AdmittanceMatrix{y.real(), y.imag()});
    sol.p_injection = inj.p;
    sol.q_injection = inj.q;
    sol.iterations = iter;
    sol.max_mismatch = worst;

    const auto ng = static_cast<Eigen::Index>(c.generators.size());
    sol.machine_angle.resize(ng);
    sol.machine_emf.resize(ng);
    sol.mechanical_power.resize(ng);
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto& gen = c.generators[static_cast<std::size_t>(k)];
        const auto i = gen.bus - 1;
        const auto& bus = c.buses[static_cast<std::size_t>(i)];
        const cplx s_gen(inj.p(i) + bus.p_load, inj.q(i) + bus.q_load);
        const cplx current = std::conj(s_gen / vc(i));
        const cplx emf = vc(i) + cplx(0.0, gen.x_d_prime) * current;
        sol.machine_angle(k) = std::arg(emf);
        sol.machine_emf(k) = std::abs(emf);
        sol.mechanical_power(k) = s_gen.real();
    }
    return sol;
}

double real_power_losses(const NetworkCase& c, const VectorXd& v, const VectorXd& theta) {
    const VectorXcd vc = polar(v, theta);
    double loss = 0.0;
    for (const auto& br : c.branches) {
        const cplx vf = vc(br.from_bus - 1);
        const cplx vt = vc(br.to_bus - 1);
        const cplx ys(br.series_conductance, br.series_susceptance);
        // Current through the series element, seen past the ideal tap.
        const cplx i_series = ys * (vf / br.tap - vt);
        loss += std::norm(i_series) * ys.real() / std::norm(ys);
    }
    for (const auto& bus : c.buses) {
        loss += bus.g_shunt * v(bus.id - 1) * v(bus.id - 1);
    }
    return loss;
}

}  // namespace ambient
