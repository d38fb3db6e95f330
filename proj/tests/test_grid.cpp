#include <doctest.h>

#include <cmath>
#include <vector>

#include "ambient/cases.hpp"
#include "ambient/errors.hpp"
#include "ambient/grid.hpp"

using namespace ambient;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Bus make_bus(int id, BusKind kind, double p = 0.0, double q = 0.0) {
    Bus b;
    b.id = id;
    b.kind = kind;
    b.p_load = p;
    b.q_load = q;
    return b;
}

NetworkCase two_bus(double p_load, double q_load) {
    NetworkCase c;
    c.name = "two-bus";
    c.buses = {make_bus(1, BusKind::load_static, p_load, q_load), make_bus(2, BusKind::slack)};
    c.branches = {Branch::from_impedance(1, 2, 0.01, 0.1)};
    c.generators = {GeneratorParams{2, 1.0, 2.0, 0.1, 0.0}};
    return c;
}

}  // namespace

TEST_CASE("two-bus series admittance assembles into +-y pattern") {
    const std::vector<Bus> buses = {make_bus(1, BusKind::slack), make_bus(2, BusKind::load_static)};
    const std::vector<Branch> branches = {Branch{1, 2, 1.0, -5.0, 0.0, 1.0}};
    const AdmittanceMatrix y = build_ybus(buses, branches);
    MatrixXd g(2, 2), b(2, 2);
    g << 1, -1, -1, 1;
    b << -5, 5, 5, -5;
    CHECK(y.G == g);
    CHECK(y.B == b);
}

TEST_CASE("single bus without branches gives 1x1 zeros") {
    const std::vector<Bus> buses = {make_bus(1, BusKind::slack)};
    const AdmittanceMatrix y = build_ybus(buses, std::vector<Branch>{});
    REQUIRE(y.size() == 1);
    CHECK(y.G(0, 0) == 0.0);
    CHECK(y.B(0, 0) == 0.0);
}

TEST_CASE("isolated bus is rejected") {
    const std::vector<Bus> buses = {make_bus(1, BusKind::slack), make_bus(2, BusKind::load_static),
                                    make_bus(3, BusKind::load_static)};
    const std::vector<Branch> branches = {Branch::from_impedance(1, 2, 0.0, 0.1)};
    CHECK_THROWS_AS(build_ybus(buses, branches), ConfigError);
}

TEST_CASE("assembly is linear in the branch set") {
    const NetworkCase c = builtin_ieee39();
    const AdmittanceMatrix all = build_ybus(c.buses, c.branches);
    MatrixXd g_sum = MatrixXd::Zero(all.size(), all.size());
    MatrixXd b_sum = g_sum;
    for (const auto& br : c.branches) {
        // one branch at a time on a two-bus stand-in, scattered back
        const std::vector<Bus> pair = {make_bus(1, BusKind::slack), make_bus(2, BusKind::load_static)};
        Branch local = br;
        local.from_bus = 1;
        local.to_bus = 2;
        const AdmittanceMatrix y = build_ybus(pair, std::vector<Branch>{local});
        const int f = br.from_bus - 1, t = br.to_bus - 1;
        const int idx[2] = {f, t};
        for (int r = 0; r < 2; ++r) {
            for (int k = 0; k < 2; ++k) {
                g_sum(idx[r], idx[k]) += y.G(r, k);
                b_sum(idx[r], idx[k]) += y.B(r, k);
            }
        }
    }
    for (Eigen::Index i = 0; i < all.size(); ++i) {
        const auto& bus = c.buses[static_cast<std::size_t>(i)];
        g_sum(i, i) += bus.g_shunt;
        b_sum(i, i) += bus.b_shunt;
    }
    CHECK((all.G - g_sum).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((all.B - b_sum).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("flat start on a lossless network") {
    AdmittanceMatrix y;
    y.G = MatrixXd::Zero(3, 3);
    y.B.resize(3, 3);
    y.B << -10, 4, 5, 4, -9, 5, 5, 5, -12;
    const BusInjections inj = bus_injections(VectorXd::Ones(3), VectorXd::Zero(3), y);
    CHECK(inj.p.cwiseAbs().maxCoeff() == 0.0);
    const VectorXd expected = -y.B.rowwise().sum();
    CHECK((inj.q - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("single bus self-admittance injections") {
    AdmittanceMatrix y{MatrixXd::Constant(1, 1, 0.7), MatrixXd::Constant(1, 1, -2.5)};
    const BusInjections inj = bus_injections(VectorXd::Ones(1), VectorXd::Zero(1), y);
    CHECK(inj.p(0) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(inj.q(0) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("injections reject mismatched dimensions") {
    AdmittanceMatrix y{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
    CHECK_THROWS_AS(bus_injections(VectorXd::Ones(3), VectorXd::Zero(3), y), ConfigError);
}

TEST_CASE("no-load two-bus power flow stays at 1 pu") {
    const PowerFlowSolution pf = solve_power_flow(two_bus(0.0, 0.0));
    CHECK(pf.iterations <= 1);
    CHECK(std::abs(pf.v(0) - 1.0) < 1e-12);
    CHECK(std::abs(pf.theta(0)) < 1e-12);
}

TEST_CASE("infeasible load fails to converge") {
    CHECK_THROWS_AS(solve_power_flow(two_bus(50.0, 20.0)), NumericalError);
}

TEST_CASE("built-in power flows converge and reproduce the schedule") {
    for (const NetworkCase& c : {builtin_wscc9(), builtin_ieee39()}) {
        CAPTURE(c.name);
        const PowerFlowSolution pf = solve_power_flow(c);
        CHECK(pf.iterations <= 10);
        CHECK(pf.max_mismatch < 1e-8);

        const BusInjections sched = scheduled_injections(c);
        const AdmittanceMatrix y = build_ybus(c.buses, c.branches);
        const BusInjections inj = bus_injections(pf.v, pf.theta, y);
        double worst = 0.0;
        for (int i = 0; i < c.bus_count(); ++i) {
            const BusKind kind = c.buses[static_cast<std::size_t>(i)].kind;
            if (kind == BusKind::slack) continue;
            worst = std::max(worst, std::abs(inj.p(i) - sched.p(i)));
            if (kind != BusKind::generator) worst = std::max(worst, std::abs(inj.q(i) - sched.q(i)));
        }
        CHECK(worst <= pf.max_mismatch * (1.0 + 1e-9) + 1e-15);
        CHECK(worst < 1e-8);

        // generation = load + losses
        const double net = pf.p_injection.sum();
        CHECK(std::abs(net - real_power_losses(c, pf.v, pf.theta)) < 1e-6);
    }
}

TEST_CASE("9-bus load voltages are the familiar ones") {
    const PowerFlowSolution pf = solve_power_flow(builtin_wscc9());
    CHECK(pf.v(0) == doctest::Approx(0.9956).epsilon(1e-3));
    CHECK(pf.v(1) == doctest::Approx(1.0127).epsilon(1e-3));
    CHECK(pf.v(2) == doctest::Approx(1.0159).epsilon(1e-3));
}

TEST_CASE("lossless network injections sum to zero") {
    NetworkCase c;
    c.name = "lossless";
    c.buses = {make_bus(1, BusKind::load_static, 0.8, 0.3), make_bus(2, BusKind::generator),
               make_bus(3, BusKind::slack)};
    c.buses[1].voltage_magnitude = 1.02;
    c.branches = {Branch::from_impedance(1, 2, 0.0, 0.1), Branch::from_impedance(2, 3, 0.0, 0.08),
                  Branch::from_impedance(1, 3, 0.0, 0.12)};
    c.generators = {GeneratorParams{2, 1.0, 2.0, 0.1, 0.5}, GeneratorParams{3, 1.0, 2.0, 0.1, 0.0}};
    const PowerFlowSolution pf = solve_power_flow(c);
    CHECK(std::abs(pf.p_injection.sum()) < 1e-10);
    CHECK(real_power_losses(c, pf.v, pf.theta) == 0.0);
}
