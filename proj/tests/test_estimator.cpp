#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "ambient/cases.hpp"
#include "ambient/covariance.hpp"
#include "ambient/errors.hpp"
#include "ambient/estimator.hpp"
#include "ambient/experiment.hpp"
#include "ambient/lyapunov.hpp"
#include "support.hpp"

using namespace ambient;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
    VectorXd v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (const double x : xs) v(i++) = x;
    return v;
}

LoadStaticCharacteristics wscc9_chars() {
    const NetworkCase c = builtin_wscc9();
    return LoadStaticCharacteristics::from_case(c, c.monitored_buses);
}

SampleStatistics analytic_stats(const VectorXd& tau_g, const VectorXd& tau_b,
                                const LoadStaticCharacteristics& chars, const VectorXd& v) {
    const Index m = tau_g.size();
    const MatrixXd c = analytic_load_covariance(tau_g, tau_b, chars, v);
    SampleStatistics s;
    s.v_bar = v;
    s.q_gg = c.topLeftCorner(m, m);
    s.q_bb = c.bottomRightCorner(m, m);
    s.n = 20000;
    s.window = 1000.0;
    return s;
}

double relative_residual(const MatrixXd& a, const MatrixXd& x, const MatrixXd& q) {
    return (a * x + x * a.transpose() + q).norm() / std::max(q.norm(), 1e-300);
}

}  // namespace

TEST_CASE("sample mean voltage") {
    AdmittanceSeries s;
    s.t = {0.0, 0.05};
    s.buses = {1};
    s.g = MatrixXd::Ones(2, 1);
    s.b = MatrixXd::Ones(2, 1);
    SUBCASE("constant") {
        s.v_mag = MatrixXd::Ones(2, 1);
        CHECK(sample_mean_voltage(s)(0) == 1.0);
    }
    SUBCASE("two samples") {
        s.v_mag.resize(2, 1);
        s.v_mag << 0.9, 1.1;
        CHECK(sample_mean_voltage(s)(0) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("sample covariance") {
    SUBCASE("constant series has zero covariance") {
        const MatrixXd x = MatrixXd::Constant(50, 3, 0.7);
        CHECK(sample_covariance(x).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("n - 1 normalization") {
        MatrixXd x(2, 1);
        x << 0.0, 2.0;
        CHECK(sample_covariance(x)(0, 0) == 2.0);
    }
    SUBCASE("cross covariance against a hand loop") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n01;
        MatrixXd x(40, 2), y(40, 3);
        for (Index i = 0; i < 40; ++i) {
            for (Index j = 0; j < 2; ++j) x(i, j) = n01(rng);
            for (Index j = 0; j < 3; ++j) y(i, j) = n01(rng) + 0.5 * x(i, 0);
        }
        const MatrixXd c = sample_covariance(x, y);
        for (Index a = 0; a < 2; ++a) {
            for (Index b = 0; b < 3; ++b) {
                double mx = 0, my = 0, s = 0;
                for (Index i = 0; i < 40; ++i) mx += x(i, a), my += y(i, b);
                mx /= 40, my /= 40;
                for (Index i = 0; i < 40; ++i) s += (x(i, a) - mx) * (y(i, b) - my);
                CHECK(c(a, b) == doctest::Approx(s / 39).epsilon(1e-12));
            }
        }
    }
    SUBCASE("too few samples") {
        CHECK_THROWS_AS(sample_covariance(MatrixXd::Ones(1, 2)), ConfigError);
        AdmittanceSeries s;
        s.t = {0.0};
        s.buses = {1};
        s.g = s.b = s.v_mag = MatrixXd::Ones(1, 1);
        CHECK_THROWS_AS(compute_sample_statistics(s), ConfigError);
    }
}

TEST_CASE("Lyapunov solver") {
    SUBCASE("scalar OU variance") {
        MatrixXd a(1, 1), b(1, 1);
        a << -3.0;
        b << 0.4;
        CHECK(lyapunov_stationary_covariance(a, b)(0, 0) == doctest::Approx(0.16 / 6.0).epsilon(1e-14));
    }
    SUBCASE("decoupled") {
        const MatrixXd a = vec({-1.0, -2.0}).asDiagonal();
        const MatrixXd c = lyapunov_stationary_covariance(a, MatrixXd::Identity(2, 2));
        CHECK(c(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(c(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(std::abs(c(0, 1)) < 1e-15);
    }
    SUBCASE("unstable system") {
        const MatrixXd a = vec({-1.0, 0.5}).asDiagonal();
        try {
            (void)lyapunov_stationary_covariance(a, MatrixXd::Identity(2, 2));
            FAIL("expected an error");
        } catch (const NumericalError& e) {
            CHECK(std::string(e.what()) == "unstable system");
        }
    }
    SUBCASE("residual on random stable systems") {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> n01;
        for (int trial = 0; trial < 20; ++trial) {
            const Index n = 2 + trial % 7;
            MatrixXd a(n, n), b(n, n);
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j) a(i, j) = n01(rng), b(i, j) = n01(rng);
            // shift into the left half plane
            Eigen::EigenSolver<MatrixXd> es(a, false);
            const double shift = es.eigenvalues().real().maxCoeff() + 0.5;
            a -= shift * MatrixXd::Identity(n, n);
            REQUIRE(is_hurwitz(a));
            const MatrixXd q = b * b.transpose();
            const MatrixXd x = lyapunov_stationary_covariance(a, b);
            CHECK(relative_residual(a, x, q) <= 1e-10);
            CHECK((x - x.transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("approximate linearization") {
    SUBCASE("single load, tau 2, unit voltage") {
        const NetworkModel model(builtin_stiff_bus(2.0, 4.0));
        SystemState eq = model.equilibrium();
        eq.v(0) = 1.0;
        const LinearizedLoadSystem sys = build_linearized_system(model, eq, Linearization::approximate);
        CHECK(sys.a(0, 0) == -0.5);
        CHECK(sys.a(1, 1) == -0.25);
    }
    SUBCASE("9-bus Lyapunov solution equals the closed form") {
        const NetworkModel model(builtin_wscc9());
        const SystemState& eq = model.equilibrium();
        const LinearizedLoadSystem sys = build_linearized_system(model, eq, Linearization::approximate);
        const MatrixXd c = lyapunov_stationary_covariance(sys.a, sys.b);
        VectorXd v(3);
        for (Index k = 0; k < 3; ++k) v(k) = eq.v(model.load_positions()[static_cast<std::size_t>(k)]);
        const MatrixXd closed = analytic_load_covariance(model.tau_g(), model.tau_b(), wscc9_chars(), v);
        CHECK((c - closed).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(c.topRightCorner(3, 3).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("closed form holds for random diagonal data") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.1, 3.0);
        for (int trial = 0; trial < 25; ++trial) {
            const Index m = 1 + trial % 6;
            LoadStaticCharacteristics chars;
            chars.p_s = chars.q_s = chars.sigma_p = chars.sigma_q = VectorXd(m);
            VectorXd tg(m), tb(m), v(m);
            for (Index k = 0; k < m; ++k) {
                chars.p_s(k) = u(rng);
                chars.q_s(k) = u(rng);
                chars.sigma_p(k) = 0.05 * u(rng);
                chars.sigma_q(k) = 0.05 * u(rng);
                tg(k) = u(rng);
                tb(k) = u(rng);
                v(k) = 0.9 + 0.05 * u(rng);
            }
            MatrixXd a = MatrixXd::Zero(2 * m, 2 * m), b = a;
            for (Index k = 0; k < m; ++k) {
                a(k, k) = -v(k) * v(k) / tg(k);
                a(m + k, m + k) = -v(k) * v(k) / tb(k);
                b(k, k) = chars.p_s(k) * chars.sigma_p(k) / tg(k);
                b(m + k, m + k) = chars.q_s(k) * chars.sigma_q(k) / tb(k);
            }
            const MatrixXd c = lyapunov_stationary_covariance(a, b);
            CHECK((c - analytic_load_covariance(tg, tb, chars, v)).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("exact linearization matches the analytic network sensitivity") {
    for (const NetworkCase& nc : {builtin_wscc9(), builtin_ieee39()}) {
        CAPTURE(nc.name);
        const NetworkModel model(nc);
        const SystemState& eq = model.equilibrium();
        const Index n = model.bus_count(), m = model.load_count();
        const auto& pos = model.load_positions();

        // total network matrix with loads as admittances g - jb
        Eigen::MatrixXcd y = model.ybus();
        y.diagonal() += model.fixed_shunt();
        for (Index k = 0; k < m; ++k) {
            y(pos[static_cast<std::size_t>(k)], pos[static_cast<std::size_t>(k)]) += cplx(eq.g(k), -eq.b(k));
        }
        const Eigen::MatrixXcd z = y.inverse();
        Eigen::VectorXcd v(n);
        for (Index i = 0; i < n; ++i) v(i) = std::polar(eq.v(i), eq.theta(i));

        // dV/dy_k = -Z e_k V_k ; dy/dg = 1, dy/db = -j
        MatrixXd jac(2 * m, 2 * m);
        for (Index j = 0; j < 2 * m; ++j) {
            const Index k = j % m;
            const Index pk = pos[static_cast<std::size_t>(k)];
            const cplx dy = j < m ? cplx(1.0, 0.0) : cplx(0.0, -1.0);
            const Eigen::VectorXcd dv = -z.col(pk) * (dy * v(pk));
            for (Index r = 0; r < m; ++r) {
                const Index pr = pos[static_cast<std::size_t>(r)];
                const double d_v2 = 2.0 * std::real(std::conj(v(pr)) * dv(pr));
                const double v2 = std::norm(v(pr));
                jac(r, j) = eq.g(r) * d_v2 + (j == r ? v2 : 0.0);
                jac(m + r, j) = eq.b(r) * d_v2 + (j == m + r ? v2 : 0.0);
            }
        }
        VectorXd inv_tau(2 * m);
        inv_tau << model.tau_g().cwiseInverse(), model.tau_b().cwiseInverse();
        const MatrixXd expected = -(inv_tau.asDiagonal() * jac);

        const LinearizedLoadSystem sys = build_linearized_system(model, eq, Linearization::exact);
        CHECK((sys.a - expected).cwiseAbs().maxCoeff() <= 1e-6 * expected.cwiseAbs().maxCoeff());
        CHECK(is_hurwitz(sys.a));
    }
}

TEST_CASE("closed-form estimate inverts the analytic covariance") {
    const LoadStaticCharacteristics chars = wscc9_chars();
    const VectorXd tg = vec({1.0, 3.0, 0.2}), tb = vec({5.0, 7.0, 0.8});
    const VectorXd v = vec({0.9952, 1.0126, 1.0155});
    const SampleStatistics stats = analytic_stats(tg, tb, chars, v);
    for (const EstimationMethod method :
         {EstimationMethod::matrix_inverse, EstimationMethod::diagonal_reciprocal}) {
        CAPTURE(to_string(method));
        const EstimationResult r = estimate_time_constants(stats, chars, method);
        CHECK((r.tau_g_hat - tg).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((r.tau_b_hat - tb).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(r.all_valid());
        CHECK(r.warnings.empty());
    }
}

TEST_CASE("ill-conditioned covariance is an error for the inverse method") {
    const LoadStaticCharacteristics chars = wscc9_chars();
    SampleStatistics stats = analytic_stats(vec({1, 3, 0.2}), vec({5, 7, 0.8}), chars, VectorXd::Ones(3));
    stats.q_gg = MatrixXd::Constant(3, 3, 1e-3);
    CHECK_THROWS_AS(estimate_time_constants(stats, chars, EstimationMethod::matrix_inverse), NumericalError);
    CHECK_NOTHROW(estimate_time_constants(stats, chars, EstimationMethod::diagonal_reciprocal));
}

TEST_CASE("non-positive estimates are flagged") {
    const LoadStaticCharacteristics chars = wscc9_chars();
    SampleStatistics stats = analytic_stats(vec({1, 3, 0.2}), vec({5, 7, 0.8}), chars, VectorXd::Ones(3));
    stats.q_bb(1, 1) = -stats.q_bb(1, 1);
    const EstimationResult r = estimate_time_constants(stats, chars, EstimationMethod::diagonal_reciprocal);
    CHECK_FALSE(r.all_valid());
    CHECK(r.valid_b[1] == false);
    CHECK(r.valid_g[1] == true);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("load 2") != std::string::npos);
}

TEST_CASE("mismatched characteristics are rejected") {
    const LoadStaticCharacteristics chars = wscc9_chars();
    const SampleStatistics stats =
        analytic_stats(vec({1, 3}), vec({5, 7}), LoadStaticCharacteristics::from_case(builtin_wscc9(), {1, 2}),
                       VectorXd::Ones(2));
    CHECK_THROWS_AS(estimate_time_constants(stats, chars), ConfigError);
}

TEST_CASE("9-bus sample statistics and the scale property") {
    const NetworkModel model(builtin_wscc9());
    ExperimentConfig cfg;
    cfg.seed = 1;
    const PhasorStream stream = synthesize_phasors(model, cfg);
    const AdmittanceSeries series = select_window(recover_admittance(stream), cfg.burn_in, cfg.window);
    REQUIRE(series.size() == 20000);
    const SampleStatistics stats = compute_sample_statistics(series);

    SUBCASE("sample mean voltage near the expected operating point") {
        CHECK(std::abs(stats.v_bar(0) - 0.9952) < 0.01);
        CHECK(std::abs(stats.v_bar(1) - 1.0126) < 0.01);
        CHECK(std::abs(stats.v_bar(2) - 1.0155) < 0.01);
    }
    SUBCASE("conductance covariance diagonal near reference values") {
        CHECK(stats.q_gg(0, 0) == doctest::Approx(1.41e-3).epsilon(0.25));
        CHECK(stats.q_gg(1, 1) == doctest::Approx(4.16e-4).epsilon(0.25));
        CHECK(stats.q_gg(2, 2) == doctest::Approx(5.75e-3).epsilon(0.25));
    }
    SUBCASE("scaling g by c scales Q_gg by c^2 and tau_g by 1/c^2") {
        const double c = 2.0;
        AdmittanceSeries scaled = series;
        scaled.g *= c;
        const SampleStatistics s2 = compute_sample_statistics(scaled);
        CHECK(s2.q_gg == stats.q_gg * (c * c));
        CHECK(s2.q_bb == stats.q_bb);
        const auto chars = wscc9_chars();
        for (const EstimationMethod method :
             {EstimationMethod::matrix_inverse, EstimationMethod::diagonal_reciprocal}) {
            const EstimationResult r1 = estimate_time_constants(stats, chars, method);
            const EstimationResult r2 = estimate_time_constants(s2, chars, method);
            CHECK(r2.tau_g_hat == r1.tau_g_hat / (c * c));
            CHECK(r2.tau_b_hat == r1.tau_b_hat);
        }
    }
    SUBCASE("diagnostics") {
        const EstimationResult r = estimate_time_constants(stats, wscc9_chars());
        CHECK(r.diagnostics.offdiag_energy_tg >= 0.0);
        CHECK(r.diagnostics.offdiag_energy_tg < 0.2);
        CHECK(r.diagnostics.condition_qgg > 1.0);
        CHECK(r.diagnostics.condition_qgg < 1e12);
    }
}

TEST_CASE("window selection") {
    AdmittanceSeries s;
    for (int i = 0; i <= 100; ++i) s.t.push_back(0.05 * i);
    s.buses = {1};
    s.g = s.b = s.v_mag = MatrixXd::Ones(101, 1);
    const AdmittanceSeries w = select_window(s, 1.0, 2.0);
    CHECK(w.size() == 40);
    CHECK(w.t.front() == doctest::Approx(1.0));
    CHECK(w.t.back() == doctest::Approx(2.95));
    CHECK(select_window(s, 0.0, 0.0).size() == 101);
}

TEST_CASE("estimation CSV layout") {
    EstimationResult r;
    r.buses = {1, 2};
    r.tau_g_hat = vec({0.9, 3.3});
    r.tau_b_hat = vec({5.5, 6.3});
    const auto dir = test_support::scratch_dir("estimate_csv");
    write_estimation_csv(r, TruthValues{vec({1.0, 3.0}), vec({5.0, 7.0})}, dir / "with.csv");
    write_estimation_csv(r, std::nullopt, dir / "without.csv");
    const std::string with = test_support::slurp(dir / "with.csv");
    const std::string without = test_support::slurp(dir / "without.csv");
    CHECK(with.rfind("bus,tau_g_true,tau_g_hat,err_g_pct,tau_b_true,tau_b_hat,err_b_pct\n", 0) == 0);
    CHECK(with.find("\n1,1,0.90000000000000002,9.9999999999999982,5,5.5,10\n") != std::string::npos);
    CHECK(without == "bus,tau_g_hat,tau_b_hat\n1,0.90000000000000002,5.5\n2,3.2999999999999998,6.2999999999999998\n");
    CHECK(percent_error(5.0, 4.7974) == doctest::Approx(4.052).epsilon(1e-3));
}
