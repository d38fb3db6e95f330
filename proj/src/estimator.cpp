#include "ambient/estimator.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ambient/covariance.hpp"
#include "ambient/errors.hpp"
#include "text_io.hpp"

namespace ambient {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kMaxCondition = 1e12;

double offdiag_energy(const MatrixXd& m) {
    const double total = m.squaredNorm();
    if (total == 0.0) return 0.0;
    return (total - m.diagonal().squaredNorm()) / total;
}

double condition_number(const MatrixXd& m) {
    if (m.rows() == 0) return 1.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const VectorXd ev = es.eigenvalues();
    const double hi = ev.cwiseAbs().maxCoeff();
    const double lo = ev.minCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace

const char* to_string(EstimationMethod m) {
    return m == EstimationMethod::matrix_inverse ? "matrix-inverse" : "diagonal";
}

EstimationMethod estimation_method_from_string(const std::string& s) {
    if (s == "matrix-inverse" || s == "inverse") return EstimationMethod::matrix_inverse;
    if (s == "diagonal" || s == "diagonal-reciprocal") return EstimationMethod::diagonal_reciprocal;
    throw ConfigError("unknown estimation method '" + s + "' (use matrix-inverse or diagonal)");
}

LoadStaticCharacteristics LoadStaticCharacteristics::from_case(const NetworkCase& c,
                                                               const std::vector<int>& buses) {
    const auto m = static_cast<Index>(buses.size());
    LoadStaticCharacteristics out{VectorXd(m), VectorXd(m), VectorXd(m), VectorXd(m)};
    for (Index k = 0; k < m; ++k) {
        const DynamicLoadParams& load = c.load_at(buses[static_cast<std::size_t>(k)]);
        out.p_s(k) = load.p_s;
        out.q_s(k) = load.q_s;
        out.sigma_p(k) = load.sigma_p;
        out.sigma_q(k) = load.sigma_q;
    }
    return out;
}

void LoadStaticCharacteristics::validate() const {
    const Index m = p_s.size();
    if (q_s.size() != m || sigma_p.size() != m || sigma_q.size() != m) {
        throw ConfigError("static characteristics: inconsistent sizes");
    }
    for (Index k = 0; k < m; ++k) {
        if (p_s(k) == 0.0 || q_s(k) == 0.0 || !(sigma_p(k) > 0.0) || !(sigma_q(k) > 0.0)) {
            throw ConfigError("static characteristics of load " + std::to_string(k + 1) +
                              ": P_s, Q_s must be non-zero and sigma_p, sigma_q positive");
        }
    }
}

bool EstimationResult::all_valid() const {
    for (const bool v : valid_g) if (!v) return false;
    for (const bool v : valid_b) if (!v) return false;
    return true;
}

VectorXd sample_mean_voltage(const AdmittanceSeries& series) {
    if (series.size() < 1) throw ConfigError("sample_mean_voltage: empty series");
    return column_mean(series.v_mag);
}

AdmittanceSeries select_window(const AdmittanceSeries& series, double burn_in, double window) {
    constexpr double eps = 1e-9;
    const double end = window > 0.0 ? burn_in + window : std::numeric_limits<double>::infinity();
    std::vector<Index> rows;
    for (std::size_t r = 0; r < series.t.size(); ++r) {
        const double t = series.t[r];
        if (t >= burn_in - eps && t < end - eps) rows.push_back(static_cast<Index>(r));
    }
    AdmittanceSeries out;
    out.buses = series.buses;
    for (const Index r : rows) out.t.push_back(series.t[static_cast<std::size_t>(r)]);
    out.g = series.g(rows, Eigen::all);
    out.b = series.b(rows, Eigen::all);
    out.v_mag = series.v_mag(rows, Eigen::all);
    return out;
}

SampleStatistics compute_sample_statistics(const AdmittanceSeries& series) {
    if (series.size() < 2) {
        throw ConfigError("need at least 2 samples for covariance estimation, have " +
                          std::to_string(series.size()));
    }
    SampleStatistics s;
    s.v_bar = sample_mean_voltage(series);
    s.q_gg = sample_covariance(series.g);
    s.q_bb = sample_covariance(series.b);
    s.n = series.size();
    const double spacing = series.t[1] - series.t[0];
    s.window = series.t.back() - series.t.front() + spacing;
    return s;
}

EstimationResult estimate_time_constants(const SampleStatistics& stats,
                                         const LoadStaticCharacteristics& chars,
                                         EstimationMethod method) {
    const Index m = stats.v_bar.size();
    if (chars.p_s.size() != m || stats.q_gg.rows() != m || stats.q_bb.rows() != m) {
        throw ConfigError("estimate_time_constants: static characteristics cover " +
                          std::to_string(chars.p_s.size()) + " loads, statistics cover " +
                          std::to_string(m));
    }
    chars.validate();

    EstimationResult r;
    r.method = method;
    r.stats = stats;
    r.diagnostics.offdiag_energy_qgg = offdiag_energy(stats.q_gg);
    r.diagnostics.offdiag_energy_qbb = offdiag_energy(stats.q_bb);
    r.diagnostics.condition_qgg = condition_number(stats.q_gg);
    r.diagnostics.condition_qbb = condition_number(stats.q_bb);

    const VectorXd v2 = stats.v_bar.array().square();
    const VectorXd k_g = 0.5 * (chars.p_s.cwiseProduct(chars.sigma_p)).array().square() / v2.array();
    const VectorXd k_b = 0.5 * (chars.q_s.cwiseProduct(chars.sigma_q)).array().square() / v2.array();

    auto extract = [&](const MatrixXd& q, const VectorXd& k, double cond, const char* name,
                       double& offdiag) -> VectorXd {
        if (method == EstimationMethod::matrix_inverse) {
            if (!(cond <= kMaxCondition)) {
                std::ostringstream msg;
                msg << name << " is singular or ill-conditioned (condition number " << cond << ")";
                throw NumericalError(msg.str());
            }
            const MatrixXd t = k.asDiagonal() * q.inverse();
            offdiag = offdiag_energy(t);
            return t.diagonal();
        }
        offdiag = 0.0;
        return k.cwiseQuotient(q.diagonal());
    };
    r.tau_g_hat = extract(stats.q_gg, k_g, r.diagnostics.condition_qgg, "Q_gg",
                          r.diagnostics.offdiag_energy_tg);
    r.tau_b_hat = extract(stats.q_bb, k_b, r.diagnostics.condition_qbb, "Q_bb",
                          r.diagnostics.offdiag_energy_tb);

    auto flag = [&](const VectorXd& tau, const MatrixXd& q, const char* channel,
                    std::vector<bool>& valid) {
        valid.assign(static_cast<std::size_t>(m), true);
        for (Index k = 0; k < m; ++k) {
            if (!(std::isfinite(tau(k)) && tau(k) > 0.0)) {
                valid[static_cast<std::size_t>(k)] = false;
                std::ostringstream msg;
                msg << "tau_" << channel << " of load " << k + 1 << " is invalid (" << tau(k)
                    << "); Q_" << channel << channel << "(" << k + 1 << "," << k + 1
                    << ") = " << q(k, k);
                r.warnings.push_back(msg.str());
            }
        }
    };
    flag(r.tau_g_hat, stats.q_gg, "g", r.valid_g);
    flag(r.tau_b_hat, stats.q_bb, "b", r.valid_b);
    return r;
}

MatrixXd analytic_load_covariance(const VectorXd& tau_g, const VectorXd& tau_b,
                                  const LoadStaticCharacteristics& chars, const VectorXd& v) {
    const Index m = tau_g.size();
    MatrixXd c = MatrixXd::Zero(2 * m, 2 * m);
    for (Index k = 0; k < m; ++k) {
        const double v2 = v(k) * v(k);
        const double sp = chars.p_s(k) * chars.sigma_p(k);
        const double sq = chars.q_s(k) * chars.sigma_q(k);
        c(k, k) = 0.5 / tau_g(k) * sp * sp / v2;
        c(m + k, m + k) = 0.5 / tau_b(k) * sq * sq / v2;
    }
    return c;
}

LinearizedLoadSystem build_linearized_system(const NetworkModel& model,
                                             const SystemState& equilibrium,
                                             Linearization variant) {
    const Index m = model.load_count();
    const auto& pos = model.load_positions();
    LinearizedLoadSystem sys;
    sys.variant = variant;
    sys.a = MatrixXd::Zero(2 * m, 2 * m);
    sys.b = MatrixXd::Zero(2 * m, 2 * m);
    for (Index k = 0; k < m; ++k) {
        sys.b(k, k) = model.p_s()(k) * model.sigma_p()(k) / model.tau_g()(k);
        sys.b(m + k, m + k) = model.q_s()(k) * model.sigma_q()(k) / model.tau_b()(k);
    }

    if (variant == Linearization::approximate) {
        for (Index k = 0; k < m; ++k) {
            const double v = equilibrium.v(pos[static_cast<std::size_t>(k)]);
            sys.a(k, k) = -v * v / model.tau_g()(k);
            sys.a(m + k, m + k) = -v * v / model.tau_b()(k);
        }
        return sys;
    }

    AlgebraicOptions opts;
    // near the rounding floor of the largest admittance
    opts.tolerance = 1e-13 * std::max(1.0, model.ybus().cwiseAbs().maxCoeff());
    opts.max_iterations = 20;
    auto demand = [&](const SystemState& s) {
        const AlgebraicSolution alg = solve_algebraic(s, model, opts);
        VectorXd pq(2 * m);
        for (Index k = 0; k < m; ++k) {
            const double v2 = alg.v(pos[static_cast<std::size_t>(k)]) *
                              alg.v(pos[static_cast<std::size_t>(k)]);
            pq(k) = s.g(k) * v2;
            pq(m + k) = s.b(k) * v2;
        }
        return pq;
    };

    MatrixXd jac(2 * m, 2 * m);
    for (Index j = 0; j < 2 * m; ++j) {
        SystemState plus = equilibrium;
        SystemState minus = equilibrium;
        VectorXd& x_plus = j < m ? plus.g : plus.b;
        VectorXd& x_minus = j < m ? minus.g : minus.b;
        const Index idx = j < m ? j : j - m;
        const double h = 1e-5 * std::max(1.0, std::abs(x_plus(idx)));
        x_plus(idx) += h;
        x_minus(idx) -= h;
        try {
            jac.col(j) = (demand(plus) - demand(minus)) / (2.0 * h);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("exact linearization: ") + e.what());
        }
    }
    VectorXd inv_tau(2 * m);
    inv_tau << model.tau_g().cwiseInverse(), model.tau_b().cwiseInverse();
    sys.a = -(inv_tau.asDiagonal() * jac);
    return sys;
}

double percent_error(double actual, double estimate) {
    return std::abs(actual - estimate) / actual * 100.0;
}

void write_estimation_csv(const EstimationResult& result, const std::optional<TruthValues>& truth,
                          const std::filesystem::path& path) {
    using detail::format_double;
    auto out = detail::open_output(path);
    if (truth) {
        out << "bus,tau_g_true,tau_g_hat,err_g_pct,tau_b_true,tau_b_hat,err_b_pct\n";
    } else {
        out << "bus,tau_g_hat,tau_b_hat\n";
    }
    for (std::size_t k = 0; k < result.buses.size(); ++k) {
        const auto i = static_cast<Index>(k);
        out << result.buses[k] << ',';
        if (truth) {
            out << format_double(truth->tau_g(i)) << ',' << format_double(result.tau_g_hat(i)) << ','
                << format_double(percent_error(truth->tau_g(i), result.tau_g_hat(i))) << ','
                << format_double(truth->tau_b(i)) << ',' << format_double(result.tau_b_hat(i)) << ','
                << format_double(percent_error(truth->tau_b(i), result.tau_b_hat(i))) << '\n';
        } else {
            out << format_double(result.tau_g_hat(i)) << ',' << format_double(result.tau_b_hat(i))
                << '\n';
        }
    }
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string format_estimation_table(const EstimationResult& result,
                                    const std::optional<TruthValues>& truth) {
    std::string out;
    char line[160];
    if (truth) {
        std::snprintf(line, sizeof(line), "%-10s %14s %16s %9s\n", "", "actual (s)", "estimated (s)",
                      "error");
    } else {
        std::snprintf(line, sizeof(line), "%-10s %16s\n", "", "estimated (s)");
    }
    out += line;
    auto rows = [&](const char* channel, const VectorXd& hat, const VectorXd* actual) {
        for (std::size_t k = 0; k < result.buses.size(); ++k) {
            const auto i = static_cast<Index>(k);
            const std::string name = std::string("tau_") + channel + std::to_string(result.buses[k]);
            if (actual) {
                std::snprintf(line, sizeof(line), "%-10s %14.4f %16.4f %8.2f%%\n", name.c_str(),
                              (*actual)(i), hat(i), percent_error((*actual)(i), hat(i)));
            } else {
                std::snprintf(line, sizeof(line), "%-10s %16.4f\n", name.c_str(), hat(i));
            }
            out += line;
        }
    };
    rows("g", result.tau_g_hat, truth ? &truth->tau_g : nullptr);
    rows("b", result.tau_b_hat, truth ? &truth->tau_b : nullptr);
    for (const auto& w : result.warnings) out += "warning: " + w + "\n";
    return out;
}

}  // namespace ambient
