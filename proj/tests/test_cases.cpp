#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <string>

#include "ambient/cases.hpp"
#include "ambient/errors.hpp"
#include "ambient/estimator.hpp"
#include "ambient/grid.hpp"
#include "ambient/lyapunov.hpp"
#include "support.hpp"

using namespace ambient;

namespace {

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("9-bus load parameters") {
    const NetworkCase c = builtin_wscc9();
    CHECK(c.bus_count() == 9);
    CHECK(c.load_count() == 3);
    CHECK(c.load_at(1).tau_g == 1.0);
    CHECK(c.load_at(2).tau_g == 3.0);
    CHECK(c.load_at(3).tau_g == 0.2);
    CHECK(c.load_at(1).tau_b == 5.0);
    CHECK(c.load_at(2).tau_b == 7.0);
    CHECK(c.load_at(3).tau_b == 0.8);
    for (const auto& l : c.dynamic_loads) {
        CHECK(std::pow(l.p_s * l.sigma_p, 2) == doctest::Approx(0.0025).epsilon(1e-12));
        CHECK(std::pow(l.q_s * l.sigma_q, 2) == doctest::Approx(0.0025).epsilon(1e-12));
    }
    CHECK(c.monitored_buses == std::vector<int>{1, 2, 3});
}

TEST_CASE("39-bus load parameters") {
    const NetworkCase c = builtin_ieee39();
    CHECK(c.bus_count() == 39);
    CHECK(c.load_count() == 10);
    CHECK(c.generators.size() == 10);
    CHECK(c.load_at(1).tau_g == 0.1);
    CHECK(c.load_at(10).tau_b == 5.0);
    for (const auto& l : c.dynamic_loads) {
        CHECK(std::abs(l.p_s) >= 0.1);
        CHECK(std::abs(l.q_s) >= 0.1);
        CHECK(std::pow(l.p_s * l.sigma_p, 2) == doctest::Approx(0.0025).epsilon(1e-12));
    }
}

TEST_CASE("built-in cases pass the load-time checks") {
    for (const NetworkCase& c : {builtin_wscc9(), builtin_ieee39(), builtin_stiff_bus(1.0, 5.0)}) {
        CAPTURE(c.name);
        CHECK_NOTHROW(validate_case(c));
        CHECK_NOTHROW(validate_case_numerics(c));
        const NetworkModel model(c);
        const auto sys = build_linearized_system(model, model.equilibrium(), Linearization::exact);
        CHECK(is_hurwitz(sys.a));
        CHECK(model.power_flow().max_mismatch <= 1e-8);
    }
}

TEST_CASE("case file round trip") {
    const auto dir = test_support::scratch_dir("case_io");
    for (const NetworkCase& c : {builtin_wscc9(), builtin_ieee39()}) {
        CAPTURE(c.name);
        const auto path = dir / (c.name + ".json");
        save_case(c, path);
        const NetworkCase back = load_case(path);
        CHECK(back == c);
        save_case(back, dir / "again.json");
        CHECK(test_support::slurp(path) == test_support::slurp(dir / "again.json"));
    }
    const NetworkCase from_file = resolve_case((dir / "wscc9.json").string());
    CHECK(from_file == builtin_wscc9());
}

TEST_CASE("case file validation names the problem") {
    const auto dir = test_support::scratch_dir("case_bad");
    nlohmann::json base = case_to_json(builtin_wscc9());

    SUBCASE("negative time constant") {
        nlohmann::json j = base;
        j["dynamic_loads"][1]["tau_g"] = -1.0;
        std::ofstream(dir / "neg.json") << j.dump(2);
        const std::string msg = error_of([&] { (void)load_case(dir / "neg.json"); });
        CHECK(msg.find("tau_g") != std::string::npos);
        CHECK(msg.find("bus 2") != std::string::npos);
    }
    SUBCASE("missing slack") {
        nlohmann::json j = base;
        for (auto& b : j["buses"]) {
            if (b["kind"] == "slack") b["kind"] = "generator";
        }
        std::ofstream(dir / "noslack.json") << j.dump(2);
        const std::string msg = error_of([&] { (void)load_case(dir / "noslack.json"); });
        CHECK(msg.find("slack") != std::string::npos);
        CHECK_THROWS_AS(load_case(dir / "noslack.json"), ConfigError);
    }
    SUBCASE("missing field") {
        nlohmann::json j = base;
        j["generators"][0].erase("inertia");
        std::ofstream(dir / "nofield.json") << j.dump(2);
        const std::string msg = error_of([&] { (void)load_case(dir / "nofield.json"); });
        CHECK(msg.find("inertia") != std::string::npos);
    }
    SUBCASE("load on a generator bus") {
        NetworkCase c = builtin_wscc9();
        c.dynamic_loads[0].bus = 7;
        CHECK_THROWS_AS(validate_case(c), ConfigError);
    }
    SUBCASE("malformed JSON") {
        std::ofstream(dir / "broken.json") << "{\"buses\": [";
        CHECK_THROWS_AS(load_case(dir / "broken.json"), ConfigError);
    }
}

TEST_CASE("unknown case name") {
    const std::string msg = error_of([] { (void)resolve_case("missing.json"); });
    CHECK(msg.find("case not found") != std::string::npos);
}

TEST_CASE("bus kind names") {
    for (const BusKind k : {BusKind::slack, BusKind::generator, BusKind::load_dynamic, BusKind::load_static}) {
        CHECK(bus_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(bus_kind_from_string("pv"), ConfigError);
}

TEST_CASE("noise intensity rule") {
    CHECK(noise_intensity_for(1.25) == doctest::Approx(0.04));
    CHECK(std::pow(-0.5 * noise_intensity_for(-0.5), 2) == doctest::Approx(0.0025));
}
