#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <random>

#include "shiftsr/errors.hpp"
#include "shiftsr/schedule.hpp"

using namespace shiftsr;
using nn::Shape;
using nn::Tensor;

TEST_CASE("build endpoints and monotonicity") {
    ScheduleConfig cfg;  // T=15, eta_min=0.04, eta_max=0.999, kappa=2, geometric
    Schedule s = Schedule::build(cfg);
    CHECK(s.steps() == 15);
    CHECK(s.etas().size() == 16);
    CHECK(s.eta(1) == doctest::Approx(0.04).epsilon(1e-14));
    CHECK(s.eta(15) == doctest::Approx(0.999).epsilon(1e-14));
    CHECK(s.eta(0) <= 1e-4);
    CHECK(s.eta(0) > 0.0);
    for (int t = 1; t <= 15; ++t) CHECK(s.eta(t) > s.eta(t - 1));
}

TEST_CASE("geometric form spaces sqrt eta by a constant ratio") {
    Schedule s = Schedule::build(ScheduleConfig{});
    const double r = std::sqrt(s.eta(2)) / std::sqrt(s.eta(1));
    for (int t = 2; t <= 15; ++t)
        CHECK(std::sqrt(s.eta(t)) / std::sqrt(s.eta(t - 1)) == doctest::Approx(r).epsilon(1e-10));
}

TEST_CASE("linear form spaces eta evenly") {
    ScheduleConfig cfg;
    cfg.form = ScheduleForm::Linear;
    Schedule s = Schedule::build(cfg);
    const double d = s.eta(2) - s.eta(1);
    for (int t = 2; t <= 15; ++t)
        CHECK(s.eta(t) - s.eta(t - 1) == doctest::Approx(d).epsilon(1e-10));
    CHECK(s.eta(1) == doctest::Approx(0.04));
    CHECK(s.eta(15) == doctest::Approx(0.999));
}

TEST_CASE("single step schedule") {
    ScheduleConfig cfg;
    cfg.steps = 1;
    Schedule s = Schedule::build(cfg);
    CHECK(s.etas().size() == 2);
    CHECK(s.eta(1) == doctest::Approx(0.999).epsilon(1e-14));
    CHECK(s.eta(0) <= 1e-4);
}

TEST_CASE("build rejects invalid configurations") {
    auto bad = [](auto mutate) {
        ScheduleConfig cfg;
        mutate(cfg);
        CHECK_THROWS_AS(Schedule::build(cfg), ConfigError);
    };
    bad([](ScheduleConfig& c) { c.steps = 0; });
    bad([](ScheduleConfig& c) { c.eta_min = 0.5; c.eta_max = 0.4; });
    bad([](ScheduleConfig& c) { c.eta_min = 0.0; });
    bad([](ScheduleConfig& c) { c.eta_max = 1.0001; });
    bad([](ScheduleConfig& c) { c.eta_max = 0.9; });  // terminal shift must reach ~1
    bad([](ScheduleConfig& c) { c.kappa = 0.0; });
    bad([](ScheduleConfig& c) { c.kappa = -1.0; });
}

TEST_CASE("from_etas validates shape and order") {
    CHECK_THROWS_AS(Schedule::from_etas({0.5}, 2.0), ConfigError);
    CHECK_THROWS_AS(Schedule::from_etas({0.5, 0.5}, 2.0), ConfigError);
    CHECK_THROWS_AS(Schedule::from_etas({0.5, 0.4}, 2.0), ConfigError);
    CHECK_THROWS_AS(Schedule::from_etas({-0.1, 0.5}, 2.0), ConfigError);
    CHECK_THROWS_AS(Schedule::from_etas({0.1, 1.5}, 2.0), ConfigError);
    Schedule s = Schedule::from_etas({1e-6, 0.25, 1.0}, 2.0);
    CHECK(s.steps() == 2);
}

TEST_CASE("schedule form names round-trip") {
    CHECK(schedule_form_from_string("geometric_sqrt") == ScheduleForm::GeometricSqrt);
    CHECK(schedule_form_from_string("linear") == ScheduleForm::Linear);
    CHECK(to_string(ScheduleForm::GeometricSqrt) == "geometric_sqrt");
    CHECK(to_string(ScheduleForm::Linear) == "linear");
    CHECK_THROWS_AS(schedule_form_from_string("cosine"), ConfigError);
}

TEST_CASE("step coefficient closed forms") {
    SUBCASE("hand-evaluated case") {
        StepCoeffs c = step_coeffs(0.25, 1.0, 2.0);
        CHECK(c.m == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(c.j == doctest::Approx(-0.25).epsilon(1e-12));
        CHECK(c.k == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(c.k + c.m + c.j == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c.alpha == doctest::Approx(0.75).epsilon(1e-12));
        REQUIRE(c.weight.has_value());
        CHECK(*c.weight == doctest::Approx(0.375).epsilon(1e-12));
        CHECK(c.post_mean_xt == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(c.post_mean_x0 == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(c.post_var == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("equal etas give an identity step") {
        StepCoeffs c = step_coeffs(0.3, 0.3, 2.0);
        CHECK(c.m == doctest::Approx(1.0));
        CHECK(c.j == doctest::Approx(0.0));
        CHECK(c.k == doctest::Approx(0.0));
        CHECK(c.alpha == doctest::Approx(0.0));
    }
    SUBCASE("identities hold across a built schedule") {
        Schedule s = Schedule::build(ScheduleConfig{});
        for (int t = 1; t <= s.steps(); ++t) {
            StepCoeffs c = s.coeffs(t);
            CHECK(std::abs(c.k + c.m + c.j - 1.0) < 1e-9);
            CHECK(std::abs(c.m - std::sqrt(s.eta(t - 1) / s.eta(t))) < 1e-15);
            CHECK(std::abs(c.j - (s.eta(t - 1) - std::sqrt(s.eta(t - 1) * s.eta(t)))) < 1e-15);
            CHECK(c.alpha >= 0.0);
            CHECK(c.m > 0.0);
            CHECK(c.m < 1.0);
        }
        CHECK(!s.coeffs(1).weight.has_value());  // eta_0 is pinned near zero
        for (int t = 2; t <= s.steps(); ++t) {
            StepCoeffs c = s.coeffs(t);
            REQUIRE(c.weight.has_value());
            const double expect =
                c.alpha / (2.0 * s.kappa() * s.kappa() * s.eta(t - 1) * s.eta(t));
            CHECK(std::abs(*c.weight - expect) < 1e-15);
        }
        CHECK_THROWS_AS(s.coeffs(0), IndexError);
        CHECK_THROWS_AS(s.coeffs(16), IndexError);
    }
}

TEST_CASE("forward diffusion closed form") {
    Schedule s = Schedule::from_etas({1e-6, 0.25, 1.0}, 2.0);
    const Shape sh{1, 1, 2, 2};
    SUBCASE("hand-evaluated constants") {
        Tensor x0 = Tensor::zeros(sh);
        Tensor y = Tensor::full(sh, 1.0);
        Tensor eps = Tensor::full(sh, 1.0);
        Tensor xt = s.forward_diffuse(x0, y, 1, eps);  // 0.25 + 2*0.5*1 = 1.25
        for (double v : xt.v) CHECK(v == doctest::Approx(1.25).epsilon(1e-14));
    }
    SUBCASE("eta=1 with zero noise returns y") {
        std::mt19937_64 rng(4);
        Tensor x0 = Tensor::randn(sh, rng);
        Tensor y = Tensor::randn(sh, rng);
        Tensor xt = s.forward_diffuse(x0, y, 2, Tensor::zeros(sh));
        CHECK(xt.max_abs_diff(y) < 1e-15);
    }
    SUBCASE("init_state matches terminal forward mean when eta_T = 1") {
        std::mt19937_64 rng(5);
        Tensor x0 = Tensor::randn(sh, rng);
        Tensor y = Tensor::randn(sh, rng);
        CHECK(s.init_state(y, Tensor::zeros(sh)).max_abs_diff(y) < 1e-15);
        CHECK(s.init_state(y, Tensor::zeros(sh))
                  .max_abs_diff(s.forward_diffuse(x0, y, 2, Tensor::zeros(sh))) < 1e-15);
    }
    SUBCASE("init_state algebraic inverse recovers noise") {
        std::mt19937_64 rng(6);
        Tensor y = Tensor::randn(sh, rng);
        Tensor eps = Tensor::randn(sh, rng);
        Tensor xT = s.init_state(y, eps);
        const double sd = s.kappa() * std::sqrt(s.eta(2));
        for (std::size_t i = 0; i < eps.v.size(); ++i)
            CHECK((xT.v[i] - y.v[i]) / sd == doctest::Approx(eps.v[i]).epsilon(1e-12));
    }
    SUBCASE("hand-evaluated init_state") {
        Tensor y = Tensor::zeros(sh);
        Tensor eps = Tensor::full(sh, 1.0);
        Tensor xT = s.init_state(y, eps);  // 0 + 2*sqrt(1)*1
        for (double v : xT.v) CHECK(v == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("shape mismatch throws") {
        Tensor a = Tensor::zeros(sh);
        Tensor b = Tensor::zeros(Shape{1, 1, 2, 3});
        CHECK_THROWS_AS(s.forward_diffuse(a, b, 1, a), ShapeError);
        CHECK_THROWS_AS(s.init_state(a, b), ShapeError);
    }
}

TEST_CASE("mean trajectory closure identity") {
    Schedule s = Schedule::build(ScheduleConfig{});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        const double x0 = u(rng), y = u(rng);
        for (int t = 1; t <= s.steps(); ++t) {
            StepCoeffs c = s.coeffs(t);
            const double xt = x0 + s.eta(t) * (y - x0);
            const double stepped = c.k * x0 + c.m * xt + c.j * y;
            const double expect = x0 + s.eta(t - 1) * (y - x0);
            CHECK(std::abs(stepped - expect) < 1e-9);
        }
    }
}

TEST_CASE("deterministic trajectory telescopes to the clean signal") {
    for (int T : {1, 5, 15}) {
        ScheduleConfig cfg;
        cfg.steps = T;
        Schedule s = Schedule::build(cfg);
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        const double x0 = u(rng), y = u(rng);
        double state = x0 + s.eta(T) * (y - x0);  // mean of the terminal marginal
        for (int t = T; t >= 1; --t) {
            StepCoeffs c = s.coeffs(t);
            state = c.k * x0 + c.m * state + c.j * y;
        }
        const double expect = x0 + s.eta(0) * (y - x0);
        CHECK(std::abs(state - expect) < 1e-5);
        CHECK(std::abs(state - x0) < 1e-4);  // eta_0 ~ 0 makes the endpoint ~x0
    }
}

TEST_CASE("noise amplitude contracts as sqrt(eta_t / eta_T)") {
    Schedule s = Schedule::build(ScheduleConfig{});
    const int T = s.steps();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double x0 = u(rng), y = u(rng), eps = 1.0;
    const double init_noise = s.kappa() * std::sqrt(s.eta(T)) * eps;
    double state = x0 + s.eta(T) * (y - x0) + init_noise;
    for (int t = T; t >= 1; --t) {
        StepCoeffs c = s.coeffs(t);
        state = c.k * x0 + c.m * state + c.j * y;
        const double mean = x0 + s.eta(t - 1) * (y - x0);
        const double residual = state - mean;
        const double expect = s.kappa() * std::sqrt(s.eta(t - 1)) * eps;
        CHECK(std::abs(residual - expect) < 1e-12);
        CHECK(std::abs(residual / init_noise - std::sqrt(s.eta(t - 1) / s.eta(T))) < 1e-6);
    }
}

TEST_CASE("decimal serialization round-trips bit-exactly") {
    Schedule s = Schedule::build(ScheduleConfig{});
    auto dec = s.etas_decimal();
    REQUIRE(dec.size() == s.etas().size());
    std::vector<double> parsed;
    for (const auto& str : dec) parsed.push_back(std::strtod(str.c_str(), nullptr));
    Schedule r = Schedule::from_etas(parsed, s.kappa());
    for (int t = 0; t <= s.steps(); ++t) CHECK(r.eta(t) == s.eta(t));
}
