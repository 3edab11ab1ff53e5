#include "pnsim/errors.hpp"
#include "pnsim/signal.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace pnsim;
using namespace pnsim::signal;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> sine(double f, double amp, double dt, std::size_t n, double offset = 0.0) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = offset + amp * std::sin(2 * std::numbers::pi * f * k * dt);
    return x;
}

double steady_amplitude(const std::vector<double>& y) {
    const auto tail = std::vector<double>(y.begin() + y.size() / 2, y.end());
    const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
    return 0.5 * (*hi - *lo);
}

}  // namespace

TEST_CASE("high-pass rejects DC") {
    std::vector<double> x(20000, 3.0);
    x[0] = 0.0;  // switched on at the first sample
    auto y = highpass(x, 1e-12, 400e6);
    CHECK(std::abs(y.back()) < 1e-6);
}

TEST_CASE("high-pass magnitude matches the analytic first-order response") {
    const double fc = 400e6, dt = 1e-12;
    for (double ratio : {10.0, 1.0, 0.5}) {
        const double f = ratio * fc;
        auto y = highpass(sine(f, 1.0, dt, 200000), dt, fc);
        const double expect = f / std::hypot(f, fc);
        CHECK_THAT(steady_amplitude(y), WithinRel(expect, ratio == 10.0 ? 0.01 : 0.02));
    }
    CHECK_THROWS_AS(highpass(std::vector<double>(10, 0.0), 1e-12, 5e11), ConfigError);
}

TEST_CASE("FFT peak recovers an injected sine within one bin") {
    const double dt = 1e-12;
    const std::size_t n = 40000;
    const double df = 1.0 / (n * dt);
    for (double f : {900e6, 1.8e9, 1.234e9}) {
        auto x = sine(f, 0.3, dt, n, 2.0);
        auto pk = fft_peak(x, dt);
        CHECK(std::abs(pk.frequency - f) <= df);
    }
    auto x = sine(900e6, 0.3, dt, n);
    CHECK_THAT(fft_peak(x, dt).amplitude, WithinRel(0.3, 1e-6));
    CHECK_THAT(line_amplitude(x, dt, 900e6), WithinRel(0.3, 1e-6));
    CHECK(line_amplitude(x, dt, 1.8e9) < 1e-9);
}

TEST_CASE("polynomial fit recovers exact coefficients and reports RMSE") {
    std::vector<double> x, y;
    for (int k = 0; k < 50; ++k) {
        x.push_back(0.2 + 0.01 * k);
        y.push_back(1.5 - 2.0 * x.back() + 0.7 * x.back() * x.back());
    }
    auto f = polyfit(x, y, 2);
    CHECK_THAT(f.coeffs[0], WithinAbs(1.5, 1e-9));
    CHECK_THAT(f.coeffs[1], WithinAbs(-2.0, 1e-9));
    CHECK_THAT(f.coeffs[2], WithinAbs(0.7, 1e-9));
    CHECK(f.rmse < 1e-12);
    CHECK_THAT(f.r_squared, WithinAbs(1.0, 1e-12));

    // Linear fit to a parabola: residual RMS known in closed form for a symmetric grid.
    std::vector<double> u, v;
    for (int k = -100; k <= 100; ++k) {
        u.push_back(k / 100.0);
        v.push_back(u.back() * u.back());
    }
    auto lin = polyfit(u, v, 1);
    double mean = 0.0, m4 = 0.0;
    for (double t : u) {
        mean += t * t;
        m4 += std::pow(t, 4);
    }
    mean /= u.size();
    m4 /= u.size();
    CHECK_THAT(lin.rmse, WithinRel(std::sqrt(m4 - mean * mean), 1e-9));
    CHECK_THAT(lin.rmse_percent, WithinRel(100.0 * lin.rmse, 1e-12));
    CHECK_THROWS_AS(polyfit({1.0, 2.0}, {1.0, 2.0}, 2), FitError);
}

TEST_CASE("loop area of simple polygons") {
    CHECK_THAT(loop_area({0, 1, 1, 0}, {0, 0, 1, 1}), WithinAbs(1.0, 1e-15));
    CHECK_THAT(loop_area({0, 1, 0}, {0, 0, 1}), WithinAbs(0.5, 1e-15));
    // Retraced curve encloses nothing.
    CHECK_THAT(loop_area({0, 0.5, 1, 0.5}, {0, 0.3, 1, 0.3}), WithinAbs(0.0, 1e-15));
}

TEST_CASE("sigmoid fit recovers parameters from noisy samples in either orientation") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1e-3);
    for (double beta : {-6.0, 4.0}) {
        ctrnn::SigmoidParams truth{0.8, beta, 0.05, 0.3};
        std::vector<double> x, y;
        for (int k = 0; k < 400; ++k) {
            x.push_back(-1.0 + 2.5 * k / 399.0);
            y.push_back(ctrnn::sigmoid(x.back(), truth) + noise(rng));
        }
        auto f = fit_sigmoid(x, y);
        CHECK_THAT(f.params.alpha, WithinRel(0.8, 0.02));
        CHECK_THAT(f.params.beta, WithinRel(beta, 0.03));
        CHECK_THAT(f.params.gamma, WithinAbs(0.05, 0.01));
        CHECK_THAT(f.params.s0, WithinAbs(0.3, 0.01));
        CHECK(f.rmse < 2e-3);
    }
    CHECK_THROWS_AS(fit_sigmoid({1, 1, 1, 1, 1}, {0, 1, 2, 3, 4}), FitError);
}

TEST_CASE("63% rise time of a first-order step") {
    std::vector<double> t, y;
    const double tau = 120e-12;
    for (int k = 0; k < 5000; ++k) {
        t.push_back(k * 0.5e-12);
        y.push_back(t.back() < 100e-12 ? 0.0 : 1.0 - std::exp(-(t.back() - 100e-12) / tau));
    }
    CHECK_THAT(rise_time_63(t, y, 100e-12), WithinRel(tau, 0.01));
}
