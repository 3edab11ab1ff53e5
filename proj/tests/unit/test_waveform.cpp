#include "pnsim/errors.hpp"
#include "pnsim/waveform.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace pnsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("triangular waveform") {
    const auto w = Waveform::triangular(1e6, 2.0, 1.0, 0.25);
    CHECK_THAT(w(0.0), WithinAbs(1.0, 1e-12));
    CHECK_THAT(w(0.25e-6), WithinAbs(3.0, 1e-9));
    CHECK_THAT(w(0.125e-6), WithinAbs(2.0, 1e-9));
    CHECK_THAT(w(0.625e-6), WithinAbs(2.0, 1e-9));
    CHECK_THAT(w(1.0e-6), WithinAbs(1.0, 1e-9));
    CHECK(w.range() == std::pair<double, double>{1.0, 3.0});
    CHECK_THROWS_AS(Waveform::triangular(1e6, 1.0, 0.0, 1.0).validate(), ConfigError);
    CHECK_THROWS_AS(Waveform::triangular(0.0, 1.0, 0.0, 0.5).validate(), ConfigError);
}

TEST_CASE("sine and AM carrier") {
    const auto s = Waveform::sine(1e9, 0.5, 1.0);
    CHECK_THAT(s(0.25e-9), WithinAbs(1.5, 1e-12));
    const auto am = Waveform::am_carrier(900e6, 1.0, std::numbers::pi / 2);
    CHECK_THAT(am(0.0), WithinAbs(1.0, 1e-12));
    CHECK_THAT(am(0.5 / 900e6), WithinAbs(0.0, 1e-12));
    auto [lo, hi] = am.range();
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
}

TEST_CASE("square schedule") {
    const auto w = Waveform::square({{0.0, 1.0}, {5e-9, 0.0}, {10e-9, 0.5}}, 2.0, 0.1);
    CHECK_THAT(w(-1e-9), WithinAbs(0.1, 1e-15));
    CHECK_THAT(w(1e-9), WithinAbs(2.1, 1e-15));
    CHECK_THAT(w(5e-9), WithinAbs(0.1, 1e-15));
    CHECK_THAT(w(12e-9), WithinAbs(1.1, 1e-15));
    const auto ramped = Waveform::square({{0.0, 0.0}, {1e-9, 1.0}}, 1.0, 0.0, 0.2e-9);
    CHECK_THAT(ramped(1.1e-9), WithinAbs(0.5, 1e-9));
    CHECK_THROWS_AS(Waveform::square({{1.0, 0.0}, {0.5, 1.0}}).validate(), ConfigError);
}

TEST_CASE("piecewise linear") {
    const auto w = Waveform::pwl({{0.0, 0.0}, {1.0, 2.0}, {3.0, -2.0}});
    CHECK(w(-1.0) == 0.0);
    CHECK_THAT(w(0.5), WithinAbs(1.0, 1e-15));
    CHECK_THAT(w(2.0), WithinAbs(0.0, 1e-15));
    CHECK(w(5.0) == -2.0);
}

TEST_CASE("waveform JSON round trip") {
    for (const auto& w : {Waveform::constant(3.5), Waveform::triangular(1e5, 1e-3, 0.0, 0.3),
                          Waveform::sine(1e9, 1.0, 0.0, 0.3), Waveform::am_carrier(9e8, 0.8, 1.0),
                          Waveform::square({{0.0, 1.0}, {1e-9, 0.0}}, 1.0, 0.0, 1e-11),
                          Waveform::pwl({{0.0, 1.0}, {1.0, 2.0}})}) {
        const nlohmann::json j = w;
        const auto back = j.get<Waveform>();
        for (double t : {0.0, 1e-10, 3.3e-10, 7.7e-7}) {
            REQUIRE(back(t) == w(t));
        }
    }
    CHECK(nlohmann::json(2.0).get<Waveform>()(1.0) == 2.0);
    CHECK_THROWS_AS(nlohmann::json({{"kind", "sawtooth"}}).get<Waveform>(), ConfigError);
}
