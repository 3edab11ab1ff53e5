#include "pnsim/errors.hpp"
#include "pnsim/optics.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace pnsim;
using namespace pnsim::optics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLambda = 1.55e-6;

// Steady state by circulating the ring field through explicit couplers and half-ring
// waveguides until it stops changing. Independent of the closed form.
MrrPorts circulate(const OpticalField& in, const OpticalField& add, const MrrParams& p, IndexShift dn = {}) {
    WaveguideParams half = p.waveguide;
    half.length *= 0.5;
    const double lambda = in.wavelength;
    OpticalField arriving_in{0.0, 0.0, lambda};  // ring field arriving at the input coupler
    MrrPorts out;
    for (int it = 0; it < 2000000; ++it) {
        auto [thru, b1] = couple(in, arriving_in, p.coupler_in);
        const OpticalField arriving_drop = propagate_waveguide(b1, half, dn);
        auto [drop, b2] = couple(add, arriving_drop, p.coupler_drop);
        const OpticalField next = propagate_waveguide(b2, half, dn);
        const double change = std::abs(next.amplitude() - arriving_in.amplitude());
        arriving_in = next;
        out = {thru, drop};
        if (change < 1e-16 && it > 10) {
            break;
        }
    }
    return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("waveguide identity, loss and full-wave phase") {
    const OpticalField f{0.01, -0.02, kLambda};
    const auto same = propagate_waveguide(f, {2.4, 0.0, 0.0});
    CHECK(same.e_real == f.e_real);
    CHECK(same.e_imag == f.e_imag);

    const double L = 10e-6;
    const double alpha = 1.0 / (2.0 * kPi / kLambda * L);
    const auto lossy = propagate_waveguide(f, {2.4, alpha, L});
    CHECK_THAT(lossy.power(), WithinRel(f.power() * std::exp(-2.0), 1e-12));

    const auto wave = propagate_waveguide(f, {2.4, 0.0, kLambda / 2.4});
    CHECK_THAT(wave.e_real, WithinAbs(f.e_real, 1e-15));
    CHECK_THAT(wave.e_imag, WithinAbs(f.e_imag, 1e-15));
    CHECK(wave.wavelength == f.wavelength);
}

TEST_CASE("waveguide rejects non-finite input") {
    CHECK_THROWS_AS(propagate_waveguide({NAN, 0.0, kLambda}, {2.4, 0.0, 1e-6}), InvalidInputError);
    CHECK_THROWS_AS(propagate_waveguide({1.0, 0.0, kLambda}, {2.4, -1e-4, 1e-6}), InvalidParamsError);
}

TEST_CASE("coupler examples") {
    const OpticalField e{0.03, 0.01, kLambda};
    const OpticalField dark{0.0, 0.0, kLambda};
    auto [a1, a2] = couple(e, dark, CouplerParams{0.0});
    CHECK(a1.amplitude() == e.amplitude());
    CHECK(a2.power() == 0.0);

    auto [b1, b2] = couple(e, dark, CouplerParams{1.0});
    CHECK_THAT(b1.power(), WithinAbs(0.0, 1e-20));
    CHECK_THAT(std::abs(b2.amplitude() - Complex(0, -1) * e.amplitude()), WithinAbs(0.0, 1e-16));

    const auto one_mw = OpticalField::from_power(1e-3, kLambda);
    auto [c1, c2] = couple(one_mw, dark, CouplerParams{1.0 / std::sqrt(2.0)});
    CHECK_THAT(c1.power(), WithinRel(0.5e-3, 1e-12));
    CHECK_THAT(c2.power(), WithinRel(0.5e-3, 1e-12));

    CHECK_THROWS_AS(couple(e, OpticalField{0.0, 0.0, kLambda + 1e-9}, CouplerParams{0.5}), ChannelMismatchError);
}

TEST_CASE("coupler unitarity over random draws") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0), k01(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const OpticalField a{u(rng), u(rng), kLambda};
        const OpticalField b{u(rng), u(rng), kLambda};
        auto [o1, o2] = couple(a, b, CouplerParams{k01(rng)});
        const double pin = a.power() + b.power();
        REQUIRE(rel_err(o1.power() + o2.power(), pin) <= 1e-12);
    }
}

TEST_CASE("waveguide passivity") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0), alpha(0.0, 1e-3), len(0.0, 1e-3);
    for (int i = 0; i < 1000; ++i) {
        const OpticalField a{u(rng), u(rng), kLambda};
        const double al = i % 5 == 0 ? 0.0 : alpha(rng);
        const auto o = propagate_waveguide(a, {2.4, al, len(rng)});
        if (al == 0.0) {
            REQUIRE(rel_err(o.power(), a.power()) <= 1e-12);
        } else {
            REQUIRE(o.power() <= a.power() * (1.0 + 1e-15));
        }
    }
}

TEST_CASE("ring on resonance: critical coupling sends everything to drop") {
    const double r = radius_for_resonance(8e-6, 2.4, kLambda);
    const auto p = MrrParams::make(r, 0.3, 0.3, 2.4, 0.0);
    CHECK_THAT(std::remainder(round_trip_phase(p, kLambda), 2.0 * kPi), WithinAbs(0.0, 1e-8));
    const auto in = OpticalField::from_power(1e-3, kLambda);
    const auto ports = mrr_transfer(in, {0.0, 0.0, kLambda}, p);
    CHECK_THAT(ports.drop.power(), WithinRel(1e-3, 1e-9));
    CHECK_THAT(ports.thru.power(), WithinAbs(0.0, 1e-15));
}

TEST_CASE("ring far off resonance passes the input") {
    const double r = radius_for_resonance(8e-6, 2.4, kLambda);
    // Half a free spectral range away: round-trip phase pi.
    const double circumference = 2.0 * kPi * r;
    const double dn = kLambda / (2.0 * circumference);
    const auto p = MrrParams::make(r, 0.05, 0.05, 2.4, 0.0);
    const auto in = OpticalField::from_power(1e-3, kLambda);
    const auto ports = mrr_transfer(in, {0.0, 0.0, kLambda}, p, {dn, 0.0});
    CHECK(ports.thru.power() > 0.999e-3);
    CHECK(ports.drop.power() < 1e-6);
    const auto oracle = circulate(in, {0.0, 0.0, kLambda}, p, {dn, 0.0});
    CHECK(std::abs(ports.thru.amplitude() - oracle.thru.amplitude()) < 1e-9);
    CHECK(std::abs(ports.drop.amplitude() - oracle.drop.amplitude()) < 1e-9);
}

TEST_CASE("ring closed form matches circulation oracle and is passive") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> k(0.05, 1.0), radius(5e-6, 12e-6), loss_db(0.0, 1.0), u(-0.05, 0.05),
        dn(-1e-3, 1e-3), lam(1.5e-6, 1.6e-6);
    int cases = 0;
    for (int i = 0; i < 1200; ++i) {
        const double R = radius(rng);
        const double lambda = lam(rng);
        const bool lossless = i % 10 == 0;
        const double alpha = lossless ? 0.0 : alpha_for_round_trip_loss(loss_db(rng), R, lambda);
        auto p = MrrParams::make(R, k(rng), k(rng), 2.4, alpha);
        const OpticalField in{u(rng), u(rng), lambda};
        const OpticalField add{i % 3 == 0 ? u(rng) : 0.0, i % 3 == 0 ? u(rng) : 0.0, lambda};
        const IndexShift shift{dn(rng), 0.0};
        const auto closed = mrr_transfer(in, add, p, shift);
        const auto oracle = circulate(in, add, p, shift);
        REQUIRE(std::abs(closed.thru.amplitude() - oracle.thru.amplitude()) < 1e-9);
        REQUIRE(std::abs(closed.drop.amplitude() - oracle.drop.amplitude()) < 1e-9);
        const double pin = in.power() + add.power();
        const double pout = closed.thru.power() + closed.drop.power();
        if (lossless) {
            REQUIRE(rel_err(pout, pin) <= 1e-9);
        } else {
            REQUIRE(pout <= pin * (1.0 + 1e-12));
        }
        REQUIRE(closed.thru.wavelength == lambda);
        REQUIRE(closed.drop.wavelength == lambda);
        ++cases;
    }
    CHECK(cases >= 1000);
}

TEST_CASE("ring with net gain is rejected") {
    const auto p = MrrParams::make(8e-6, 0.1, 0.1, 2.4, 0.0);
    const IndexShift gain{0.0, -1e-4};
    CHECK_THROWS_AS(mrr_transfer(OpticalField::from_power(1e-3, kLambda), {0.0, 0.0, kLambda}, p, gain),
                    InvalidParamsError);
}

TEST_CASE("default ring loss is about 0.1 dB per round trip") {
    const double alpha = alpha_for_round_trip_loss(0.1, 8e-6, 1.55e-6);
    CHECK_THAT(alpha, WithinRel(kDefaultRingAlpha0, 0.01));
    const auto p = MrrParams::make(8e-6, 0.3, 0.3, 2.4, alpha);
    CHECK_THAT(-20.0 * std::log10(round_trip_amplitude(p, 1.55e-6)), WithinRel(0.1, 1e-9));
}

TEST_CASE("resonance wavelength and radius helper agree") {
    const double r = radius_for_resonance(8e-6, 2.4, 1548.7e-9, 1e-4);
    const auto p = MrrParams::make(r, 0.3, 0.3, 2.4, 0.0);
    CHECK_THAT(resonance_wavelength(p, 1548.7e-9, {1e-4, 0.0}), WithinRel(1548.7e-9, 1e-12));
    CHECK(std::abs(r - 8e-6) < 1e-7);
}

TEST_CASE("WDM bus invariants") {
    WdmBus bus;
    bus.add(OpticalField::from_power(0.3e-3, 1550e-9));
    bus.add(OpticalField::from_power(0.7e-3, 1552e-9));
    CHECK_THAT(bus.total_power(), WithinRel(1e-3, 1e-12));
    CHECK_THROWS_AS(bus.add(OpticalField::from_power(1e-3, 1550e-9 + 0.5e-12)), ChannelMismatchError);
    bus.add(OpticalField::from_power(1e-3, 1550e-9 + 2e-12));
    CHECK(bus.size() == 3);
    CHECK(bus.find(1552e-9).value() == 1);
    CHECK(bus.channel_power(1560e-9) == 0.0);
}

TEST_CASE("bus_map") {
    const WdmBus empty;
    CHECK(bus_map(empty, [](const OpticalField& f) { return f; }).empty());

    const double l1 = 1548.7e-9;
    const double l2 = l1 + 2.35e-9;
    const WdmBus bus{OpticalField::from_power(1e-3, l1), OpticalField::from_power(1e-3, l2)};
    CHECK(bus_map(bus, [](const OpticalField& f) { return f; }) == bus);

    const auto ring = MrrParams::make(radius_for_resonance(8e-6, 2.4, l1), 0.3, 0.3, 2.4, kDefaultRingAlpha0);
    const auto drop = bus_map(bus, [&](const OpticalField& f) {
        return mrr_transfer(f, {0.0, 0.0, f.wavelength}, ring).drop;
    });
    const auto thru = bus_map(bus, [&](const OpticalField& f) {
        return mrr_transfer(f, {0.0, 0.0, f.wavelength}, ring).thru;
    });
    REQUIRE(drop.size() == 2);
    CHECK(drop.channels()[0].wavelength == l1);
    CHECK(drop.channels()[0].power() > 0.75e-3);
    CHECK(drop.channels()[1].power() < 0.02e-3);
    CHECK(thru.channels()[1].power() > 0.9e-3);
    const auto ports = mrr_bus(bus, WdmBus{}, ring);
    CHECK_THAT(ports.drop.channels()[0].power(), WithinRel(drop.channels()[0].power(), 1e-12));
}

TEST_CASE("bus coupler treats missing channels as dark") {
    const WdmBus a{OpticalField::from_power(1e-3, 1550e-9)};
    const WdmBus b{OpticalField::from_power(2e-3, 1551e-9)};
    auto [o1, o2] = couple_bus(a, b, CouplerParams{1.0 / std::sqrt(2.0)});
    CHECK(o1.size() == 2);
    CHECK_THAT(o1.total_power() + o2.total_power(), WithinRel(3e-3, 1e-12));
    CHECK_THAT(o2.channel_power(1551e-9), WithinRel(1e-3, 1e-12));
}

TEST_CASE("merge adds equal wavelengths coherently") {
    const WdmBus a{OpticalField{0.01, 0.0, 1550e-9}};
    const WdmBus b{OpticalField{0.01, 0.0, 1550e-9}, OpticalField{0.0, 0.02, 1551e-9}};
    const auto m = merge({&a, &b});
    CHECK(m.size() == 2);
    CHECK_THAT(m.channel_power(1550e-9), WithinRel(4e-4, 1e-12));
}
