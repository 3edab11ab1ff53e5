#include "pnsim/calibration.hpp"
#include "pnsim/errors.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace pnsim;
using namespace pnsim::calibration;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const WeightMap& default_map() {
    static const WeightMap map = [] {
        Rig rig(BankSpec{}, NeuronParams{});
        return calibrate(rig);
    }();
    return map;
}

}  // namespace

TEST_CASE("spectrum shows one resonance per ring between the channel markers") {
    BankSpec bank;
    Rig rig(bank, NeuronParams{});
    // One channel spacing of margin on either side of the grid.
    auto sp = spectrum_sweep(rig, bank.wavelength(-1), bank.wavelength(bank.channel_count));
    for (bool ok : sp.valid) REQUIRE(ok);
    auto peaks = sp.peaks(0.05);
    REQUIRE(peaks.size() == 5);
    for (int i = 0; i < 5; ++i) {
        // Untuned rings sit blue of their channel: heaters only red-shift.
        CHECK(peaks[i] < bank.wavelength(i));
        CHECK(peaks[i] > bank.wavelength(i - 1));
    }
    CHECK_THROWS_AS(([&] {
                        rig.set_heater(0, 1e-4);
                        spectrum_sweep(rig, 1.55e-6, 1.56e-6, 10);
                    }()),
                    ContractViolation);
}

TEST_CASE("a receiver without rings sees a flat spectrum") {
    circuit::Netlist nl;
    nl.add(circuit::Laser{"probe", "in", 1.55e-6, 1e-3, std::nullopt});
    nl.add(circuit::Photodiode{"pd", "j", "gnd", "in", {}});
    nl.add(circuit::PnModulator{"mod", "j", "gnd", {}});
    nl.add(circuit::Resistor{"r", "j", "gnd", 1e3});
    Rig rig(std::move(nl), BankSpec{}, "probe", "mod", {}, 1e-3);
    auto sp = spectrum_sweep(rig, 1.54e-6, 1.56e-6, 50);
    const auto [lo, hi] = std::minmax_element(sp.voltage.begin(), sp.voltage.end());
    CHECK(*hi - *lo < 1e-12);
    CHECK(*lo > 0.1);  // the photocurrent is there, just not wavelength dependent
    CHECK(sp.peaks(1e-6).empty());
}

TEST_CASE("junction voltage deviation scales with probe power") {
    BankSpec bank;
    Rig rig(bank, NeuronParams{});
    for (double lam : {bank.wavelength(0), bank.wavelength(2) - 0.4e-9, bank.wavelength(4) + 0.3e-9}) {
        rig.set_probe(lam, 0.5e-3);
        const double v1 = rig.junction_voltage();
        rig.set_probe(lam, 1e-3);
        const double v2 = rig.junction_voltage();
        CHECK(std::abs(v2) > std::abs(v1));
        // The DC receiver is linear in photocurrent.
        CHECK_THAT(v2, WithinRel(2.0 * v1, 1e-6));
    }
}

TEST_CASE("resonance current is interior and the search fails on a truncated range") {
    Rig rig(BankSpec{}, NeuronParams{});
    auto sw = current_sweep(rig, 0);
    const double i_res = resonance_current(sw);
    CHECK(i_res > 0.0);
    CHECK(i_res < 1e-3);
    // Refinement lands within one grid step of the sampled maximum.
    const auto k = std::max_element(sw.voltage.begin(), sw.voltage.end()) - sw.voltage.begin();
    CHECK(std::abs(i_res - sw.current[k]) <= sw.current[1] - sw.current[0]);

    auto narrow = current_sweep(rig, 0, 0.0, 0.5 * i_res, 50);
    CHECK_THROWS_AS(resonance_current(narrow), CalibrationRangeError);
    auto beyond = current_sweep(rig, 0, 1.2 * i_res, 1e-3, 50);
    CHECK_THROWS_AS(resonance_current(beyond), CalibrationRangeError);
}

TEST_CASE("resonance already at zero current") {
    CurrentSweep s;
    for (int k = 0; k < 20; ++k) {
        s.current.push_back(k * 5e-5);
        s.voltage.push_back(1.0 / (1.0 + k * k));
    }
    CHECK(resonance_current(s) == 0.0);
}

TEST_CASE("parabolic refinement recovers an off-grid peak") {
    CurrentSweep s;
    const double peak = 0.4123e-3;
    for (int k = 0; k <= 100; ++k) {
        s.current.push_back(k * 1e-5);
        s.voltage.push_back(1.0 - std::pow((s.current.back() - peak) / 1e-4, 2));
    }
    CHECK_THAT(resonance_current(s), WithinAbs(peak, 1e-12));
}

TEST_CASE("weight map endpoints, zero crossing and monotonicity") {
    const auto& map = default_map();
    REQUIRE(map.channels.size() == 5);
    Rig rig(BankSpec{}, NeuronParams{});
    for (int ch = 0; ch < 5; ++ch) {
        const auto& c = map.channels[ch];
        CHECK(c.curve.front().first == -1.0);
        CHECK(c.curve.back().first == 1.0);
        CHECK(c.v_at_wneg1 > 0.0);
        CHECK(c.v_at_wpos1 == -c.v_at_wneg1);
        CHECK(c.resonance_current > 0.0);
        CHECK(c.resonance_current < 1e-3);
        CHECK_THAT(apply_weight(map, ch, -1.0), WithinRel(c.curve.front().second, 1e-12));
        CHECK_THAT(apply_weight(map, ch, 1.0), WithinRel(c.curve.back().second, 1e-12));

        double prev = apply_weight(map, ch, -1.0);
        for (int k = 1; k <= 400; ++k) {
            const double i = apply_weight(map, ch, -1.0 + k / 200.0);
            CHECK(i < prev);
            prev = i;
        }
        const double i0 = apply_weight(map, ch, 0.0), ih = apply_weight(map, ch, 0.5), i1 = apply_weight(map, ch, 1.0);
        CHECK(ih < i0);
        CHECK(ih > i1);

        // W = 0 sits on the 0 V crossing.
        rig.zero_heaters();
        rig.set_heater(ch, i0);
        rig.set_probe(map.bank.wavelength(ch));
        CHECK(std::abs(rig.junction_voltage()) < 0.01 * c.v_at_wneg1);
    }
    CHECK_THROWS_AS(apply_weight(map, 0, 1.01), WeightRangeError);
    CHECK_THROWS_AS(apply_weight(map, 0, -1.5), WeightRangeError);
    CHECK_THROWS_AS(apply_weight(map, 7, 0.0), InvalidInputError);
}

TEST_CASE("closed loop reproduces target weights") {
    const auto& map = default_map();
    Rig rig(BankSpec{}, NeuronParams{});
    std::vector<double> targets;
    for (int k = 0; k <= 18; ++k) targets.push_back(-0.9 + 0.1 * k);
    for (int ch = 0; ch < 5; ++ch) {
        auto r = closed_loop(rig, map, ch, targets);
        CHECK(r.max_error < 0.02);
        CHECK(r.r_squared > 0.99);
    }
}

TEST_CASE("recalibration is idempotent") {
    Rig rig(BankSpec{}, NeuronParams{});
    auto again = calibrate(rig);
    const auto& map = default_map();
    REQUIRE(again.channels.size() == map.channels.size());
    for (std::size_t ch = 0; ch < map.channels.size(); ++ch) {
        CHECK(again.channels[ch].resonance_current == map.channels[ch].resonance_current);
        for (std::size_t k = 0; k < map.channels[ch].curve.size(); ++k) {
            CHECK(again.channels[ch].curve[k] == map.channels[ch].curve[k]);
        }
    }
}

TEST_CASE("weight map survives a JSON round trip") {
    const auto& map = default_map();
    nlohmann::json j = map;
    auto back = nlohmann::json::parse(j.dump()).get<WeightMap>();
    CHECK(back.bank == map.bank);
    CHECK(back.probe_power == map.probe_power);
    for (std::size_t ch = 0; ch < map.channels.size(); ++ch) {
        CHECK(back.channels[ch].v_at_wneg1 == map.channels[ch].v_at_wneg1);
        CHECK(back.channels[ch].curve == map.channels[ch].curve);
    }
    for (double w : {-0.73, 0.0, 0.41}) CHECK(apply_weight(back, 2, w) == apply_weight(map, 2, w));

    auto broken = j;
    broken["per_channel"][1]["curve"][3][1] = 1.0;  // breaks monotonicity
    CHECK_THROWS_AS(broken.get<WeightMap>(), CalibrationQualityError);
    auto short_map = j;
    short_map["per_channel"].erase(4);
    CHECK_THROWS_AS(short_map.get<WeightMap>(), CalibrationQualityError);
}

TEST_CASE("crosstalk between channels stays under the default bound") {
    const auto& map = default_map();
    Rig rig(BankSpec{}, NeuronParams{});
    for (int ch = 0; ch < 5; ++ch) {
        for (double w : {-1.0, 1.0}) {
            auto r = crosstalk(rig, map, ch, w);
            CHECK(r.within_bound);
            CHECK(r.max_shift < 0.05);
        }
    }
    // A tight bound is reported, not hidden.
    auto r = crosstalk(rig, map, 2, -1.0, 1e-9);
    CHECK_FALSE(r.within_bound);
    CHECK(r.worst_channel >= 0);
}

TEST_CASE("a balanced pair of weights cancels equal channel powers") {
    const auto& map = default_map();
    circuit::Netlist nl;
    nl.add(circuit::Laser{"a", "la", map.bank.wavelength(0), 0.5e-3, std::nullopt});
    nl.add(circuit::Laser{"b", "lb", map.bank.wavelength(1), 0.5e-3, std::nullopt});
    nl.add(circuit::Mux{"mux", {"la", "lb"}, "in"});
    auto h = add_neuron(nl, "n", map.bank, NeuronParams{}, "in", Waveform::constant(0.0));
    circuit::Circuit c(nl, 1e-12);
    c.set_heater_current(h.rings[0], Waveform::constant(apply_weight(map, 0, 1.0)));
    c.set_heater_current(h.rings[1], Waveform::constant(apply_weight(map, 1, -1.0)));
    auto s = c.dc_operating_point();
    const double v = c.vmod(s, h.modulator);
    c.set_heater_current(h.rings[1], Waveform::constant(apply_weight(map, 1, 1.0)));
    const double v_sum = c.vmod(c.dc_operating_point(), h.modulator);
    // Each channel carries half the calibration power.
    CHECK_THAT(v_sum, WithinRel(-0.5 * (map.channels[0].v_at_wneg1 + map.channels[1].v_at_wneg1), 0.05));
    CHECK(std::abs(v) < 0.05 * std::abs(v_sum));
}
