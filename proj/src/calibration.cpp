#include "pnsim/calibration.hpp"

#include "pnsim/errors.hpp"
#include "pnsim/signal.hpp"

#include <algorithm>
#include <cmath>

// Boost 1.74 pchip.hpp calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

namespace pnsim::calibration {

using nlohmann::json;
namespace c = circuit;

namespace {

c::Netlist standard_rig(const BankSpec& bank, const NeuronParams& p, double power, NeuronHandles& h) {
    c::Netlist nl;
    nl.add(c::Laser{"cal.probe", "cal.in", bank.wavelength(0), power, std::nullopt});
    h = add_neuron(nl, "cal", bank, p, "cal.in", Waveform::constant(0.0));
    return nl;
}

}  // namespace

Rig::Rig(const BankSpec& bank, const NeuronParams& params, double probe_power)
    : Rig([&] {
          NeuronHandles h;
          auto nl = standard_rig(bank, params, probe_power, h);
          return nl;
      }(),
          bank, "cal.probe", "cal.mod",
          [&] {
              std::vector<std::string> r;
              for (int i = 0; i < bank.channel_count; ++i) r.push_back("cal.w" + std::to_string(i));
              return r;
          }(),
          probe_power) {}

Rig::Rig(c::Netlist netlist, BankSpec bank, std::string laser, std::string modulator, std::vector<std::string> rings,
         double probe_power)
    : circuit_(std::move(netlist), 1e-12),
      bank_(bank),
      laser_(std::move(laser)),
      modulator_(std::move(modulator)),
      rings_(std::move(rings)),
      heaters_(rings_.size(), 0.0),
      wavelength_(bank.base_wavelength),
      power_(probe_power) {
    const auto& nl = circuit_.netlist();
    const auto& mod = nl.get<c::PnModulator>(modulator_);
    // Detectors sourcing into the junction count positive, sinking ones negative.
    for (const auto& e : nl.elements) {
        if (const auto* pd = std::get_if<c::Photodiode>(&e)) {
            if (pd->anode == mod.anode) detectors_.insert(detectors_.begin(), pd->id);
            else if (pd->cathode == mod.anode) detectors_.push_back(pd->id);
        }
    }
    for (const auto& r : rings_) nl.get<c::Mrr>(r);
    set_probe(wavelength_, power_);
}

void Rig::set_probe(double wavelength, double power) {
    wavelength_ = wavelength;
    power_ = power;
    circuit_.set_laser(laser_, wavelength, power);
}

void Rig::set_heater(int channel, double current) {
    if (channel < 0 || channel >= static_cast<int>(rings_.size())) throw InvalidInputError("no such channel");
    heaters_[channel] = current;
    circuit_.set_heater_current(rings_[channel], Waveform::constant(current));
}

double Rig::heater(int channel) const { return heaters_.at(channel); }

void Rig::zero_heaters() {
    for (int i = 0; i < static_cast<int>(rings_.size()); ++i) set_heater(i, 0.0);
}

double Rig::junction_voltage() {
    auto s = circuit_.dc_operating_point();
    return circuit_.vmod(s, modulator_);
}

double Rig::photocurrent() {
    auto s = circuit_.dc_operating_point();
    const auto& mod = circuit_.netlist().get<c::PnModulator>(modulator_);
    double i = 0.0;
    for (const auto& id : detectors_) {
        const auto& pd = circuit_.netlist().get<c::Photodiode>(id);
        i += (pd.anode == mod.anode ? 1.0 : -1.0) * circuit_.current(s, id);
    }
    return i;
}

std::vector<double> Spectrum::peaks(double prominence) const {
    std::vector<double> out;
    const std::size_t n = voltage.size();
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (!valid[k] || !(voltage[k] > voltage[k - 1]) || !(voltage[k] >= voltage[k + 1])) continue;
        double left = voltage[k], right = voltage[k];
        for (std::size_t i = k; i-- > 0 && voltage[i] <= voltage[k];) left = std::min(left, voltage[i]);
        for (std::size_t i = k + 1; i < n && voltage[i] <= voltage[k]; ++i) right = std::min(right, voltage[i]);
        if (voltage[k] - left >= prominence && voltage[k] - right >= prominence) out.push_back(wavelength[k]);
    }
    return out;
}

Spectrum spectrum_sweep(Rig& rig, double lambda_min, double lambda_max, int points) {
    if (points < 2 || !(lambda_max > lambda_min)) throw InvalidInputError("bad wavelength range");
    for (int i = 0; i < static_cast<int>(rig.rings().size()); ++i) {
        if (rig.heater(i) != 0.0) throw ContractViolation("spectrum sweep needs every heater off");
    }
    Spectrum sp;
    for (int k = 0; k < points; ++k) {
        const double lam = lambda_min + (lambda_max - lambda_min) * k / (points - 1);
        rig.set_probe(lam);
        sp.wavelength.push_back(lam);
        try {
            sp.voltage.push_back(rig.junction_voltage());
            sp.valid.push_back(true);
        } catch (const DcConvergenceError&) {
            sp.voltage.push_back(std::nan(""));
            sp.valid.push_back(false);
        }
    }
    return sp;
}

CurrentSweep current_sweep(Rig& rig, int channel, double i_min, double i_max, int points) {
    if (points < 3 || !(i_max > i_min) || i_min < 0.0) throw InvalidInputError("bad current range");
    CurrentSweep sw;
    sw.channel = channel;
    rig.set_probe(rig.bank().wavelength(channel));
    const double keep = rig.heater(channel);
    for (int k = 0; k < points; ++k) {
        const double i = i_min + (i_max - i_min) * k / (points - 1);
        rig.set_heater(channel, i);
        sw.current.push_back(i);
        sw.voltage.push_back(rig.junction_voltage());
    }
    rig.set_heater(channel, keep);
    return sw;
}

namespace {

// Vertex of the parabola through three equally spaced samples around k.
std::pair<double, double> parabolic_peak(const CurrentSweep& s, std::size_t k) {
    const double h = s.current[k + 1] - s.current[k];
    const double y0 = s.voltage[k - 1], y1 = s.voltage[k], y2 = s.voltage[k + 1];
    const double den = y0 - 2 * y1 + y2;
    if (!(den < 0.0)) return {s.current[k], y1};
    const double d = 0.5 * (y0 - y2) / den;
    return {s.current[k] + d * h, y1 - 0.25 * (y0 - y2) * d};
}

}  // namespace

double resonance_current(const CurrentSweep& s) {
    const auto n = s.voltage.size();
    if (n < 3 || s.current.size() != n) throw InvalidInputError("sweep too short");
    const auto k = static_cast<std::size_t>(std::max_element(s.voltage.begin(), s.voltage.end()) - s.voltage.begin());
    if (k == 0 && s.current.front() == 0.0) return 0.0;  // already on resonance with the heater off
    if (k == 0 || k + 1 == n) {
        throw CalibrationRangeError("channel " + std::to_string(s.channel) +
                                    ": no interior voltage maximum in the current range");
    }
    return parabolic_peak(s, k).first;
}

ChannelMap build_weight_map(const CurrentSweep& s, double i_res, int curve_points) {
    const std::string where = "channel " + std::to_string(s.channel) + ": ";
    if (curve_points < 4) throw InvalidInputError("weight curve needs at least four points");
    // Rising branch: samples below resonance, plus the refined peak.
    std::vector<double> ic, vc;
    for (std::size_t k = 0; k < s.current.size() && s.current[k] < i_res; ++k) {
        ic.push_back(s.current[k]);
        vc.push_back(s.voltage[k]);
    }
    double v_res = s.voltage.front();
    {
        const auto k = static_cast<std::size_t>(std::max_element(s.voltage.begin(), s.voltage.end()) -
                                                s.voltage.begin());
        v_res = (k > 0 && k + 1 < s.voltage.size()) ? parabolic_peak(s, k).second : s.voltage[k];
    }
    ic.push_back(i_res);
    vc.push_back(v_res);
    if (ic.size() < 4) throw CalibrationQualityError(where + "too few samples below resonance");

    // Walk down from the peak while the voltage keeps falling.
    std::size_t lo = vc.size() - 1;
    while (lo > 0 && vc[lo - 1] < vc[lo]) --lo;
    const double v_floor = vc[lo];
    if (!(v_res > 0.0) || !(v_floor < 0.0)) {
        throw CalibrationQualityError(where + "rising branch does not straddle 0 V (" + std::to_string(v_floor) +
                                      " .. " + std::to_string(v_res) + " V)");
    }
    const double v_lim = std::min(v_res, -v_floor);

    std::vector<double> v(vc.begin() + static_cast<std::ptrdiff_t>(lo), vc.end());
    std::vector<double> i(ic.begin() + static_cast<std::ptrdiff_t>(lo), ic.end());
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (!(v[k] > v[k - 1])) {
            throw CalibrationQualityError(where + "non-monotone segment near " + std::to_string(i[k]) + " A");
        }
    }
    if (v.size() < 4) throw CalibrationQualityError(where + "retained segment too short");

    using boost::math::interpolators::pchip;
    auto inv = pchip<std::vector<double>>(std::move(v), std::move(i));
    ChannelMap m;
    m.resonance_current = i_res;
    m.v_at_wneg1 = v_lim;
    m.v_at_wpos1 = -v_lim;
    for (int k = 0; k < curve_points; ++k) {
        const double w = -1.0 + 2.0 * k / (curve_points - 1);
        m.curve.emplace_back(w, inv(-w * v_lim));
    }
    for (std::size_t k = 1; k < m.curve.size(); ++k) {
        if (!(m.curve[k].second < m.curve[k - 1].second)) {
            throw CalibrationQualityError(where + "weight curve not strictly monotone");
        }
    }
    return m;
}

void WeightMap::validate() const {
    bank.validate();
    if (static_cast<int>(channels.size()) != bank.channel_count) {
        throw CalibrationQualityError("weight map channel count differs from the bank");
    }
    for (const auto& ch : channels) {
        if (ch.curve.size() < 4) throw CalibrationQualityError("weight curve too short");
        if (std::abs(ch.curve.front().first + 1.0) > 1e-12 || std::abs(ch.curve.back().first - 1.0) > 1e-12) {
            throw CalibrationQualityError("weight curve must span exactly [-1, +1]");
        }
        for (std::size_t k = 1; k < ch.curve.size(); ++k) {
            if (!(ch.curve[k].first > ch.curve[k - 1].first) || !(ch.curve[k].second < ch.curve[k - 1].second)) {
                throw CalibrationQualityError("weight curve not strictly monotone");
            }
        }
    }
}

void to_json(json& j, const WeightMap& m) {
    json per = json::array();
    for (const auto& ch : m.channels) {
        json curve = json::array();
        for (const auto& [w, i] : ch.curve) curve.push_back({w, i});
        per.push_back({{"resonance_current_A", ch.resonance_current},
                       {"curve", curve},
                       {"v_at_wneg1", ch.v_at_wneg1},
                       {"v_at_wpos1", ch.v_at_wpos1}});
    }
    j = {{"bank_spec", m.bank}, {"probe_power", m.probe_power}, {"per_channel", per}};
}

void from_json(const json& j, WeightMap& m) {
    m.bank = j.at("bank_spec").get<BankSpec>();
    m.probe_power = j.value("probe_power", 0.0);
    m.channels.clear();
    for (const auto& c : j.at("per_channel")) {
        ChannelMap ch;
        ch.resonance_current = c.at("resonance_current_A").get<double>();
        ch.v_at_wneg1 = c.at("v_at_wneg1").get<double>();
        ch.v_at_wpos1 = c.at("v_at_wpos1").get<double>();
        for (const auto& p : c.at("curve")) ch.curve.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        m.channels.push_back(std::move(ch));
    }
    m.validate();
}

double apply_weight(const WeightMap& map, int channel, double w) {
    if (channel < 0 || channel >= static_cast<int>(map.channels.size())) {
        throw InvalidInputError("channel " + std::to_string(channel) + " is not calibrated");
    }
    if (!(std::abs(w) <= 1.0 + 1e-12)) throw WeightRangeError("weight " + std::to_string(w) + " outside [-1, 1]");
    w = std::clamp(w, -1.0, 1.0);
    const auto& curve = map.channels[channel].curve;
    std::vector<double> ws, is;
    for (const auto& [x, i] : curve) {
        ws.push_back(x);
        is.push_back(i);
    }
    using boost::math::interpolators::pchip;
    auto f = pchip<std::vector<double>>(std::move(ws), std::move(is));
    return f(w);
}

WeightMap calibrate(Rig& rig, const CalibrationOptions& opts) {
    WeightMap map;
    map.bank = rig.bank();
    map.probe_power = rig.probe_power();
    rig.zero_heaters();
    for (int ch = 0; ch < rig.bank().channel_count; ++ch) {
        auto sweep = current_sweep(rig, ch, opts.i_min, opts.i_max, opts.current_points);
        const double i_res = resonance_current(sweep);
        map.channels.push_back(build_weight_map(sweep, i_res, opts.curve_points));
        rig.set_heater(ch, 0.0);
    }
    map.validate();
    return map;
}

double realized_weight(Rig& rig, const WeightMap& map, int channel) {
    rig.set_probe(map.bank.wavelength(channel), rig.probe_power());
    const double scale = map.probe_power > 0.0 ? rig.probe_power() / map.probe_power : 1.0;
    return -rig.junction_voltage() / (map.channels.at(channel).v_at_wneg1 * scale);
}

CrosstalkReport crosstalk(Rig& rig, const WeightMap& map, int channel, double w, double bound) {
    const int n = map.bank.channel_count;
    for (int i = 0; i < n; ++i) rig.set_heater(i, apply_weight(map, i, 0.0));
    std::vector<double> before(n);
    for (int j = 0; j < n; ++j) before[j] = realized_weight(rig, map, j);
    rig.set_heater(channel, apply_weight(map, channel, w));
    CrosstalkReport r;
    r.channel = channel;
    for (int j = 0; j < n; ++j) {
        if (j == channel) continue;
        const double shift = std::abs(realized_weight(rig, map, j) - before[j]);
        if (shift > r.max_shift) {
            r.max_shift = shift;
            r.worst_channel = j;
        }
    }
    r.within_bound = r.max_shift < bound;
    rig.zero_heaters();
    return r;
}

ClosedLoopReport closed_loop(Rig& rig, const WeightMap& map, int channel, const std::vector<double>& targets) {
    ClosedLoopReport r;
    rig.zero_heaters();
    for (double w : targets) {
        rig.set_heater(channel, apply_weight(map, channel, w));
        r.target.push_back(w);
        r.realized.push_back(realized_weight(rig, map, channel));
        r.photocurrent.push_back(rig.photocurrent());
        r.max_error = std::max(r.max_error, std::abs(r.realized.back() - w));
    }
    rig.zero_heaters();
    if (targets.size() >= 3) r.r_squared = signal::polyfit(r.target, r.photocurrent, 1).r_squared;
    return r;
}

}  // namespace pnsim::calibration
