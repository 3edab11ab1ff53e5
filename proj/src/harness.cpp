#include "pnsim/harness.hpp"

#include "pnsim/errors.hpp"
#include "pnsim/signal.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace pnsim::harness {

namespace c = circuit;
namespace fs = std::filesystem;

void to_json(json& j, const SolverSettings& s) {
    j = json::object();
    if (s.dt) j["dt"] = *s.dt;
    j["method"] = c::method_name(s.method);
    if (s.record_interval) j["record_interval"] = *s.record_interval;
}

void from_json(const json& j, SolverSettings& s) {
    if (j.contains("dt") && !j["dt"].is_null()) s.dt = j["dt"].get<double>();
    if (j.contains("method")) s.method = c::parse_method(j["method"].get<std::string>());
    if (j.contains("record_interval") && !j["record_interval"].is_null()) {
        s.record_interval = j["record_interval"].get<std::size_t>();
    }
    if (s.dt && !(*s.dt > 0.0)) throw ConfigError("solver.dt must be > 0");
    if (s.record_interval && *s.record_interval == 0) throw ConfigError("solver.record_interval must be >= 1");
}

void to_json(json& j, const CalibrationSource& c) {
    j = {{"weight_map", c.weight_map},
         {"probe_power", c.probe_power},
         {"wavelength_points", c.options.wavelength_points},
         {"current_points", c.options.current_points},
         {"current_min", c.options.i_min},
         {"current_max", c.options.i_max},
         {"curve_points", c.options.curve_points}};
}

void from_json(const json& j, CalibrationSource& c) {
    c.weight_map = j.value("weight_map", c.weight_map);
    c.probe_power = j.value("probe_power", c.probe_power);
    c.options.wavelength_points = j.value("wavelength_points", c.options.wavelength_points);
    c.options.current_points = j.value("current_points", c.options.current_points);
    c.options.i_min = j.value("current_min", c.options.i_min);
    c.options.i_max = j.value("current_max", c.options.i_max);
    c.options.curve_points = j.value("curve_points", c.options.curve_points);
    if (!(c.probe_power > 0.0)) throw ConfigError("calibration.probe_power must be > 0");
}

json ExperimentConfig::section(const std::string& name) const {
    if (raw.contains(name)) {
        if (!raw[name].is_object()) throw ConfigError("section '" + name + "' must be an object");
        return raw[name];
    }
    return json::object();
}

std::string ExperimentConfig::resolve_path(const std::string& path) const {
    if (path.empty()) return path;
    const fs::path p(path);
    return p.is_absolute() ? path : (fs::path(base_dir) / p).lexically_normal().string();
}

ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.base_dir = base_dir;
    cfg.experiment = j.value("experiment", std::string{});
    try {
        if (j.contains("bank")) cfg.setup.bank = j["bank"].get<BankSpec>();
        if (j.contains("neuron")) cfg.setup.neuron = j["neuron"].get<NeuronParams>();
        if (j.contains("calibration")) cfg.setup.calibration = j["calibration"].get<CalibrationSource>();
        if (j.contains("solver")) cfg.setup.solver = j["solver"].get<SolverSettings>();
        cfg.setup.bank.validate();
        cfg.setup.neuron.validate();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad configuration: ") + e.what());
    } catch (const InvalidParamsError& e) {
        throw ConfigError(std::string("bad configuration: ") + e.what());
    }
    const auto& wm = cfg.setup.calibration.weight_map;
    if (!wm.empty() && !fs::exists(cfg.resolve_path(wm))) {
        throw ConfigError("weight map '" + cfg.resolve_path(wm) + "' does not exist");
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
    const auto dir = fs::path(path).parent_path();
    return parse_config(j, dir.empty() ? "." : dir.string());
}

namespace {

calibration::WeightMap obtain_map(const Setup& s, const std::string& base_dir) {
    if (!s.calibration.weight_map.empty()) {
        fs::path p(s.calibration.weight_map);
        if (!p.is_absolute()) p = fs::path(base_dir) / p;
        calibration::WeightMap m;
        try {
            m = json::parse(read_file(p.string())).get<calibration::WeightMap>();
        } catch (const json::exception& e) {
            throw ConfigError("cannot read weight map '" + p.string() + "': " + e.what());
        }
        if (!(m.bank == s.bank)) throw ConfigError("weight map was calibrated for a different bank");
        return m;
    }
    calibration::Rig rig(s.bank, s.neuron, s.calibration.probe_power);
    return calibration::calibrate(rig, s.calibration.options);
}

}  // namespace

Hardware::Hardware(const Setup& setup, const std::string& base_dir)
    : Hardware(setup, obtain_map(setup, base_dir)) {}

Hardware::Hardware(const Setup& setup, calibration::WeightMap map) : setup_(setup), map_(std::move(map)) {
    map_.validate();
    measure();
}

void Hardware::measure() {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& ch : map_.channels) v = std::min(v, ch.v_at_wneg1);
    volts_per_watt_ = v / map_.probe_power;

    // Junction voltage per unit bias current, receiver dark.
    c::Netlist nl;
    nl.add(c::Laser{"dark", "dark.in", setup_.bank.wavelength(0), 0.0, std::nullopt});
    auto h = add_neuron(nl, "r", setup_.bank, setup_.neuron, "dark.in", Waveform::constant(1e-3));
    c::Circuit cir(std::move(nl), 1e-12);
    const auto s = cir.dc_operating_point();
    r_eff_ = cir.vmod(s, h.modulator) / 1e-3;
}

double Hardware::heater_current(int channel, double w) const {
    if (channel < 0 || channel >= static_cast<int>(map_.channels.size())) {
        throw InvalidInputError("channel " + std::to_string(channel) + " is not calibrated");
    }
    if (!(std::abs(w) <= 1.0)) throw WeightRangeError("weight " + std::to_string(w) + " outside [-1, 1]");
    const double scale = volts_per_watt_ * map_.probe_power / map_.channels[channel].v_at_wneg1;
    return calibration::apply_weight(map_, channel, w * scale);
}

std::vector<double> Hardware::heater_currents(const std::vector<double>& weights) const {
    if (weights.size() > map_.channels.size()) throw InvalidInputError("more weights than bank channels");
    std::vector<double> i(map_.channels.size(), 0.0);
    for (std::size_t k = 0; k < weights.size(); ++k) i[k] = heater_current(static_cast<int>(k), weights[k]);
    return i;
}

void Hardware::program(c::Netlist& nl, const NeuronHandles& n, const std::vector<double>& weights) const {
    const auto i = heater_currents(weights);
    for (std::size_t k = 0; k < n.rings.size(); ++k) {
        nl.get<c::Mrr>(n.rings[k]).heater_current = Waveform::constant(i[k]);
    }
}

ModulatorCurve modulator_curve(const NeuronParams& p, double wavelength) {
    ModulatorCurve m;
    m.dip_voltage = p.dip_voltage;
    m.dip_transmission = modulator_transmission(p, wavelength, p.dip_voltage);
    const double lo = std::max(p.modulator.v_min, p.dip_voltage - 4.0);
    const int n = 8001;
    const double h = (p.dip_voltage - lo) / (n - 1);
    const double half = 0.5 * (1.0 + m.dip_transmission);
    double best = 0.0;
    m.half_width = p.dip_voltage - lo;
    bool found_half = false;
    for (int k = n - 1; k > 0; --k) {
        const double v = lo + k * h;
        const double slope = (modulator_transmission(p, wavelength, v) -
                              modulator_transmission(p, wavelength, v - h)) / h;
        if (-slope > best) {
            best = -slope;
            m.steepest_voltage = v - 0.5 * h;
        }
        if (!found_half && modulator_transmission(p, wavelength, v) >= half) {
            m.half_width = p.dip_voltage - v;
            found_half = true;
        }
    }
    m.steepest_slope = best;
    m.steepest_transmission = modulator_transmission(p, wavelength, m.steepest_voltage);
    return m;
}

void to_json(json& j, const NeuronModel& m) {
    j = {{"sigma_voltage", m.sigma_v},
         {"sigma", m.sigma},
         {"gain_V", m.gain},
         {"tau_s", m.tau},
         {"fit_rmse_percent", m.fit_rmse_percent},
         {"fit_voltage_span", {m.v_min, m.v_max}}};
}

namespace {

// Pump -> modulator ring, dark weight bank, bias from `bias`.
c::Netlist feedforward_neuron(const Hardware& hw, double pump_wavelength, Waveform bias, NeuronHandles& h) {
    c::Netlist nl;
    nl.add(c::Laser{"pump", "pump", pump_wavelength, 1e-3, std::nullopt});
    nl.add(c::Laser{"dark", "dark.in", hw.bank().wavelength(0), 0.0, std::nullopt});
    h = add_neuron(nl, "n", hw.bank(), hw.neuron(), "dark.in", std::move(bias));
    add_modulator_ring(nl, h, hw.neuron(), "pump", "out", pump_wavelength);
    nl.probe(c::Probe::voltage("v_j", h.junction, "n.m"));
    nl.probe(c::Probe::optical_power("p_out", "out", pump_wavelength));
    return nl;
}

}  // namespace

NeuronModel characterize(const Hardware& hw, double pump_wavelength, double bank_power,
                         const CharacterizeOptions& opts) {
    const auto curve = modulator_curve(hw.neuron(), pump_wavelength);
    const double r = hw.bias_resistance();
    const double v_hi = curve.dip_voltage;
    const double v_lo = v_hi - opts.span_half_widths * curve.half_width;
    const double t0 = 2e-9, t1 = t0 + opts.ramp_time;

    NeuronModel m;
    m.gain = hw.gain(bank_power);
    m.v_min = v_lo;
    m.v_max = v_hi;
    {
        NeuronHandles h;
        auto nl = feedforward_neuron(hw, pump_wavelength,
                                     Waveform::pwl({{0.0, v_lo / r}, {t0, v_lo / r}, {t1, v_hi / r}}), h);
        c::CosimOptions co;
        co.record_interval = 10;
        auto res = c::cosimulate(nl, t1, opts.dt, c::Method::BackwardEuler, co);
        const auto& t = res.trace.time;
        const auto& v = res.trace.column("v_j");
        const auto& p = res.trace.column("p_out");
        std::vector<double> vs, ys;
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (t[k] < t0) continue;
            vs.push_back(v[k]);
            ys.push_back(p[k] / 1e-3);
        }
        const auto fit = signal::fit_sigmoid(vs, ys);
        m.sigma_v = fit.params;
        m.fit_rmse_percent = fit.rmse_percent;
    }
    m.sigma = {m.sigma_v.alpha, -m.gain * m.sigma_v.beta, m.sigma_v.gamma, -m.sigma_v.s0 / m.gain};
    {
        const double va = curve.steepest_voltage, ts = 1e-9;
        NeuronHandles h;
        auto nl = feedforward_neuron(
            hw, pump_wavelength,
            Waveform::pwl({{0.0, va / r}, {ts, va / r}, {ts + opts.dt, (va + opts.step_height) / r}}), h);
        auto res = c::cosimulate(nl, ts + 2e-9, opts.dt, c::Method::BackwardEuler);
        m.tau = signal::rise_time_63(res.trace.time, res.trace.column("v_j"), ts);
    }
    return m;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_outputs(const std::string& dir, const RunOutput& out) {
    fs::create_directories(dir);
    write_trace_csv((fs::path(dir) / "trace.csv").string(), out.trace);
    json metrics = out.metrics;
    if (!out.warnings.empty()) metrics["warnings"] = out.warnings;
    write_file_atomic((fs::path(dir) / "metrics.json").string(), dump(metrics));
    write_file_atomic((fs::path(dir) / "config.resolved.json").string(), dump(out.resolved));
}

}  // namespace pnsim::harness
