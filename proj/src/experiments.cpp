#include "pnsim/experiments.hpp"

#include "pnsim/errors.hpp"
#include "pnsim/signal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace pnsim::harness {

namespace c = circuit;

// ---------------------------------------------------------------- config I/O

void to_json(json& j, const FaninConfig& c) {
    j = {{"input_power", c.input_power},
         {"modulation_frequency", c.modulation_frequency},
         {"phase_offset", c.phase_offset},
         {"pump_power", c.pump_power},
         {"pump_channel", c.pump_channel},
         {"duration", c.duration},
         {"discard", c.discard},
         {"highpass_cutoff", c.highpass_cutoff},
         {"cancellation_check", c.cancellation_check}};
    j["linear_voltage"] = c.linear_voltage ? json(*c.linear_voltage) : json(nullptr);
    j["quadratic_voltage"] = c.quadratic_voltage ? json(*c.quadratic_voltage) : json(nullptr);
}

namespace {

std::optional<double> optional_number(const json& j, const char* key, std::optional<double> fallback) {
    if (!j.contains(key)) return fallback;
    if (j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

void from_json(const json& j, FaninConfig& c) {
    c.input_power = j.value("input_power", c.input_power);
    c.modulation_frequency = j.value("modulation_frequency", c.modulation_frequency);
    c.phase_offset = j.value("phase_offset", c.phase_offset);
    c.pump_power = j.value("pump_power", c.pump_power);
    c.pump_channel = j.value("pump_channel", c.pump_channel);
    c.duration = j.value("duration", c.duration);
    c.discard = j.value("discard", c.discard);
    c.highpass_cutoff = j.value("highpass_cutoff", c.highpass_cutoff);
    c.cancellation_check = j.value("cancellation_check", c.cancellation_check);
    c.linear_voltage = optional_number(j, "linear_voltage", c.linear_voltage);
    c.quadratic_voltage = optional_number(j, "quadratic_voltage", c.quadratic_voltage);
    require(c.input_power >= 0.0 && c.pump_power > 0.0, "fanin: powers must be >= 0 (pump > 0)");
    require(c.modulation_frequency > 0.0, "fanin: modulation_frequency must be > 0");
    require(c.duration > c.discard && c.discard >= 0.0, "fanin: need duration > discard >= 0");
}

void to_json(json& j, const CascadeConfig& c) {
    json ramps = json::array();
    for (const auto& r : c.ramps) ramps.push_back({{"name", r.name}, {"frequency", r.frequency}, {"asymmetry", r.asymmetry}});
    j = {{"pump_power", c.pump_power},
         {"pump_channel", c.pump_channel},
         {"delay", c.delay},
         {"feedback_weights", c.feedback_weights},
         {"ramps", ramps},
         {"periods", c.periods},
         {"samples_per_period", c.samples_per_period},
         {"hysteresis_threshold", c.hysteresis_threshold}};
    j["bias_min"] = c.bias_min ? json(*c.bias_min) : json(nullptr);
    j["bias_max"] = c.bias_max ? json(*c.bias_max) : json(nullptr);
}

void from_json(const json& j, CascadeConfig& c) {
    c.pump_power = j.value("pump_power", c.pump_power);
    c.pump_channel = j.value("pump_channel", c.pump_channel);
    c.delay = j.value("delay", c.delay);
    c.feedback_weights = j.value("feedback_weights", c.feedback_weights);
    if (j.contains("ramps")) {
        c.ramps.clear();
        for (const auto& r : j["ramps"]) {
            RampSpec s;
            s.frequency = r.at("frequency").get<double>();
            s.asymmetry = r.value("asymmetry", 0.5);
            s.name = r.value("name", "ramp" + std::to_string(c.ramps.size()));
            c.ramps.push_back(s);
        }
    }
    c.bias_min = optional_number(j, "bias_min", c.bias_min);
    c.bias_max = optional_number(j, "bias_max", c.bias_max);
    c.periods = j.value("periods", c.periods);
    c.samples_per_period = j.value("samples_per_period", c.samples_per_period);
    c.hysteresis_threshold = j.value("hysteresis_threshold", c.hysteresis_threshold);
    require(c.pump_power > 0.0, "cascade: pump_power must be > 0");
    require(c.delay > 0.0, "cascade: the feedback path needs a positive delay");
    require(!c.feedback_weights.empty() && !c.ramps.empty(), "cascade: feedback_weights and ramps must be non-empty");
    for (const auto& r : c.ramps) {
        require(r.frequency > 0.0 && r.asymmetry > 0.0 && r.asymmetry < 1.0,
                "cascade: ramp frequency must be > 0 and asymmetry in (0, 1)");
    }
    require(c.bias_min.has_value() == c.bias_max.has_value(), "cascade: give both bias_min and bias_max or neither");
    require(!c.bias_min || *c.bias_max > *c.bias_min, "cascade: bias_max must exceed bias_min");
    require(c.periods >= 1 && c.samples_per_period >= 100, "cascade: periods >= 1 and samples_per_period >= 100");
}

namespace {

json kick_json(const KickSpec& k) { return {{"fraction", k.fraction}, {"duration", k.duration}}; }

KickSpec kick_from(const json& j, KickSpec k) {
    k.fraction = j.value("fraction", k.fraction);
    k.duration = j.value("duration", k.duration);
    require(k.fraction >= 0.0 && k.duration >= 0.0, "kick fraction and duration must be >= 0");
    return k;
}

}  // namespace

void to_json(json& j, const HopfConfig& c) {
    j = {{"pump_power", c.pump_power},
         {"delay", c.delay},
         {"feedback_weights", c.feedback_weights},
         {"duration", c.duration},
         {"window", c.window},
         {"oscillation_threshold", c.oscillation_threshold},
         {"refine_steps", c.refine_steps},
         {"kick", kick_json(c.kick)}};
    j["centering_weight"] = c.centering_weight ? json(*c.centering_weight) : json(nullptr);
}

void from_json(const json& j, HopfConfig& c) {
    c.pump_power = j.value("pump_power", c.pump_power);
    c.delay = j.value("delay", c.delay);
    c.feedback_weights = j.value("feedback_weights", c.feedback_weights);
    c.centering_weight = optional_number(j, "centering_weight", c.centering_weight);
    c.duration = j.value("duration", c.duration);
    c.window = j.value("window", c.window);
    c.oscillation_threshold = j.value("oscillation_threshold", c.oscillation_threshold);
    c.refine_steps = j.value("refine_steps", c.refine_steps);
    if (j.contains("kick")) c.kick = kick_from(j["kick"], c.kick);
    require(c.refine_steps >= 0, "hopf: refine_steps must be >= 0");
    require(c.pump_power > 0.0 && c.delay > 0.0, "hopf: pump_power and delay must be > 0");
    require(!c.feedback_weights.empty(), "hopf: feedback_weights must be non-empty");
    for (double w : c.feedback_weights) require(std::abs(w) <= 1.0, "hopf: feedback weights must lie in [-1, 1]");
    require(c.duration > 2.0 * c.window && c.window > 0.0, "hopf: duration must exceed two windows");
}

void to_json(json& j, const WtaConfig& c) {
    json seg = json::array();
    for (const auto& [a, b] : c.segments) seg.push_back({a, b});
    j = {{"pump_power", c.pump_power},
         {"input_scale", c.input_scale},
         {"self_weight", c.self_weight},
         {"inhibition", c.inhibition},
         {"delay", c.delay},
         {"segments", seg},
         {"segment_length", c.segment_length},
         {"settle", c.settle},
         {"rise_time", c.rise_time},
         {"winner_margin", c.winner_margin},
         {"kick", kick_json(c.kick)}};
}

void from_json(const json& j, WtaConfig& c) {
    c.pump_power = j.value("pump_power", c.pump_power);
    c.input_scale = j.value("input_scale", c.input_scale);
    c.self_weight = j.value("self_weight", c.self_weight);
    c.inhibition = j.value("inhibition", c.inhibition);
    c.delay = j.value("delay", c.delay);
    if (j.contains("segments")) {
        c.segments.clear();
        for (const auto& s : j["segments"]) c.segments.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
    }
    c.segment_length = j.value("segment_length", c.segment_length);
    c.settle = j.value("settle", c.settle);
    c.rise_time = j.value("rise_time", c.rise_time);
    c.winner_margin = j.value("winner_margin", c.winner_margin);
    if (j.contains("kick")) c.kick = kick_from(j["kick"], c.kick);
    require(c.pump_power > 0.0 && c.delay > 0.0 && c.input_scale >= 0.0, "wta: powers and delay must be positive");
    require(std::abs(c.self_weight) <= 1.0 && std::abs(c.inhibition) <= 1.0, "wta: weights must lie in [-1, 1]");
    require(!c.segments.empty(), "wta: segments must be non-empty");
    for (const auto& [a, b] : c.segments) require(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0, "wta: input levels must lie in [0, 1]");
    require(c.settle > 0.0 && c.settle <= c.segment_length, "wta: settle must lie in (0, segment_length]");
}

// ---------------------------------------------------------------- helpers

namespace {

struct Grid {
    double dt;
    std::size_t record;
    c::Method method;
};

Grid grid(const SolverSettings& s, double dt_default, std::size_t record_default) {
    return {s.dt.value_or(dt_default), s.record_interval.value_or(record_default), s.method};
}

c::CosimResult simulate(const c::Netlist& nl, double duration, const Grid& g) {
    c::CosimOptions o;
    o.record_interval = g.record;
    return c::cosimulate(nl, duration, g.dt, g.method, o);
}

void append_columns(Trace& dst, const std::string& prefix, const Trace& src) {
    if (dst.time.empty()) dst.time = src.time;
    if (dst.time.size() != src.time.size()) throw InvalidInputError("runs recorded on different grids");
    for (std::size_t k = 0; k < src.names.size(); ++k) dst.add_column(prefix + src.names[k], src.columns[k]);
}

std::vector<double> scaled(const std::vector<double>& v, double s) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [s](double x) { return x * s; });
    return out;
}

std::vector<double> tail(const std::vector<double>& t, const std::vector<double>& v, double from) {
    std::vector<double> out;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] >= from) out.push_back(v[k]);
    }
    return out;
}

double variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

std::string weight_label(double w) {
    std::ostringstream o;
    o << "wf" << w;
    return o.str();
}

// Pump carrying a brief extra fraction of power at start-up.
c::Laser kicked_pump(const std::string& id, const std::string& out, double wavelength, double power,
                     const KickSpec& k) {
    if (k.fraction <= 0.0 || k.duration <= 0.0) return c::Laser{id, out, wavelength, power, std::nullopt};
    const double boost = 1.0 + k.fraction;
    return c::Laser{id, out, wavelength, power * boost,
                    Waveform::square({{0.0, 1.0}, {k.duration, 1.0 / boost}})};
}

// Peak-to-peak of v over [t0, t1).
double swing(const std::vector<double>& t, const std::vector<double>& v, double t0, double t1) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] >= t0 && t[k] < t1) {
            lo = std::min(lo, v[k]);
            hi = std::max(hi, v[k]);
        }
    }
    return hi > lo ? hi - lo : 0.0;
}

double mean_over(const std::vector<double>& t, const std::vector<double>& v, double t0, double t1) {
    double s = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] >= t0 && t[k] < t1) {
            s += v[k];
            ++n;
        }
    }
    return n ? s / n : std::nan("");
}

}  // namespace

// ---------------------------------------------------------------- fan-in

namespace {

struct FaninCase {
    std::string name;
    double wa, wb;
    bool quadratic;
    double phase;
};

c::Netlist fanin_netlist(const Hardware& hw, const FaninConfig& cfg, const FaninCase& fc, bool cw, double bias,
                         NeuronHandles& h) {
    const auto& bank = hw.bank();
    const double lp = bank.wavelength(cfg.pump_channel);
    c::Netlist nl;
    auto env = [&](double phase) -> std::optional<Waveform> {
        if (cw) return std::nullopt;
        return Waveform::am_carrier(cfg.modulation_frequency, 1.0, phase);
    };
    // The CW variant carries the mean power of the modulated one.
    const double p = cw ? 0.5 * cfg.input_power : cfg.input_power;
    nl.add(c::Laser{"A", "A", bank.wavelength(0), p, env(0.0)});
    nl.add(c::Laser{"B", "B", bank.wavelength(1), p, env(fc.phase)});
    nl.add(c::Mux{"mux", {"A", "B"}, "in"});
    h = add_neuron(nl, "n", bank, hw.neuron(), "in", Waveform::constant(bias));
    hw.program(nl, h, {fc.wa, fc.wb});
    nl.add(c::Laser{"pump", "pump", lp, cfg.pump_power, std::nullopt});
    add_modulator_ring(nl, h, hw.neuron(), "pump", "out", lp);
    nl.probe(c::Probe::voltage("v_j", h.junction, "n.m"));
    nl.probe(c::Probe::optical_power("p_out", "out", lp));
    nl.probe(c::Probe::optical_power("p_a", "A"));
    nl.probe(c::Probe::optical_power("p_b", "B"));
    return nl;
}

}  // namespace

RunOutput run_fanin(const Hardware& hw, const FaninConfig& cfg, const SolverSettings& solver) {
    require(hw.bank().channel_count >= 2, "fanin needs a bank with at least two channels");
    require(cfg.pump_channel >= 0, "fanin: pump_channel must be >= 0");
    const Grid g = grid(solver, 1e-12, 5);
    const double lp = hw.bank().wavelength(cfg.pump_channel);
    const auto curve = modulator_curve(hw.neuron(), lp);
    const double v_lin = cfg.linear_voltage.value_or(curve.steepest_voltage);
    const double v_quad = cfg.quadratic_voltage.value_or(curve.dip_voltage);

    std::vector<FaninCase> cases{{"sum_linear", 1, 1, false, cfg.phase_offset},
                                 {"diff_linear", 1, -1, false, cfg.phase_offset},
                                 {"sum_quadratic", 1, 1, true, cfg.phase_offset},
                                 {"diff_quadratic", 1, -1, true, cfg.phase_offset}};
    if (cfg.cancellation_check) {
        cases.push_back({"equal_sum", 1, 1, false, 0.0});
        cases.push_back({"equal_diff", 1, -1, false, 0.0});
    }

    RunOutput out;
    json per = json::object();
    double lin_worst = 0.0, quad_worst = 0.0;
    std::vector<double> quad_peaks;
    std::map<std::string, double> ac;
    const double dt_rec = g.dt * static_cast<double>(g.record);
    for (const auto& fc : cases) {
        NeuronHandles h;
        // The receiver is linear at DC, so one dark solve fixes the bias for the wanted mean voltage.
        double offset;
        {
            auto nl = fanin_netlist(hw, cfg, fc, true, 0.0, h);
            c::Circuit cir(std::move(nl), g.dt, g.method);
            offset = cir.vmod(cir.dc_operating_point(), h.modulator);
        }
        const double target = fc.quadratic ? v_quad : v_lin;
        const double bias = (target - offset) / hw.bias_resistance();
        auto nl = fanin_netlist(hw, cfg, fc, false, bias, h);
        auto res = simulate(nl, cfg.duration, g);
        for (const auto& w : res.summary.warnings) out.warnings.push_back(fc.name + ": " + w);

        auto& tr = res.trace;
        const auto y = scaled(tr.column("p_out"), 1.0 / cfg.pump_power);
        tr.add_column("y", y);
        tr.add_column("y_hp", signal::highpass(y, dt_rec, cfg.highpass_cutoff));
        const auto vw = tail(tr.time, tr.column("v_j"), cfg.discard);
        const auto yw = tail(tr.time, y, cfg.discard);
        const int degree = fc.quadratic ? 2 : 1;
        const auto fit = signal::polyfit(vw, yw, degree);
        const auto peak = signal::fft_peak(yw, dt_rec);
        ac[fc.name] = variance(yw);
        const auto [vmin, vmax] = std::minmax_element(vw.begin(), vw.end());
        const auto [ymin, ymax] = std::minmax_element(yw.begin(), yw.end());
        per[fc.name] = {{"weights", {fc.wa, fc.wb}},
                        {"regime", fc.quadratic ? "quadratic" : "linear"},
                        {"phase_offset", fc.phase},
                        {"target_voltage_V", target},
                        {"bias_current_A", bias},
                        {"fit_degree", degree},
                        {"fit_coefficients", fit.coeffs},
                        {"rmse_percent", fit.rmse_percent},
                        {"r_squared", fit.r_squared},
                        {"fft_peak_Hz", peak.frequency},
                        {"fft_peak_amplitude", peak.amplitude},
                        {"y_range", {*ymin, *ymax}},
                        {"v_range_V", {*vmin, *vmax}},
                        {"ac_power", ac[fc.name]}};
        if (fc.name.rfind("equal_", 0) != 0) {
            if (fc.quadratic) {
                quad_worst = std::max(quad_worst, fit.rmse_percent);
                quad_peaks.push_back(peak.frequency);
            } else {
                lin_worst = std::max(lin_worst, fit.rmse_percent);
            }
        }
        append_columns(out.trace, fc.name + ".", tr);
    }
    const double bin = 1.0 / (static_cast<double>(tail(out.trace.time, out.trace.time, cfg.discard).size()) * dt_rec);
    out.metrics = {{"experiment", "fanin"},
                   {"cases", per},
                   {"linear_rmse_percent", lin_worst},
                   {"quadratic_rmse_percent", quad_worst},
                   {"quadratic_fft_peaks_Hz", quad_peaks},
                   {"fft_bin_Hz", bin},
                   {"drive",
                    {{"pump_wavelength_m", lp},
                     {"pump_power_W", cfg.pump_power},
                     {"linear_voltage_V", v_lin},
                     {"quadratic_voltage_V", v_quad},
                     {"bias_resistance_Ohm", hw.bias_resistance()},
                     {"volts_per_watt", hw.volts_per_watt()},
                     {"dt_s", g.dt},
                     {"duration_s", cfg.duration}}},
                   {"normalization", {{"y", "P_out / P_pump"}}}};
    if (cfg.cancellation_check) {
        out.metrics["cancellation_ratio"] = ac["equal_diff"] / ac["equal_sum"];
    }
    return out;
}

// ---------------------------------------------------------------- cascade

double hysteresis_area(const std::vector<double>& b, const std::vector<double>& y) {
    return signal::loop_area(b, y);
}

std::pair<double, double> cascade_bias_range(const Hardware& hw, const CascadeConfig& cfg) {
    const double r = hw.bias_resistance();
    if (cfg.bias_min) return {*cfg.bias_min, *cfg.bias_max};
    const double lp = hw.bank().wavelength(cfg.pump_channel);
    const auto curve = modulator_curve(hw.neuron(), lp);
    double wmax = 0.0;
    for (double w : cfg.feedback_weights) wmax = std::max(wmax, w);
    const double g = hw.gain(cfg.pump_power) * wmax;
    const double vd = curve.dip_voltage, hw_v = curve.half_width;

    // Bias voltage on the steady-state curve V_b(V) = V + g T(V); its turning points are the folds.
    const int n = 6001;
    std::vector<double> vb(n);
    for (int k = 0; k < n; ++k) {
        const double v = vd - 6.0 * hw_v + 6.0 * hw_v * k / (n - 1);
        vb[k] = v + g * modulator_transmission(hw.neuron(), lp, v);
    }
    std::vector<double> folds;
    for (int k = 1; k + 1 < n; ++k) {
        if ((vb[k] - vb[k - 1]) * (vb[k + 1] - vb[k]) < 0.0) folds.push_back(vb[k]);
    }
    double lo = vd - 2.5 * hw_v, hi = vd + 0.3 * hw_v;
    if (folds.size() >= 2) {
        const auto [f0, f1] = std::minmax_element(folds.begin(), folds.end());
        lo = std::min(*f0, vd) - 2.5 * hw_v;
        hi = *f1 + 0.3 * hw_v;
    }
    return {lo / r, hi / r};
}

RunOutput run_cascade(const Hardware& hw, const CascadeConfig& cfg, const SolverSettings& solver) {
    require(cfg.pump_channel >= 0 && cfg.pump_channel < hw.bank().channel_count, "cascade: bad pump_channel");
    const double dt = solver.dt.value_or(2.5e-12);
    const double lp = hw.bank().wavelength(cfg.pump_channel);
    const auto [i_min, i_max] = cascade_bias_range(hw, cfg);
    const auto model = characterize(hw, lp, cfg.pump_power);

    RunOutput out;
    const int grid_n = cfg.samples_per_period + 1;
    for (int k = 0; k < grid_n; ++k) out.trace.time.push_back(static_cast<double>(k) / cfg.samples_per_period);

    json runs = json::object();
    std::map<std::string, std::map<double, double>> area;
    for (const auto& ramp : cfg.ramps) {
        const double period = 1.0 / ramp.frequency;
        if (ramp.frequency > 1.0 / (100.0 * model.tau)) {
            out.warnings.push_back("ramp '" + ramp.name + "' is faster than 1/(100 tau); phase lag may look like hysteresis");
        }
        const auto steps = static_cast<std::size_t>(std::llround(cfg.periods * period / dt));
        const std::size_t rec = std::max<std::size_t>(1, steps / (static_cast<std::size_t>(cfg.periods) * cfg.samples_per_period));
        const Waveform bias = Waveform::triangular(ramp.frequency, i_max - i_min, i_min, ramp.asymmetry);
        for (double wf : cfg.feedback_weights) {
            c::Netlist nl;
            nl.add(c::Laser{"pump", "pump", lp, cfg.pump_power, std::nullopt});
            auto h = add_neuron(nl, "n", hw.bank(), hw.neuron(), "fb", bias);
            std::vector<double> w(cfg.pump_channel + 1, 0.0);
            w[cfg.pump_channel] = wf;
            hw.program(nl, h, w);
            add_modulator_ring(nl, h, hw.neuron(), "pump", "out", lp);
            nl.add(c::DelayLine{"loop", "out", "fb", cfg.delay, 1.0});
            nl.probe(c::Probe::voltage("v_j", h.junction, "n.m"));
            nl.probe(c::Probe::optical_power("p_out", "out", lp));
            auto res = simulate(nl, static_cast<double>(steps) * dt, {dt, rec, solver.method});
            for (const auto& wmsg : res.summary.warnings) out.warnings.push_back(ramp.name + ": " + wmsg);

            // Last full period, resampled onto the common phase grid.
            const auto& t = res.trace.time;
            const double t0 = t.back() - period;
            std::vector<double> ph, b, y, v;
            const auto& p = res.trace.column("p_out");
            const auto& vj = res.trace.column("v_j");
            for (std::size_t k = 0; k < t.size(); ++k) {
                if (t[k] < t0 - 1e-3 * period / cfg.samples_per_period) continue;
                ph.push_back((t[k] - t0) / period);
                b.push_back((bias(t[k]) - i_min) / (i_max - i_min));
                y.push_back(p[k] / cfg.pump_power);
                v.push_back(vj[k]);
            }
            auto resample = [&](const std::vector<double>& src) {
                std::vector<double> dst(grid_n);
                std::size_t j = 0;
                for (int k = 0; k < grid_n; ++k) {
                    const double x = out.trace.time[k];
                    while (j + 2 < ph.size() && ph[j + 1] < x) ++j;
                    const double f = std::clamp((x - ph[j]) / (ph[j + 1] - ph[j]), 0.0, 1.0);
                    dst[k] = src[j] + f * (src[j + 1] - src[j]);
                }
                return dst;
            };
            const double a = hysteresis_area(b, y);
            area[ramp.name][wf] = a;
            const std::string key = ramp.name + "." + weight_label(wf);
            const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
            runs[key] = {{"ramp", ramp.name},
                         {"frequency_Hz", ramp.frequency},
                         {"asymmetry", ramp.asymmetry},
                         {"feedback_weight", wf},
                         {"loop_area", a},
                         {"bistable", a > cfg.hysteresis_threshold},
                         {"y_range", {*ylo, *yhi}},
                         {"steps", steps}};
            out.trace.add_column(key + ".b", resample(b));
            out.trace.add_column(key + ".y", resample(y));
            out.trace.add_column(key + ".v_j", resample(v));
        }
    }

    // Monostable baseline, bistable contrast and ramp invariance.
    double mono = 0.0, bist = std::numeric_limits<double>::infinity(), spread = 0.0;
    const auto& first = cfg.ramps.front().name;
    for (const auto& [name, by_w] : area) {
        for (const auto& [wf, a] : by_w) {
            if (wf == 0.0) mono = std::max(mono, a);
            else bist = std::min(bist, a);
            const double ref = area[first][wf];
            if (wf != 0.0 && ref > 0.0) spread = std::max(spread, std::abs(a - ref) / ref);
        }
    }
    out.metrics = {{"experiment", "cascade"},
                   {"runs", runs},
                   {"monostable_area", mono},
                   {"bistable_area", std::isfinite(bist) ? bist : 0.0},
                   {"area_ratio", mono > 0.0 && std::isfinite(bist) ? bist / mono : std::numeric_limits<double>::max()},
                   {"ramp_area_spread", spread},
                   {"drive",
                    {{"pump_wavelength_m", lp},
                     {"pump_power_W", cfg.pump_power},
                     {"bias_min_A", i_min},
                     {"bias_max_A", i_max},
                     {"bias_resistance_Ohm", hw.bias_resistance()},
                     {"volts_per_watt", hw.volts_per_watt()},
                     {"gain_V", hw.gain(cfg.pump_power)},
                     {"dt_s", dt}}},
                   {"neuron_tau_s", model.tau},
                   {"normalization", {{"y", "P_out / P_pump"}, {"b", "(I - I_min) / (I_max - I_min)"}, {"time", "phase of the last ramp period"}}}};
    return out;
}

// ---------------------------------------------------------------- two-neuron loops

namespace {

struct PairHandles {
    NeuronHandles n1, n2;
};

// Pumps -> modulators -> mux (plus extra inputs) -> delay -> 3 dB split -> two banks.
c::Netlist pair_netlist(const Hardware& hw, double pump_power, double delay, const KickSpec& kick,
                        const std::vector<c::Laser>& inputs, const std::vector<double>& w1,
                        const std::vector<double>& w2, double bias1, double bias2, PairHandles& h) {
    const auto& bank = hw.bank();
    const double l1 = bank.wavelength(0), l2 = bank.wavelength(1);
    c::Netlist nl;
    nl.add(kicked_pump("pump1", "pump1", l1, pump_power, kick));
    nl.add(c::Laser{"pump2", "pump2", l2, pump_power, std::nullopt});
    std::vector<std::string> mux_in{"o1", "o2"};
    for (const auto& l : inputs) {
        nl.add(l);
        mux_in.push_back(l.out);
    }
    nl.add(c::Mux{"mux", mux_in, "mix"});
    nl.add(c::DelayLine{"loop", "mix", "fb", delay, 1.0});
    nl.add(c::Coupler{"split", "fb", "", "fb1", "fb2", {std::sqrt(0.5), 1.0}});
    h.n1 = add_neuron(nl, "n1", bank, hw.neuron(), "fb1", Waveform::constant(bias1));
    h.n2 = add_neuron(nl, "n2", bank, hw.neuron(), "fb2", Waveform::constant(bias2));
    hw.program(nl, h.n1, w1);
    hw.program(nl, h.n2, w2);
    add_modulator_ring(nl, h.n1, hw.neuron(), "pump1", "o1", l1);
    add_modulator_ring(nl, h.n2, hw.neuron(), "pump2", "o2", l2);
    nl.probe(c::Probe::optical_power("p1", "o1", l1));
    nl.probe(c::Probe::optical_power("p2", "o2", l2));
    nl.probe(c::Probe::voltage("v1", h.n1.junction, "n1.m"));
    nl.probe(c::Probe::voltage("v2", h.n2.junction, "n2.m"));
    return nl;
}

// Bias voltage that holds a neuron at the steepest modulator point when every output sits there too.
double centering_voltage(const ModulatorCurve& m, double gain, double weight_sum) {
    return m.steepest_voltage + gain * weight_sum * m.steepest_transmission;
}

}  // namespace

RunOutput run_hopf(const Hardware& hw, const HopfConfig& cfg, const SolverSettings& solver) {
    require(hw.bank().channel_count >= 2, "hopf needs a bank with at least two channels");
    const Grid g = grid(solver, 1e-12, 5);
    const double l1 = hw.bank().wavelength(0);
    const double bank_power = 0.5 * cfg.pump_power;
    const double gain = hw.gain(bank_power);
    const auto curve = modulator_curve(hw.neuron(), l1);

    struct Point {
        double vb1, vb2;
        double a_last, a_prev;
        Trace trace;
        std::vector<std::string> warnings;
    };
    auto run_point = [&](double wf) {
        Point pt;
        const double wc = cfg.centering_weight.value_or(wf);
        pt.vb1 = centering_voltage(curve, gain, wc + 1.0);
        pt.vb2 = centering_voltage(curve, gain, wc - 1.0);
        PairHandles h;
        auto nl = pair_netlist(hw, cfg.pump_power, cfg.delay, cfg.kick, {}, {wf, 1.0}, {-1.0, wf},
                               pt.vb1 / hw.bias_resistance(), pt.vb2 / hw.bias_resistance(), h);
        auto res = simulate(nl, cfg.duration, g);
        pt.warnings = res.summary.warnings;
        auto& tr = res.trace;
        tr.add_column("y1", scaled(tr.column("p1"), 1.0 / cfg.pump_power));
        tr.add_column("y2", scaled(tr.column("p2"), 1.0 / cfg.pump_power));
        const double end = tr.time.back();
        pt.a_last = swing(tr.time, tr.column("y1"), end - cfg.window, end + 1.0);
        pt.a_prev = swing(tr.time, tr.column("y1"), end - 2.0 * cfg.window, end - cfg.window);
        pt.trace = std::move(tr);
        return pt;
    };
    auto cycling = [&](const Point& pt) {
        return pt.a_last > cfg.oscillation_threshold && pt.a_last >= 0.8 * pt.a_prev;
    };
    // The kick either dies out or grows; a swing that does not shrink marks an unstable fixed point.
    auto unstable = [&](const Point& pt) { return cycling(pt) || (pt.a_last > 1e-9 && pt.a_last >= pt.a_prev); };

    RunOutput out;
    json samples = json::array(), biases = json::array();
    std::vector<std::pair<double, bool>> stability;  // (w_f, unstable), sweep order
    std::vector<std::pair<double, double>> cycles;   // (w_f, amplitude)
    for (double wf : cfg.feedback_weights) {
        auto pt = run_point(wf);
        for (const auto& w : pt.warnings) out.warnings.push_back(weight_label(wf) + ": " + w);
        const auto& tr = pt.trace;
        const auto& t = tr.time;
        const double end = t.back();
        const bool osc = cycling(pt);
        const auto cyc = ctrnn::measure_cycle(t, tr.column("y1"), end - 2.0 * cfg.window, cfg.oscillation_threshold, 3);
        samples.push_back({{"feedback_weight", wf},
                           {"class", osc ? "limit_cycle" : "fixed_point"},
                           {"unstable", unstable(pt)},
                           {"amplitude", pt.a_last},
                           {"previous_amplitude", pt.a_prev},
                           {"period_s", osc ? cyc.period : 0.0},
                           {"fixed_point",
                            {mean_over(t, tr.column("y1"), end - cfg.window, end + 1.0),
                             mean_over(t, tr.column("y2"), end - cfg.window, end + 1.0)}}});
        biases.push_back({{"feedback_weight", wf},
                          {"bias_A", {pt.vb1 / hw.bias_resistance(), pt.vb2 / hw.bias_resistance()}},
                          {"bias_voltage_V", {pt.vb1, pt.vb2}}});
        stability.emplace_back(wf, unstable(pt));
        if (osc) cycles.emplace_back(wf, pt.a_last);
        Trace keep;
        keep.time = tr.time;
        for (const char* name : {"y1", "y2", "v1", "v2"}) keep.add_column(name, tr.column(name));
        append_columns(out.trace, weight_label(wf) + ".", keep);
    }

    // Bracket the first stable -> unstable transition and bisect it.
    std::sort(stability.begin(), stability.end());
    std::optional<double> critical;
    json refinement = json::array();
    for (std::size_t k = 1; k < stability.size(); ++k) {
        if (stability[k - 1].second || !stability[k].second) continue;
        double lo = stability[k - 1].first, hi = stability[k].first;
        for (int it = 0; it < cfg.refine_steps; ++it) {
            const double mid = 0.5 * (lo + hi);
            const auto pt = run_point(mid);
            const bool u = unstable(pt);
            refinement.push_back({{"feedback_weight", mid}, {"unstable", u}, {"amplitude", pt.a_last},
                                  {"previous_amplitude", pt.a_prev}});
            (u ? hi : lo) = mid;
        }
        critical = 0.5 * (lo + hi);
        break;
    }
    std::sort(cycles.begin(), cycles.end());
    bool monotone = !cycles.empty();
    for (std::size_t k = 1; k < cycles.size(); ++k) {
        monotone = monotone && cycles[k].second > cycles[k - 1].second && cycles[k].first > cycles[k - 1].first;
    }
    // Fixed points must not reappear above the first cycle.
    if (!cycles.empty()) {
        for (const auto& [w, u] : stability) monotone = monotone && (w < cycles.front().first || u);
    }

    out.metrics = {{"experiment", "hopf"},
                   {"samples", samples},
                   {"refinement", refinement},
                   {"critical_feedback_weight", critical ? json(*critical) : json(nullptr)},
                   {"first_limit_cycle_weight", cycles.empty() ? json(nullptr) : json(cycles.front().first)},
                   {"amplitude_monotone", monotone},
                   {"drive",
                    {{"pump_power_W", cfg.pump_power},
                     {"bank_power_W", bank_power},
                     {"biases", biases},
                     {"bias_resistance_Ohm", hw.bias_resistance()},
                     {"gain_V", gain},
                     {"steepest_voltage_V", curve.steepest_voltage},
                     {"steepest_slope_per_V", curve.steepest_slope},
                     {"steepest_transmission", curve.steepest_transmission},
                     {"centering_weight", cfg.centering_weight ? json(*cfg.centering_weight) : json("per_weight")}}},
                   {"normalization", {{"y", "P_out / P_pump"}}}};
    return out;
}

RunOutput run_wta(const Hardware& hw, const WtaConfig& cfg, const SolverSettings& solver) {
    require(hw.bank().channel_count >= 4, "wta needs a bank with at least four channels");
    const Grid g = grid(solver, 1e-12, 5);
    const auto& bank = hw.bank();
    const double bank_power = 0.5 * cfg.pump_power;
    const double gain = hw.gain(bank_power);
    const auto curve = modulator_curve(hw.neuron(), bank.wavelength(0));
    const double vb = centering_voltage(curve, gain, cfg.self_weight + cfg.inhibition);
    const double ib = vb / hw.bias_resistance();

    // Square input envelopes, levels normalized to the peak so the laser power sets the scale.
    auto input_laser = [&](const std::string& id, int channel, bool first) {
        double peak = 0.0;
        std::vector<std::pair<double, double>> sched;
        for (std::size_t k = 0; k < cfg.segments.size(); ++k) {
            const double lvl = first ? cfg.segments[k].first : cfg.segments[k].second;
            peak = std::max(peak, lvl);
            sched.emplace_back(static_cast<double>(k) * cfg.segment_length, lvl);
        }
        const double p = cfg.input_scale * cfg.pump_power * peak;
        for (auto& s : sched) s.second = peak > 0.0 ? s.second / peak : 0.0;
        return c::Laser{id, id, bank.wavelength(channel), p, Waveform::square(sched, 1.0, 0.0, cfg.rise_time)};
    };
    const std::vector<c::Laser> inputs{input_laser("x1", 2, true), input_laser("x2", 3, false)};

    PairHandles h;
    auto nl = pair_netlist(hw, cfg.pump_power, cfg.delay, cfg.kick, inputs,
                           {cfg.self_weight, cfg.inhibition, 1.0, 0.0}, {cfg.inhibition, cfg.self_weight, 0.0, 1.0},
                           ib, ib, h);
    nl.probe(c::Probe::optical_power("px1", "x1"));
    nl.probe(c::Probe::optical_power("px2", "x2"));
    const double duration = static_cast<double>(cfg.segments.size()) * cfg.segment_length;
    auto res = simulate(nl, duration, g);
    RunOutput out;
    out.warnings = res.summary.warnings;
    auto& tr = res.trace;
    tr.add_column("y1", scaled(tr.column("p1"), 1.0 / cfg.pump_power));
    tr.add_column("y2", scaled(tr.column("p2"), 1.0 / cfg.pump_power));
    tr.add_column("x1", scaled(tr.column("px1"), 1.0 / (cfg.input_scale * cfg.pump_power)));
    tr.add_column("x2", scaled(tr.column("px2"), 1.0 / (cfg.input_scale * cfg.pump_power)));

    const auto& t = tr.time;
    const double look = std::min(0.5e-9, 0.5 * cfg.settle);
    json segs = json::array();
    int decided = 0, correct = 0, prev = -1;
    bool memory = true;
    int memory_checks = 0;
    std::vector<int> winners;
    for (std::size_t k = 0; k < cfg.segments.size(); ++k) {
        const double ts = static_cast<double>(k) * cfg.segment_length + cfg.settle;
        const double y1 = mean_over(t, tr.column("y1"), ts - look, ts);
        const double y2 = mean_over(t, tr.column("y2"), ts - look, ts);
        const int winner = std::abs(y1 - y2) < cfg.winner_margin ? -1 : (y1 > y2 ? 0 : 1);
        const auto [x1, x2] = cfg.segments[k];
        std::string expect = "none";
        bool ok = true;
        if (x1 != x2) {
            const int want = x1 > x2 ? 0 : 1;
            expect = want == 0 ? "neuron1" : "neuron2";
            ++decided;
            ok = winner == want;
            correct += ok ? 1 : 0;
        } else if (x1 == 0.0 && k > 0 && prev >= 0) {
            expect = "memory";
            ++memory_checks;
            ok = winner == prev;
            memory = memory && ok;
        }
        winners.push_back(winner);
        segs.push_back({{"inputs", {x1, x2}},
                        {"t_read_s", ts},
                        {"y", {y1, y2}},
                        {"winner", winner < 0 ? "inconclusive" : (winner == 0 ? "neuron1" : "neuron2")},
                        {"expected", expect},
                        {"ok", ok}});
        prev = winner;
    }
    out.trace.time = tr.time;
    for (const char* name : {"y1", "y2", "v1", "v2", "x1", "x2"}) out.trace.add_column(name, tr.column(name));
    out.metrics = {{"experiment", "wta"},
                   {"segments", segs},
                   {"winners", winners},
                   {"truth_table_accuracy", decided ? static_cast<double>(correct) / decided : 1.0},
                   {"decided_segments", decided},
                   {"memory_retained", memory && memory_checks > 0},
                   {"memory_checks", memory_checks},
                   {"drive",
                    {{"pump_power_W", cfg.pump_power},
                     {"bank_power_W", bank_power},
                     {"bias_A", {ib, ib}},
                     {"bias_voltage_V", {vb, vb}},
                     {"bias_resistance_Ohm", hw.bias_resistance()},
                     {"gain_V", gain}}},
                   {"normalization", {{"y", "P_out / P_pump"}, {"x", "P_in / (input_scale P_pump)"}}}};
    return out;
}

// ---------------------------------------------------------------- calibration

CalibrationRun run_calibration(const Setup& setup) {
    const auto start = std::chrono::steady_clock::now();
    CalibrationRun run;
    calibration::Rig rig(setup.bank, setup.neuron, setup.calibration.probe_power);
    const auto& b = setup.bank;
    run.spectrum = calibration::spectrum_sweep(rig, b.wavelength(-1), b.wavelength(b.channel_count),
                                               setup.calibration.options.wavelength_points);
    const auto& o = setup.calibration.options;
    run.map.bank = b;
    run.map.probe_power = setup.calibration.probe_power;
    rig.zero_heaters();
    for (int ch = 0; ch < b.channel_count; ++ch) {
        run.sweeps.push_back(calibration::current_sweep(rig, ch, o.i_min, o.i_max, o.current_points));
        const double i_res = calibration::resonance_current(run.sweeps.back());
        run.map.channels.push_back(calibration::build_weight_map(run.sweeps.back(), i_res, o.curve_points));
    }
    run.map.validate();

    std::vector<double> targets;
    for (int k = 0; k <= 18; ++k) targets.push_back(-0.9 + 0.1 * k);
    json channels = json::array();
    double worst_r2 = 1.0, worst_err = 0.0, worst_xt = 0.0;
    for (int ch = 0; ch < b.channel_count; ++ch) {
        const auto loop = calibration::closed_loop(rig, run.map, ch, targets);
        double xt = 0.0;
        for (double w : {-1.0, 1.0}) xt = std::max(xt, calibration::crosstalk(rig, run.map, ch, w).max_shift);
        worst_r2 = std::min(worst_r2, loop.r_squared);
        worst_err = std::max(worst_err, loop.max_error);
        worst_xt = std::max(worst_xt, xt);
        const auto& m = run.map.channels[ch];
        channels.push_back({{"channel", ch},
                            {"resonance_current_A", m.resonance_current},
                            {"v_at_wneg1", m.v_at_wneg1},
                            {"closed_loop_max_error", loop.max_error},
                            {"closed_loop_r_squared", loop.r_squared},
                            {"crosstalk_max_shift", xt}});
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.metrics = {{"experiment", "calibrate"},
                   {"channels", channels},
                   {"spectrum_peaks_m", run.spectrum.peaks(0.05)},
                   {"closed_loop_r_squared_min", worst_r2},
                   {"closed_loop_max_error", worst_err},
                   {"crosstalk_max_shift", worst_xt},
                   {"crosstalk_within_bound", worst_xt < 0.05},
                   {"runtime_s", secs}};
    return run;
}

void write_calibration(const std::string& dir, const CalibrationRun& run, const json& resolved) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path d(dir);
    write_file_atomic((d / "weight_map.json").string(), dump(json(run.map)));
    json metrics = run.metrics;
    metrics.erase("runtime_s");  // keep the file reproducible; runtime goes to stdout
    write_file_atomic((d / "metrics.json").string(), dump(metrics));
    write_file_atomic((d / "config.resolved.json").string(), dump(resolved));
    std::string sp = "wavelength_m,voltage_V,valid\n";
    for (std::size_t k = 0; k < run.spectrum.wavelength.size(); ++k) {
        sp += format_double(run.spectrum.wavelength[k]) + "," + format_double(run.spectrum.voltage[k]) + "," +
              (run.spectrum.valid[k] ? "1" : "0") + "\n";
    }
    write_file_atomic((d / "spectrum.csv").string(), sp);
    std::string sw = "current_A";
    for (const auto& s : run.sweeps) sw += ",v_ch" + std::to_string(s.channel);
    sw += "\n";
    if (!run.sweeps.empty()) {
        for (std::size_t k = 0; k < run.sweeps.front().current.size(); ++k) {
            sw += format_double(run.sweeps.front().current[k]);
            for (const auto& s : run.sweeps) sw += "," + format_double(s.voltage[k]);
            sw += "\n";
        }
    }
    write_file_atomic((d / "sweeps.csv").string(), sw);
}

// ---------------------------------------------------------------- dispatch

namespace {

json setup_json(const ExperimentConfig& cfg) {
    return {{"experiment", cfg.experiment},
            {"bank", cfg.setup.bank},
            {"neuron", cfg.setup.neuron},
            {"calibration", cfg.setup.calibration},
            {"solver", cfg.setup.solver}};
}

template <class T>
T section_as(const ExperimentConfig& cfg, const std::string& name) {
    try {
        return cfg.section(name).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad '" + name + "' section: " + e.what());
    }
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& cfg, const Hardware* hw_in) {
    const auto& e = cfg.experiment;
    if (e == "transient") {
        const json n = cfg.raw.value("netlist", json());
        c::Netlist nl;
        try {
            nl = n.is_string() ? c::load_netlist(cfg.resolve_path(n.get<std::string>())) : n.get<c::Netlist>();
        } catch (const json::exception& ex) {
            throw ConfigError(std::string("bad netlist: ") + ex.what());
        }
        if (cfg.setup.solver.dt) nl.sim.dt = *cfg.setup.solver.dt;
        if (cfg.setup.solver.record_interval) nl.sim.record_interval = *cfg.setup.solver.record_interval;
        auto res = c::cosimulate(nl);
        RunOutput out;
        out.trace = std::move(res.trace);
        out.metrics = res.summary.to_json();
        out.metrics["experiment"] = "transient";
        out.resolved = {{"experiment", "transient"}, {"netlist", nl}};
        return out;
    }
    if (e != "fanin" && e != "cascade" && e != "hopf" && e != "wta") {
        throw ConfigError("unknown experiment '" + e + "'");
    }
    std::optional<Hardware> own;
    if (!hw_in) own.emplace(cfg.setup, cfg.base_dir);
    const Hardware& hw = hw_in ? *hw_in : *own;
    json resolved = setup_json(cfg);
    RunOutput out;
    if (e == "fanin") {
        const auto c = section_as<FaninConfig>(cfg, "fanin");
        resolved["fanin"] = c;
        out = run_fanin(hw, c, cfg.setup.solver);
    } else if (e == "cascade") {
        const auto c = section_as<CascadeConfig>(cfg, "cascade");
        resolved["cascade"] = c;
        out = run_cascade(hw, c, cfg.setup.solver);
    } else if (e == "hopf") {
        const auto c = section_as<HopfConfig>(cfg, "hopf");
        resolved["hopf"] = c;
        out = run_hopf(hw, c, cfg.setup.solver);
    } else {
        const auto c = section_as<WtaConfig>(cfg, "wta");
        resolved["wta"] = c;
        out = run_wta(hw, c, cfg.setup.solver);
    }
    resolved["weight_map"] = hw.map();
    out.resolved = std::move(resolved);
    return out;
}

}  // namespace pnsim::harness
