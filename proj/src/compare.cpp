#include "pnsim/compare.hpp"

#include "pnsim/errors.hpp"
#include "pnsim/signal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pnsim::harness {

namespace {

using ctrnn::CtrnnParams;
using ctrnn::Mat;
using ctrnn::Vec;

double rmse_percent(const std::vector<double>& ref, const std::vector<double>& got) {
    const auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
    const double span = *hi - *lo;
    return span > 0.0 ? 100.0 * signal::rmse(ref, got) / span : 0.0;
}

std::vector<double> column_of(const ctrnn::Trajectory& tr, int i, bool state = false) {
    std::vector<double> out(tr.time.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = state ? tr.s[k][i] : tr.y[k][i];
    return out;
}

// RK4 step that divides `grid_dt` evenly and respects the dt <= tau/20 bound.
std::pair<double, std::size_t> sub_step(double grid_dt, double tau) {
    const auto n = static_cast<std::size_t>(std::ceil(grid_dt / (tau / 25.0)));
    return {grid_dt / static_cast<double>(std::max<std::size_t>(n, 1)), std::max<std::size_t>(n, 1)};
}

std::vector<double> slice_from(const std::vector<double>& t, const std::vector<double>& v, double from) {
    std::vector<double> out;
    for (std::size_t k = 0; k < t.size() && k < v.size(); ++k) {
        if (t[k] >= from) out.push_back(v[k]);
    }
    return out;
}

double peak_to_peak(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

// Sigmoid refit on the (junction voltage, output) cloud a physical run actually visited;
// tau stays from the step response.
// Past the resonance dip the modulator climbs its other flank, which no sigmoid follows; those
// points are held at the dip floor so the fit sees the monotone envelope of the curve.
NeuronModel refit_on_cloud(NeuronModel m, const std::vector<std::pair<const std::vector<double>*, const std::vector<double>*>>& runs,
                           double gain, const ModulatorCurve& curve) {
    std::vector<double> v, y;
    for (const auto& [pv, py] : runs) {
        for (std::size_t k = 0; k < pv->size() && k < py->size(); ++k) {
            v.push_back((*pv)[k]);
            y.push_back((*pv)[k] <= curve.dip_voltage ? (*py)[k] : curve.dip_transmission);
        }
    }
    if (v.empty() || peak_to_peak(v) < 1e-3) throw FitError("degenerate cloud: no junction-voltage excursion to fit");
    const auto fit = signal::fit_sigmoid(v, y);
    m.sigma_v = fit.params;
    m.gain = gain;
    m.sigma = sigma_in_state_units(fit.params, gain);
    m.fit_rmse_percent = fit.rmse_percent;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    m.v_min = *lo;
    m.v_max = *hi;
    return m;
}

json model_json(const NeuronModel& ramp, const NeuronModel& cloud) {
    return {{"ramp_fit", ramp}, {"cloud_fit", cloud}};
}

// ---------------------------------------------------------------- fan-in

Comparison compare_fanin(const ExperimentConfig& cfg, const Hardware& hw, const RunOutput& phys) {
    const auto c = cfg.section("fanin").get<FaninConfig>();
    const double lp = hw.bank().wavelength(c.pump_channel);
    Comparison out;
    // Gain here is per unit of input envelope: x = P_in / P_peak.
    const double g_in = hw.volts_per_watt() * c.input_power;
    out.ramp_models.push_back(characterize(hw, lp, c.input_power));
    {
        std::vector<std::pair<const std::vector<double>*, const std::vector<double>*>> cloud;
        for (const auto& [name, pc] : phys.metrics.at("cases").items()) {
            if (pc.at("regime") == "linear") cloud.emplace_back(&phys.trace.column(name + ".v_j"), &phys.trace.column(name + ".y"));
        }
        out.models.push_back(refit_on_cloud(out.ramp_models.front(), cloud, g_in,
                                            modulator_curve(hw.neuron(), lp)));
    }
    const auto& m = out.models.front();
    const auto sigma = sigma_in_state_units(m.sigma_v, g_in);

    const auto& t = phys.trace.time;
    const double grid_dt = t.size() > 1 ? t[1] - t[0] : 1e-12;
    const auto [dt, rec] = sub_step(grid_dt, m.tau);
    json cases = json::object();
    double worst = 0.0;
    for (const auto& [name, pc] : phys.metrics.at("cases").items()) {
        if (pc.at("regime") != "linear") {
            cases[name] = {{"skipped", "quadratic regime lies outside the sigmoid domain"}};
            continue;
        }
        const double wa = pc.at("weights")[0], wb = pc.at("weights")[1];
        const double phase = pc.at("phase_offset");
        const double target = pc.at("target_voltage_V");
        CtrnnParams p = CtrnnParams::uniform(1, 2, m.tau, sigma);
        p.w_x << wa, wb;
        // Mean junction voltage sits on the target, as in the physical run.
        p.b[0] = -target / g_in - 0.5 * (wa + wb);
        const auto ea = Waveform::am_carrier(c.modulation_frequency, 1.0, 0.0);
        const auto eb = Waveform::am_carrier(c.modulation_frequency, 1.0, phase);
        auto x = [&](double tt) { return Vec{{ea(tt), eb(tt)}}; };
        const Vec s0 = p.b + p.w_x * x(0.0);
        const auto tr = ctrnn::integrate(p, x, s0, t.back(), dt, rec);
        std::vector<double> y_ref = column_of(tr, 0), v_ref = column_of(tr, 0, true);
        for (auto& v : v_ref) v *= -g_in;
        const std::size_t n = std::min(y_ref.size(), t.size());
        y_ref.resize(n);
        v_ref.resize(n);
        const auto y_phys = slice_from(t, phys.trace.column(name + ".y"), c.discard);
        const auto v_phys = slice_from(t, phys.trace.column(name + ".v_j"), c.discard);
        const auto y_cut = slice_from(t, y_ref, c.discard);
        const auto v_cut = slice_from(t, v_ref, c.discard);
        const double e = rmse_percent(y_phys, y_cut);
        // The cancelling pair has almost no swing to normalize against; it is judged by its residual.
        if (name.rfind("equal_", 0) != 0) worst = std::max(worst, e);
        cases[name] = {{"y_rmse_percent", e},
                       {"v_rmse_percent", rmse_percent(v_phys, v_cut)},
                       {"y_swing", {peak_to_peak(y_phys), peak_to_peak(y_cut)}},
                       {"fft_peak_Hz", {pc.at("fft_peak_Hz"), signal::fft_peak(y_cut, grid_dt).frequency}}};
        if (out.reference.time.empty()) out.reference.time.assign(t.begin(), t.begin() + static_cast<long>(n));
        if (out.reference.time.size() == n) {
            out.reference.add_column(name + ".y", y_ref);
            out.reference.add_column(name + ".v_j", v_ref);
        }
        out.params = p;
    }
    out.report = {{"experiment", "fanin"},
                  {"cases", cases},
                  {"linear_y_rmse_percent", worst},
                  {"gain_V", g_in}};
    return out;
}

// ---------------------------------------------------------------- cascade

int static_root_count(const Hardware& hw, double lp, double g, double w_f, double v_lo, double v_hi) {
    // Steady state V_b = V + g W_F T(V): three roots exist somewhere iff V_b(V) folds.
    const int n = 4001;
    int turns = 0;
    double prev = 0.0, last = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v = v_lo + (v_hi - v_lo) * k / (n - 1);
        const double vb = v + g * w_f * modulator_transmission(hw.neuron(), lp, v);
        if (k >= 2 && (vb - last) * (last - prev) < 0.0) ++turns;
        prev = last;
        last = vb;
    }
    return turns >= 2 ? 3 : 1;
}

Comparison compare_cascade(const ExperimentConfig& cfg, const Hardware& hw, const RunOutput& phys) {
    const auto c = cfg.section("cascade").get<CascadeConfig>();
    const double lp = hw.bank().wavelength(c.pump_channel);
    const double g = hw.gain(c.pump_power);
    Comparison out;
    out.ramp_models.push_back(characterize(hw, lp, c.pump_power));
    {
        std::vector<std::pair<const std::vector<double>*, const std::vector<double>*>> cloud;
        for (const auto& name : phys.trace.names) {
            if (name.size() > 2 && name.ends_with(".y")) {
                const auto stem = name.substr(0, name.size() - 2);
                cloud.emplace_back(&phys.trace.column(stem + ".v_j"), &phys.trace.column(name));
            }
        }
        out.models.push_back(refit_on_cloud(out.ramp_models.front(), cloud, g,
                                            modulator_curve(hw.neuron(), lp)));
    }
    const auto& m = out.models.front();
    const auto& drive = phys.metrics.at("drive");
    const double i_min = drive.at("bias_min_A"), i_max = drive.at("bias_max_A");
    const double r = hw.bias_resistance();
    const auto curve = modulator_curve(hw.neuron(), lp);

    out.reference.time = phys.trace.time;
    json runs = json::object();
    bool all_agree = true;
    for (const auto& ramp : c.ramps) {
        const double period = 1.0 / ramp.frequency;
        const auto bias = Waveform::triangular(ramp.frequency, i_max - i_min, i_min, ramp.asymmetry);
        for (double wf : c.feedback_weights) {
            CtrnnParams p = CtrnnParams::uniform(1, 1, m.tau, m.sigma);
            p.w_y(0, 0) = wf;
            p.w_x(0, 0) = 1.0;
            auto x = [&](double t) { return Vec{{-r * bias(t) / g}}; };
            // Both ends of the ramp are monostable; start on the single root.
            const auto roots = ctrnn::nullcline_roots(p, x(0.0)[0], wf);
            Vec s0{{roots.empty() ? x(0.0)[0] : roots.front().s}};
            const double dt = m.tau / 25.0;
            const auto steps = static_cast<std::size_t>(std::llround(period / dt));
            const std::size_t rec = std::max<std::size_t>(1, steps / static_cast<std::size_t>(c.samples_per_period));
            const auto tr = ctrnn::integrate(p, x, s0, period, dt, rec);
            std::vector<double> b, y;
            for (std::size_t k = 0; k < tr.time.size(); ++k) {
                b.push_back((bias(tr.time[k]) - i_min) / (i_max - i_min));
                y.push_back(tr.y[k][0]);
            }
            const double area = hysteresis_area(b, y);
            // Reference root count over the whole bias window.
            int roots_ref = 1;
            for (int k = 0; k <= 200; ++k) {
                const double xb = -r * (i_min + (i_max - i_min) * k / 200.0) / g;
                roots_ref = std::max<int>(roots_ref, static_cast<int>(ctrnn::nullcline_roots(p, xb, wf, 2001).size()));
            }
            const int roots_phys =
                static_root_count(hw, lp, g, wf, curve.dip_voltage - 8.0 * curve.half_width, curve.dip_voltage);
            std::ostringstream label;
            label << ramp.name << ".wf" << wf;
            const std::string key = label.str();
            const auto& pr = phys.metrics.at("runs").at(key);
            const bool bist_ref = area > c.hysteresis_threshold;
            const bool agree = bist_ref == pr.at("bistable").get<bool>() && roots_ref == roots_phys;
            all_agree = all_agree && agree;
            runs[key] = {{"loop_area", {pr.at("loop_area"), area}},
                         {"bistable", {pr.at("bistable"), bist_ref}},
                         {"root_count", {roots_phys, roots_ref}},
                         {"agree", agree}};
            // Reference output on the physical phase grid.
            std::vector<double> yr(out.reference.time.size());
            std::size_t j = 0;
            for (std::size_t k = 0; k < yr.size(); ++k) {
                const double tt = out.reference.time[k] * period;
                while (j + 2 < tr.time.size() && tr.time[j + 1] < tt) ++j;
                const double f = std::clamp((tt - tr.time[j]) / (tr.time[j + 1] - tr.time[j]), 0.0, 1.0);
                yr[k] = y[j] + f * (y[j + 1] - y[j]);
            }
            // Deviation only where the modulator is still on its sigmoid flank.
            const auto& yp = phys.trace.column(key + ".y");
            const auto& vp = phys.trace.column(key + ".v_j");
            std::vector<double> yp_in, yr_in;
            for (std::size_t k = 0; k < yp.size(); ++k) {
                if (vp[k] <= curve.dip_voltage) {
                    yp_in.push_back(yp[k]);
                    yr_in.push_back(yr[k]);
                }
            }
            runs[key]["y_rmse_percent"] = yp_in.empty() ? 0.0 : rmse_percent(yp_in, yr_in);
            runs[key]["in_domain_fraction"] = static_cast<double>(yp_in.size()) / static_cast<double>(yp.size());
            out.reference.add_column(key + ".y", yr);
            out.params = p;
        }
    }
    out.report = {{"experiment", "cascade"}, {"runs", runs}, {"classification_agrees", all_agree}, {"gain_V", g}};
    return out;
}

// ---------------------------------------------------------------- two-neuron networks

// Neuron i's cloud: every trace column pair "<prefix>v<i>" / "<prefix>y<i>".
void pair_models(const Hardware& hw, double bank_power, const Trace& trace, Comparison& out) {
    const double g = hw.gain(bank_power);
    for (int i = 0; i < 2; ++i) {
        out.ramp_models.push_back(characterize(hw, hw.bank().wavelength(i), bank_power));
        const std::string y = "y" + std::to_string(i + 1), v = "v" + std::to_string(i + 1);
        std::vector<std::pair<const std::vector<double>*, const std::vector<double>*>> cloud;
        for (const auto& name : trace.names) {
            if (name.ends_with(y)) {
                cloud.emplace_back(&trace.column(name.substr(0, name.size() - y.size()) + v), &trace.column(name));
            }
        }
        out.models.push_back(refit_on_cloud(out.ramp_models.back(), cloud, g,
                                            modulator_curve(hw.neuron(), hw.bank().wavelength(i))));
    }
}

void apply_models(CtrnnParams& p, const std::vector<NeuronModel>& models) {
    for (int i = 0; i < 2; ++i) {
        p.tau[i] = models[i].tau;
        p.sigma[i] = models[i].sigma;
    }
}

Comparison compare_hopf(const ExperimentConfig& cfg, const Hardware& hw, const RunOutput& phys) {
    const auto c = cfg.section("hopf").get<HopfConfig>();
    const double bank_power = 0.5 * c.pump_power;
    const double g = hw.gain(bank_power);
    Comparison out;
    pair_models(hw, bank_power, phys.trace, out);
    CtrnnParams base = ctrnn::hopf_network(0.0, out.models[0].sigma, out.models[0].tau);
    apply_models(base, out.models);

    auto ws = c.feedback_weights;
    std::sort(ws.begin(), ws.end());
    ctrnn::HopfOptions o;
    o.w_min = ws.front();
    o.w_max = ws.back();
    o.resolution = ws.size() > 1 ? (ws.back() - ws.front()) / static_cast<double>(ws.size() - 1) : 1.0;
    if (c.centering_weight) {
        const auto& b = phys.metrics.at("drive").at("biases").at(0).at("bias_voltage_V");
        base.b << -b[0].get<double>() / g, -b[1].get<double>() / g;
    } else {
        o.recenter = true;
    }
    const auto rec = ctrnn::hopf_sweep(base, o);

    const auto& pm = phys.metrics;
    const json phys_crit = pm.at("critical_feedback_weight");
    json samples = json::array();
    bool lo_fixed = false, hi_cycle = false;
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
        const auto& s = rec.samples[k];
        json ps;
        for (const auto& q : pm.at("samples")) {
            if (std::abs(q.at("feedback_weight").get<double>() - s.w_f) < 1e-9) ps = q;
        }
        const bool ref_cycle = s.cycle.oscillating;
        samples.push_back({{"feedback_weight", s.w_f},
                           {"reference_class", ref_cycle ? "limit_cycle" : "fixed_point"},
                           {"physical_class", ps.is_null() ? json(nullptr) : ps.at("class")},
                           {"max_real_per_s", s.max_real},
                           {"reference_amplitude", s.cycle.amplitude},
                           {"reference_period_s", s.cycle.period},
                           {"physical_amplitude", ps.is_null() ? json(nullptr) : ps.at("amplitude")},
                           {"physical_period_s", ps.is_null() ? json(nullptr) : ps.at("period_s")}});
        if (k == 0) lo_fixed = !ref_cycle && !ps.is_null() && ps.at("class") == "fixed_point";
        if (k + 1 == rec.samples.size()) hi_cycle = ref_cycle && !ps.is_null() && ps.at("class") == "limit_cycle";
    }
    json rel = nullptr;
    if (rec.critical_w_f && phys_crit.is_number()) {
        rel = std::abs(phys_crit.get<double>() - *rec.critical_w_f) / *rec.critical_w_f;
    }

    // Reference transient at the largest weight, started like the physical run.
    CtrnnParams top = base;
    top.w_y(0, 0) = top.w_y(1, 1) = o.w_max;
    if (o.recenter) top.b = ctrnn::centering_bias(top);
    Vec s0 = rec.samples.back().fixed_point.s_star;
    s0[0] += 1e-3;
    const auto& t = phys.trace.time;
    const double grid_dt = t.size() > 1 ? t[1] - t[0] : 1e-12;
    const auto [dt, sub] = sub_step(grid_dt, top.tau.minCoeff());
    const auto tr = ctrnn::integrate(top, {}, s0, t.back(), dt, sub);
    out.reference.time.assign(tr.time.begin(), tr.time.end());
    out.reference.add_column("y1", column_of(tr, 0));
    out.reference.add_column("y2", column_of(tr, 1));
    out.params = top;

    out.report = {{"experiment", "hopf"},
                  {"samples", samples},
                  {"reference_critical_feedback_weight", rec.critical_w_f ? json(*rec.critical_w_f) : json(nullptr)},
                  {"physical_critical_feedback_weight", phys_crit},
                  {"critical_relative_difference", rel},
                  {"both_fixed_at_min_weight", lo_fixed},
                  {"both_oscillate_at_max_weight", hi_cycle},
                  {"recentred", o.recenter},
                  {"gain_V", g}};
    return out;
}

Comparison compare_wta(const ExperimentConfig& cfg, const Hardware& hw, const RunOutput& phys) {
    const auto c = cfg.section("wta").get<WtaConfig>();
    const double bank_power = 0.5 * c.pump_power;
    const double g = hw.gain(bank_power);
    Comparison out;
    pair_models(hw, bank_power, phys.trace, out);
    CtrnnParams p = ctrnn::wta_network(c.inhibition, out.models[0].sigma, out.models[0].tau);
    apply_models(p, out.models);
    p.w_y(0, 0) = p.w_y(1, 1) = c.self_weight;
    p.w_x = c.input_scale * Mat::Identity(2, 2);
    const auto& vb = phys.metrics.at("drive").at("bias_voltage_V");
    p.b << -vb[0].get<double>() / g, -vb[1].get<double>() / g;

    std::vector<std::pair<double, double>> s1, s2;
    for (std::size_t k = 0; k < c.segments.size(); ++k) {
        s1.emplace_back(static_cast<double>(k) * c.segment_length, c.segments[k].first);
        s2.emplace_back(static_cast<double>(k) * c.segment_length, c.segments[k].second);
    }
    const auto x1 = Waveform::square(s1, 1.0, 0.0, c.rise_time);
    const auto x2 = Waveform::square(s2, 1.0, 0.0, c.rise_time);
    auto x = [&](double t) { return Vec{{x1(t), x2(t)}}; };

    // Start at the symmetric rest point, nudged towards neuron 1 like the pump kick.
    const Vec x0 = x(0.0);
    Vec s0 = p.b + p.w_x * x0;
    for (int it = 0; it < 200; ++it) s0 = p.b + p.w_x * x0 + p.w_y * ctrnn::outputs(p, s0);
    s0[0] += 1e-3;
    const auto& t = phys.trace.time;
    const double grid_dt = t.size() > 1 ? t[1] - t[0] : 1e-12;
    const auto [dt, sub] = sub_step(grid_dt, p.tau.minCoeff());
    const auto tr = ctrnn::integrate(p, x, s0, t.back(), dt, sub);
    out.reference.time.assign(tr.time.begin(), tr.time.end());
    const auto y1 = column_of(tr, 0), y2 = column_of(tr, 1);
    out.reference.add_column("y1", y1);
    out.reference.add_column("y2", y2);
    out.params = p;

    json segs = json::array();
    bool same = true;
    const auto& pseg = phys.metrics.at("segments");
    const double look = std::min(0.5e-9, 0.5 * c.settle);
    auto mean_window = [&](const std::vector<double>& v, double a, double b) {
        double s = 0.0;
        int n = 0;
        for (std::size_t k = 0; k < tr.time.size(); ++k) {
            if (tr.time[k] >= a && tr.time[k] < b) {
                s += v[k];
                ++n;
            }
        }
        return n ? s / n : std::nan("");
    };
    for (std::size_t k = 0; k < c.segments.size(); ++k) {
        const double ts = static_cast<double>(k) * c.segment_length + c.settle;
        const double a = mean_window(y1, ts - look, ts), b = mean_window(y2, ts - look, ts);
        const std::string w = std::abs(a - b) < c.winner_margin ? "inconclusive" : (a > b ? "neuron1" : "neuron2");
        const auto& ps = pseg.at(k);
        const bool counted = ps.at("expected") != "none";
        const bool match = w == ps.at("winner").get<std::string>();
        if (counted) same = same && match;
        segs.push_back({{"inputs", ps.at("inputs")},
                        {"physical_winner", ps.at("winner")},
                        {"reference_winner", w},
                        {"reference_y", {a, b}},
                        {"counted", counted},
                        {"same_winner", match}});
    }
    const auto py1 = phys.trace.column("y1");
    out.report = {{"experiment", "wta"},
                  {"segments", segs},
                  {"same_winner", same},
                  {"y1_rmse_percent", rmse_percent(py1, std::vector<double>(y1.begin(), y1.begin() + static_cast<long>(std::min(y1.size(), py1.size()))))},
                  {"gain_V", g}};
    return out;
}

}  // namespace

ctrnn::SigmoidParams sigma_in_state_units(const ctrnn::SigmoidParams& sv, double gain) {
    if (!(gain > 0.0)) throw InvalidInputError("gain must be > 0");
    return {sv.alpha, -gain * sv.beta, sv.gamma, -sv.s0 / gain};
}

Comparison compare(const ExperimentConfig& cfg, const Hardware& hw, const RunOutput& physical) {
    Comparison c;
    if (cfg.experiment == "fanin") c = compare_fanin(cfg, hw, physical);
    else if (cfg.experiment == "cascade") c = compare_cascade(cfg, hw, physical);
    else if (cfg.experiment == "hopf") c = compare_hopf(cfg, hw, physical);
    else if (cfg.experiment == "wta") c = compare_wta(cfg, hw, physical);
    else throw ConfigError("compare supports fanin, cascade, hopf and wta, not '" + cfg.experiment + "'");
    json models = json::array();
    double worst_fit = 0.0;
    for (std::size_t i = 0; i < c.models.size(); ++i) {
        models.push_back(model_json(c.ramp_models[i], c.models[i]));
        worst_fit = std::max(worst_fit, c.models[i].fit_rmse_percent);
    }
    c.report["models"] = models;
    c.report["sigmoid_fit_rmse_percent"] = worst_fit;
    c.report["reference_network"] = c.params;
    return c;
}

// ---------------------------------------------------------------- standalone reference

RunOutput run_ctrnn_reference(const json& section) {
    CtrnnParams p;
    try {
        const json& net = section.at("network");
        if (net.contains("preset")) {
            const std::string preset = net.at("preset");
            const auto s = net.value("sigma", ctrnn::SigmoidParams{});
            const double tau = net.value("tau", 1.0);
            if (preset == "hopf") p = ctrnn::hopf_network(net.value("w_f", 0.0), s, tau);
            else if (preset == "wta") p = ctrnn::wta_network(net.value("w_inh", -1.0), s, tau);
            else throw ConfigError("unknown network preset '" + preset + "'");
            if (net.value("centred", false)) p.b = ctrnn::centering_bias(p);
        } else {
            p = net.get<CtrnnParams>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad ctrnn network: ") + e.what());
    }
    const int n = p.size(), m = p.input_count();
    std::vector<Waveform> inputs;
    if (section.contains("inputs")) inputs = section.at("inputs").get<std::vector<Waveform>>();
    if (!inputs.empty() && static_cast<int>(inputs.size()) != m) {
        throw ConfigError("ctrnn: need one input waveform per input column");
    }
    auto x = [&](double t) {
        Vec v = Vec::Zero(m);
        for (int i = 0; i < static_cast<int>(inputs.size()); ++i) v[i] = inputs[static_cast<std::size_t>(i)](t);
        return v;
    };
    const double tau_min = p.tau.minCoeff();
    const double duration = section.value("duration", 50.0 * p.tau.maxCoeff());
    const double dt = section.value("dt", tau_min / 50.0);
    const auto rec = section.value("record_interval", std::size_t{1});
    Vec s0 = p.b;
    if (section.contains("s_init")) {
        const auto v = section.at("s_init").get<std::vector<double>>();
        if (static_cast<int>(v.size()) != n) throw ConfigError("ctrnn: s_init has the wrong size");
        s0 = Eigen::Map<const Vec>(v.data(), n);
    }
    const auto tr = ctrnn::integrate(p, x, s0, duration, dt, rec);

    RunOutput out;
    out.trace.time = tr.time;
    for (int i = 0; i < n; ++i) out.trace.add_column("s" + std::to_string(i + 1), column_of(tr, i, true));
    for (int i = 0; i < n; ++i) out.trace.add_column("y" + std::to_string(i + 1), column_of(tr, i));

    const Vec x_end = x(duration);
    const auto at_end = ctrnn::analyze_fixed_point(p, tr.s.back(), x_end);
    out.metrics = {{"experiment", "ctrnn-ref"},
                   {"final_state", std::vector<double>(tr.s.back().begin(), tr.s.back().end())},
                   {"final_output", std::vector<double>(tr.y.back().begin(), tr.y.back().end())},
                   {"final_residual", at_end.residual},
                   {"settled", at_end.residual < 1e-6},
                   {"fixed_point", nullptr}};
    // Nearest equilibrium to where the run ended; on a limit cycle this is the unstable focus inside it.
    if (const auto fp = ctrnn::find_fixed_point(p, x_end, tr.s.back())) {
        json eig = json::array();
        for (const auto& l : fp->eigenvalues) eig.push_back({l.real(), l.imag()});
        out.metrics["fixed_point"] = {{"s", std::vector<double>(fp->s_star.begin(), fp->s_star.end())},
                                      {"eigenvalues", eig},
                                      {"stability", ctrnn::stability_name(fp->stability)},
                                      {"residual", fp->residual}};
    }
    if (n == 1 && section.contains("nullcline")) {
        const auto& nc = section.at("nullcline");
        json roots = json::array();
        for (const auto& r : ctrnn::nullcline_roots(p, nc.value("x", 0.0), nc.value("w_f", p.w_y(0, 0)))) {
            roots.push_back({{"s", r.s}, {"stable", r.stable}});
        }
        out.metrics["nullcline_roots"] = roots;
    }
    if (section.contains("hopf_sweep")) {
        const auto& h = section.at("hopf_sweep");
        ctrnn::HopfOptions o;
        o.w_min = h.value("w_min", o.w_min);
        o.w_max = h.value("w_max", o.w_max);
        o.resolution = h.value("resolution", o.resolution);
        o.recenter = h.value("recenter", o.recenter);
        const auto r = ctrnn::hopf_sweep(p, o);
        json samples = json::array();
        for (const auto& s : r.samples) {
            samples.push_back({{"feedback_weight", s.w_f},
                               {"max_real", s.max_real},
                               {"oscillating", s.cycle.oscillating},
                               {"amplitude", s.cycle.amplitude},
                               {"period", s.cycle.period}});
        }
        out.metrics["hopf"] = {{"samples", samples},
                               {"critical_feedback_weight", r.critical_w_f ? json(*r.critical_w_f) : json(nullptr)}};
    }
    if (n == 2 && section.contains("vector_field")) {
        const auto& vf = section.at("vector_field");
        const auto lo = vf.value("lo", std::vector<double>{0.05, 0.05});
        const auto hi = vf.value("hi", std::vector<double>{0.95, 0.95});
        const int pts = vf.value("points", 21);
        const auto field = ctrnn::vector_field(p, x_end, Vec{{lo[0], lo[1]}}, Vec{{hi[0], hi[1]}}, pts, pts);
        json f = json::array();
        for (const auto& s : field) {
            if (s.valid) f.push_back({s.y1, s.y2, s.dy1, s.dy2});
        }
        out.metrics["vector_field"] = f;
    }
    out.resolved = {{"experiment", "ctrnn-ref"}, {"ctrnn", section}, {"network", p}};
    return out;
}

}  // namespace pnsim::harness
