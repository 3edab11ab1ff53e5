// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "pnsim/calibration.hpp"
#include "pnsim/circuit.hpp"
#include "pnsim/compare.hpp"
#include "pnsim/ctrnn.hpp"
#include "pnsim/optics.hpp"
#include "pnsim/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pnsim;
using namespace pnsim::harness;

namespace {

// Tolerances.
constexpr int kOpticsCases = 1000;
constexpr double kPowerConservation = 1e-12;  // relative
constexpr double kOracleAbs = 1e-9;           // field amplitude, sqrt(W)
constexpr double kOpticsSeconds = 10.0;
constexpr double kStepResponse = 0.01;  // of the unit step
constexpr double kKcl = 1e-9;           // A
constexpr double kRichardson = 0.05;    // relative, on the error ratio
constexpr double kCircuitSeconds = 30.0;
constexpr double kFeedforward = 1e-8;
constexpr double kJacobian = 1e-6;  // relative, Frobenius norm
constexpr double kFaninLinear = 7.6;
constexpr double kFaninQuadratic = 12.8;
constexpr double kFaninSeconds = 300.0;
constexpr double kCancellation = 0.05;
constexpr double kMonostableArea = 0.005;
constexpr double kBistableRatio = 10.0;
constexpr double kRampInvariance = 0.05;
constexpr double kBisection = 1e-6;
constexpr double kHopfAgreement = 0.2;
constexpr double kRSquared = 0.99;
constexpr double kCalibrationSeconds = 120.0;

struct Result {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1. optics

// Steady state found by circulating the ring field until it stops changing.
optics::MrrPorts circulate(const optics::OpticalField& in, const optics::OpticalField& add, const optics::MrrParams& p,
                           optics::IndexShift dn) {
    auto half = p.waveguide;
    half.length *= 0.5;
    optics::OpticalField ring{0.0, 0.0, in.wavelength};
    optics::MrrPorts out;
    for (int it = 0; it < 2000000; ++it) {
        auto [thru, b1] = optics::couple(in, ring, p.coupler_in);
        auto [drop, b2] = optics::couple(add, optics::propagate_waveguide(b1, half, dn), p.coupler_drop);
        const auto next = optics::propagate_waveguide(b2, half, dn);
        const double change = std::abs(next.amplitude() - ring.amplitude());
        ring = next;
        out = {thru, drop};
        if (change < 1e-16 && it > 10) break;
    }
    return out;
}

void optics_suite(Result& r) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-0.05, 0.05), k(0.05, 1.0), k01(0.0, 1.0), radius(5e-6, 12e-6),
        loss_db(0.0, 1.0), dn(-1e-3, 1e-3), lam(1.5e-6, 1.6e-6), len(0.0, 1e-3), alpha(0.0, 1e-3);
    double worst_cons = 0.0, worst_oracle = 0.0;
    int passive_violations = 0;
    for (int i = 0; i < kOpticsCases; ++i) {
        const double lambda = lam(rng);
        const optics::OpticalField a{u(rng), u(rng), lambda}, b{u(rng), u(rng), lambda};
        auto [o1, o2] = optics::couple(a, b, optics::CouplerParams{k01(rng)});
        worst_cons = std::max(worst_cons, std::abs(o1.power() + o2.power() - a.power() - b.power()) / (a.power() + b.power()));
        const auto w0 = optics::propagate_waveguide(a, {2.4, 0.0, len(rng)});
        worst_cons = std::max(worst_cons, std::abs(w0.power() - a.power()) / a.power());
        if (optics::propagate_waveguide(a, {2.4, alpha(rng), len(rng)}).power() > a.power() * (1.0 + 1e-15)) ++passive_violations;

        const double R = radius(rng);
        const bool lossless = i % 10 == 0;
        const double al = lossless ? 0.0 : optics::alpha_for_round_trip_loss(loss_db(rng), R, lambda);
        const auto p = optics::MrrParams::make(R, k(rng), k(rng), 2.4, al);
        const optics::OpticalField add{i % 3 == 0 ? u(rng) : 0.0, i % 3 == 0 ? u(rng) : 0.0, lambda};
        const optics::IndexShift shift{dn(rng), 0.0};
        const auto closed = optics::mrr_transfer(a, add, p, shift);
        const auto oracle = circulate(a, add, p, shift);
        worst_oracle = std::max({worst_oracle, std::abs(closed.thru.amplitude() - oracle.thru.amplitude()),
                                 std::abs(closed.drop.amplitude() - oracle.drop.amplitude())});
        const double pin = a.power() + add.power(), pout = closed.thru.power() + closed.drop.power();
        if (lossless) worst_cons = std::max(worst_cons, std::abs(pout - pin) / pin);
        else if (pout > pin * (1.0 + 1e-12)) ++passive_violations;
    }
    const double secs = seconds_since(t0);
    r.detail << kOpticsCases << " cases, conservation " << worst_cons << ", oracle " << worst_oracle << ", " << secs << " s";
    r.check(worst_cons <= kPowerConservation, "power conservation");
    r.check(passive_violations == 0, "passivity");
    r.check(worst_oracle <= kOracleAbs, "closed form vs circulation");
    r.check(secs < kOpticsSeconds, "runtime");
}

// ---------------------------------------------------------------- 2. circuit

circuit::Netlist step_rc(double R, double C) {
    circuit::Netlist n;
    n.add(circuit::VoltageSource{"V1", "in", "gnd", Waveform::square({{0.0, 1.0}})});
    n.add(circuit::Resistor{"R1", "in", "out", R});
    n.add(circuit::Capacitor{"C1", "out", "gnd", C});
    n.probe(circuit::Probe::voltage("v_out", "out"));
    return n;
}

circuit::Netlist step_rlc(double R, double L, double C) {
    circuit::Netlist n;
    n.add(circuit::VoltageSource{"V1", "in", "gnd", Waveform::square({{0.0, 1.0}})});
    n.add(circuit::Resistor{"R1", "in", "a", R});
    n.add(circuit::Inductor{"L1", "a", "out", L});
    n.add(circuit::Capacitor{"C1", "out", "gnd", C});
    n.probe(circuit::Probe::voltage("v_out", "out"));
    return n;
}

circuit::CosimResult from_zero(const circuit::Netlist& n, double duration, double dt, circuit::Method m) {
    circuit::CosimOptions o;
    o.dc_init = false;
    return circuit::cosimulate(n, duration, dt, m, o);
}

void circuit_suite(Result& r) {
    const auto t0 = std::chrono::steady_clock::now();
    const double R = 1e3, C = 1e-12, tau = R * C;
    double kcl = 0.0;

    const auto rc = from_zero(step_rc(R, C), 5 * tau, tau / 100, circuit::Method::BackwardEuler);
    double rc_err = 0.0;
    for (std::size_t i = 0; i < rc.trace.rows(); ++i) {
        rc_err = std::max(rc_err, std::abs(rc.trace.column("v_out")[i] - (1.0 - std::exp(-rc.trace.time[i] / tau))));
    }
    kcl = std::max(kcl, rc.summary.max_kcl_residual);

    const double Rs = 10.0, L = 1e-9, Cs = 1e-12;
    const double a = Rs / (2 * L), w0 = 1 / std::sqrt(L * Cs), wd = std::sqrt(w0 * w0 - a * a);
    const double period = 2 * std::numbers::pi / wd;
    const auto rlc = from_zero(step_rlc(Rs, L, Cs), 5 * period, period / 200, circuit::Method::Trapezoidal);
    double rlc_err = 0.0;
    for (std::size_t i = 0; i < rlc.trace.rows(); ++i) {
        const double t = rlc.trace.time[i];
        const double exact = 1.0 - std::exp(-a * t) * (std::cos(wd * t) + a / wd * std::sin(wd * t));
        rlc_err = std::max(rlc_err, std::abs(rlc.trace.column("v_out")[i] - exact));
    }
    kcl = std::max(kcl, rlc.summary.max_kcl_residual);

    // Error at t = tau for halving steps: ratios 2 and 4 for first and second order.
    auto err_at_tau = [&](double dt, circuit::Method m) {
        const auto res = from_zero(step_rc(R, C), 2 * tau, dt, m);
        kcl = std::max(kcl, res.summary.max_kcl_residual);
        return res.trace.column("v_out")[static_cast<std::size_t>(std::llround(tau / dt))] - (1.0 - std::exp(-1.0));
    };
    const double h = tau / 20;
    const double b1 = err_at_tau(h, circuit::Method::BackwardEuler), b2 = err_at_tau(h / 2, circuit::Method::BackwardEuler),
                 b4 = err_at_tau(h / 4, circuit::Method::BackwardEuler);
    const double t1 = err_at_tau(h, circuit::Method::Trapezoidal), t2 = err_at_tau(h / 2, circuit::Method::Trapezoidal),
                 t4 = err_at_tau(h / 4, circuit::Method::Trapezoidal);
    const double be_ratio = (b1 - b2) / (b2 - b4), tr_ratio = (t1 - t2) / (t2 - t4);
    const double secs = seconds_since(t0);
    r.detail << "RC " << 100 * rc_err << "%, RLC " << 100 * rlc_err << "%, KCL " << kcl << " A, BE ratio " << be_ratio
             << ", TR ratio " << tr_ratio << ", " << secs << " s";
    r.check(rc_err < kStepResponse, "RC step");
    r.check(rlc_err < kStepResponse, "RLC step");
    r.check(kcl < kKcl, "KCL residual");
    r.check(std::abs(be_ratio / 2.0 - 1.0) <= kRichardson, "backward Euler first order");
    r.check(std::abs(tr_ratio / 4.0 - 1.0) <= kRichardson, "trapezoidal second order");
    r.check(secs < kCircuitSeconds, "runtime");
}

// ---------------------------------------------------------------- 3. CTRNN

void ctrnn_suite(Result& r) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0), tau(0.5, 2.0), beta(0.5, 6.0);
    double worst_ff = 0.0, worst_jac = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 5, m = 1 + trial % 3;
        auto p = ctrnn::CtrnnParams::uniform(n, m, 1.0, {1.0, 1.0, 0.0, 0.0});
        for (int i = 0; i < n; ++i) {
            p.tau[i] = tau(rng);
            p.b[i] = u(rng);
            p.sigma[i] = {0.5 + std::abs(u(rng)), (u(rng) < 0 ? -1 : 1) * beta(rng), 0.2 * u(rng), 0.5 * u(rng)};
            for (int j = 0; j < m; ++j) p.w_x(i, j) = u(rng);
        }
        ctrnn::Vec x(m);
        for (int j = 0; j < m; ++j) x[j] = u(rng);
        const ctrnn::Vec target = p.w_x * x + p.b;
        ctrnn::Vec s0(n);
        for (int i = 0; i < n; ++i) s0[i] = target[i] + u(rng);
        const double duration = 20.0 * p.tau.maxCoeff();
        const auto tr = ctrnn::integrate(p, [&](double) { return x; }, s0, duration, p.tau.minCoeff() / 50.0, 1000000);
        worst_ff = std::max(worst_ff, (tr.s.back() - target).cwiseAbs().maxCoeff());

        // Jacobian with feedback against central differences of the right-hand side.
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) p.w_y(i, j) = 2.0 * u(rng);
        }
        ctrnn::Vec s(n);
        for (int i = 0; i < n; ++i) s[i] = u(rng);
        const ctrnn::Mat J = ctrnn::jacobian(p, s);
        ctrnn::Mat fd(n, n);
        for (int j = 0; j < n; ++j) {
            const double hj = 1e-5 * std::max(1.0, std::abs(s[j]));
            ctrnn::Vec sp = s, sm = s;
            sp[j] += hj;
            sm[j] -= hj;
            fd.col(j) = (ctrnn::rhs(p, sp, x) - ctrnn::rhs(p, sm, x)) / (2.0 * hj);
        }
        worst_jac = std::max(worst_jac, (J - fd).norm() / J.norm());
    }
    r.detail << "feedforward after 20 tau " << worst_ff << ", Jacobian " << worst_jac;
    r.check(worst_ff <= kFeedforward, "feedforward fixed point");
    r.check(worst_jac <= kJacobian, "Jacobian");
}

// ---------------------------------------------------------------- 4-7. experiments

RunOutput run_default(const std::string& experiment, const json& section = json::object()) {
    json j = {{"experiment", experiment}};
    if (!section.empty()) j[experiment] = section;
    return run_experiment(parse_config(j));
}

void fanin_suite(Result& r) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = run_default("fanin");
    const double secs = seconds_since(t0);
    const auto& m = out.metrics;
    const double lin = m.at("linear_rmse_percent"), quad = m.at("quadratic_rmse_percent"), bin = m.at("fft_bin_Hz");
    const double dt = m.at("drive").at("dt_s"), duration = m.at("drive").at("duration_s");
    double peak_err = 0.0;
    for (const auto& f : m.at("quadratic_fft_peaks_Hz")) peak_err = std::max(peak_err, std::abs(f.get<double>() - 1.8e9));
    const double cancel = m.at("cancellation_ratio");
    r.detail << "linear RMSE " << lin << "%, quadratic RMSE " << quad << "%, quadratic peak off 1.8 GHz by " << peak_err
             << " Hz (bin " << bin << "), cancellation " << cancel << ", " << duration * 1e9 << " ns at " << dt * 1e12
             << " ps in " << secs << " s";
    r.check(lin <= kFaninLinear, "linear RMSE");
    r.check(quad <= kFaninQuadratic, "quadratic RMSE");
    r.check(peak_err <= bin, "frequency doubling");
    r.check(cancel < kCancellation, "subtraction cancels");
    r.check(duration <= 50e-9 && dt == 1e-12, "desk-scale settings");
    r.check(secs < kFaninSeconds, "runtime");
}

void cascade_suite(Result& r) {
    const auto out = run_default("cascade");
    const auto& m = out.metrics;
    const double mono = m.at("monostable_area"), bist = m.at("bistable_area"), ratio = m.at("area_ratio"),
                 spread = m.at("ramp_area_spread");
    const CascadeConfig c;
    double fmin = 1e300, fmax = 0.0;
    for (const auto& ramp : c.ramps) fmin = std::min(fmin, ramp.frequency), fmax = std::max(fmax, ramp.frequency);
    bool classes = true;
    for (const auto& [key, run] : m.at("runs").items()) {
        classes = classes && run.at("bistable").get<bool>() == (run.at("feedback_weight").get<double>() != 0.0);
    }
    r.detail << "W_F=0 area " << mono << ", W_F=1 area " << bist << " (x" << ratio << "), spread across ramps "
             << 100 * spread << "% over a " << fmax / fmin << "x frequency range";
    r.check(mono < kMonostableArea, "monostable area");
    r.check(ratio >= kBistableRatio, "bistable contrast");
    r.check(spread <= kRampInvariance, "ramp-rate invariance");
    r.check(fmax / fmin >= 10.0, "ramp frequencies differ 10x");
    r.check(classes, "classification");
}

void hopf_suite(Result& r) {
    // Reference: with centred biases the symmetric fixed point has eigenvalues
    // (-1 + w_f sigma') / tau +- i sigma' / tau, so the crossing sits at 4 / (alpha beta).
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> al(0.6, 1.4), be(5.0, 12.0), u(-0.5, 0.5);
    double worst_bisect = 0.0;
    bool onset_agrees = true;
    for (int k = 0; k < 4; ++k) {
        double a = al(rng), b = be(rng);
        if (a * b < 4.5) b = 4.5 / a;
        const ctrnn::SigmoidParams s{a, b, 0.2 * u(rng), u(rng)};
        ctrnn::HopfOptions o;
        o.recenter = true;
        o.resolution = 0.05;
        const auto rec = ctrnn::hopf_sweep(ctrnn::hopf_network(0.0, s, 1.0), o);
        const double oracle = 4.0 / (a * b);
        worst_bisect = std::max(worst_bisect, rec.critical_w_f ? std::abs(*rec.critical_w_f - oracle) : 1.0);
        for (const auto& smp : rec.samples) {
            if (std::abs(smp.w_f - oracle) > 0.1) onset_agrees = onset_agrees && smp.cycle.oscillating == (smp.w_f > oracle);
        }
    }

    const auto cfg = parse_config(json{{"experiment", "hopf"}});
    const Hardware hw(cfg.setup, cfg.base_dir);
    const auto phys = run_experiment(cfg, &hw);
    const auto& samples = phys.metrics.at("samples");
    const bool fixed0 = samples.front().at("feedback_weight") == 0.0 && samples.front().at("class") == "fixed_point";
    const bool cycle1 = samples.back().at("feedback_weight") == 1.0 && samples.back().at("class") == "limit_cycle";
    const bool monotone = phys.metrics.at("amplitude_monotone");
    const auto cmp = compare(cfg, hw, phys);
    const auto& rep = cmp.report;
    const double rel = rep.at("critical_relative_difference");
    r.detail << "reference crossing off the analytic value by " << worst_bisect << "; physical W_F* "
             << rep.at("physical_critical_feedback_weight").get<double>() << " vs fitted reference "
             << rep.at("reference_critical_feedback_weight").get<double>() << " (" << 100 * rel << "%)";
    r.check(worst_bisect <= 2 * kBisection, "reference bisection");
    r.check(onset_agrees, "reference eigenvalues and integration agree");
    r.check(fixed0, "fixed point at W_F = 0");
    r.check(cycle1, "limit cycle at W_F = 1");
    r.check(monotone, "amplitude monotone");
    r.check(rep.at("both_oscillate_at_max_weight").get<bool>(), "reference oscillates at W_F = 1");
    r.check(rel <= kHopfAgreement, "physical vs reference W_F*");
}

void wta_suite(Result& r) {
    const auto cfg = parse_config(json{{"experiment", "wta"}});
    const Hardware hw(cfg.setup, cfg.base_dir);
    const auto phys = run_experiment(cfg, &hw);
    const double acc = phys.metrics.at("truth_table_accuracy");
    const bool memory = phys.metrics.at("memory_retained");
    const int checks = phys.metrics.at("memory_checks");
    const bool same = compare(cfg, hw, phys).report.at("same_winner");

    // Symmetric reference network: the diagonal is invariant, so it separates the two basins.
    const ctrnn::SigmoidParams s{1.0, 8.0, 0.0, 0.0};
    auto p = ctrnn::wta_network(-1.0, s, 1.0);
    p.b = ctrnn::centering_bias(p);
    const ctrnn::Vec x = ctrnn::Vec::Zero(2);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> y(0.05, 0.95);
    int starts = 0, wrong = 0;
    while (starts < 300) {
        const double y1 = y(rng), y2 = y(rng);
        if (std::abs(y1 - y2) < 0.01) continue;
        ++starts;
        ctrnn::Vec s0(2);
        s0 << ctrnn::sigmoid_inverse(y1, s), ctrnn::sigmoid_inverse(y2, s);
        const auto w = ctrnn::wta_analyze(p, x, s0, 60.0, 0.02);
        if (w.winner != (y1 > y2 ? 0 : 1)) ++wrong;
    }
    ctrnn::Vec diag(2);
    diag << ctrnn::sigmoid_inverse(0.7, s), ctrnn::sigmoid_inverse(0.7, s);
    const bool tie = ctrnn::wta_analyze(p, x, diag, 60.0, 0.02).tie;
    double tangent = 0.0;
    ctrnn::Vec lo(2), hi(2);
    lo << 0.05, 0.05;
    hi << 0.95, 0.95;
    for (const auto& f : ctrnn::vector_field(p, x, lo, hi, 21, 21)) {
        if (f.valid && f.y1 == f.y2) tangent = std::max(tangent, std::abs(f.dy1 - f.dy2));
    }
    r.detail << "accuracy " << acc << ", memory " << (memory ? "retained" : "lost") << " over " << checks
             << " checks, reference basins " << starts - wrong << "/" << starts << ", diagonal tie "
             << (tie ? "flagged" : "missed") << ", same winner as fitted reference " << (same ? "yes" : "no");
    r.check(acc == 1.0, "truth table");
    r.check(memory && checks > 0, "memory");
    r.check(wrong == 0, "basins split by y1 = y2");
    r.check(tie, "symmetric tie");
    r.check(tangent < 1e-12, "field tangent on the diagonal");
}

// ---------------------------------------------------------------- 8. calibration

void calibration_suite(Result& r) {
    const Setup setup;
    const auto& bank = setup.bank;
    const bool spec_bank = bank.channel_count == 5 && bank.base_radius == 8e-6 && bank.radius_increment == 12e-9 &&
                           bank.base_wavelength == 1548.7e-9 && bank.wavelength_increment == 2.35e-9;
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = run_calibration(setup);
    const double secs = seconds_since(t0);

    bool monotone = run.map.channels.size() == 5;
    for (std::size_t c = 0; c < run.map.channels.size(); ++c) {
        const auto& curve = run.map.channels[c].curve;
        monotone = monotone && curve.front().first == -1.0 && curve.back().first == 1.0;
        // More drop coupling is a more negative weight, so current falls as W rises.
        double prev = 1e300;
        for (int k = 0; k <= 2000; ++k) {
            const double i = calibration::apply_weight(run.map, static_cast<int>(c), -1.0 + 2.0 * k / 2000);
            monotone = monotone && i < prev;
            prev = i;
        }
    }

    // Photocurrent read back through a fresh rig, fitted here.
    calibration::Rig rig(bank, setup.neuron, setup.calibration.probe_power);
    double worst_r2 = 1.0;
    for (int c = 0; c < bank.channel_count; ++c) {
        rig.zero_heaters();
        rig.set_probe(bank.wavelength(c));
        std::vector<double> w, ip;
        for (int k = 0; k <= 18; ++k) {
            w.push_back(-0.9 + 0.1 * k);
            rig.set_heater(c, calibration::apply_weight(run.map, c, w.back()));
            ip.push_back(rig.photocurrent());
        }
        const double n = static_cast<double>(w.size());
        double sw = 0, si = 0, sww = 0, swi = 0;
        for (std::size_t k = 0; k < w.size(); ++k) sw += w[k], si += ip[k], sww += w[k] * w[k], swi += w[k] * ip[k];
        const double slope = (n * swi - sw * si) / (n * sww - sw * sw), icpt = (si - slope * sw) / n;
        double ss_res = 0, ss_tot = 0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            ss_res += std::pow(ip[k] - (icpt + slope * w[k]), 2);
            ss_tot += std::pow(ip[k] - si / n, 2);
        }
        worst_r2 = std::min(worst_r2, 1.0 - ss_res / ss_tot);
    }
    r.detail << run.map.channels.size() << " channels, maps " << (monotone ? "strictly decreasing" : "NOT monotone")
             << ", worst closed-loop R^2 " << worst_r2 << ", " << secs << " s";
    r.check(spec_bank, "default bank geometry");
    r.check(monotone, "monotone maps");
    r.check(worst_r2 > kRSquared, "affine photocurrent");
    r.check(secs < kCalibrationSeconds, "runtime");
}

// ---------------------------------------------------------------- 9. determinism

std::string slurp(const fs::path& p) { return read_file(p.string()); }

void determinism_suite(Result& r) {
    const auto root = fs::temp_directory_path() / "pnsim_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<json> configs = {
        {{"experiment", "fanin"}},
        {{"experiment", "hopf"}},
        {{"experiment", "wta"}},
        {{"experiment", "cascade"}, {"cascade", {{"ramps", {{{"name", "r"}, {"frequency", 1e7}}}}}}},
        json::parse(R"({"experiment": "ctrnn-ref", "ctrnn": {"network": {"preset": "hopf", "w_f": 1.0,
            "sigma": {"alpha": 1, "beta": 8, "gamma": 0, "s0": 0}, "centred": true}, "s_init": [0.01, 0]}})"),
    };
    int identical = 0;
    std::vector<std::string> differing;
    for (const auto& j : configs) {
        const std::string name = j.at("experiment");
        for (const char* pass : {"a", "b"}) write_outputs((root / name / pass).string(), run_any(parse_config(j)));
        bool same = true;
        for (const char* f : {"trace.csv", "metrics.json"}) same = same && slurp(root / name / "a" / f) == slurp(root / name / "b" / f);
        if (same) ++identical;
        else differing.push_back(name);
    }
    const Setup setup;
    for (const char* pass : {"a", "b"}) write_calibration((root / "calibrate" / pass).string(), run_calibration(setup), json::object());
    bool cal_same = true;
    for (const char* f : {"weight_map.json", "metrics.json", "sweeps.csv"}) {
        cal_same = cal_same && slurp(root / "calibrate" / "a" / f) == slurp(root / "calibrate" / "b" / f);
    }
    if (cal_same) ++identical;
    else differing.push_back("calibrate");
    fs::remove_all(root);
    r.detail << identical << "/" << configs.size() + 1 << " runs bit-identical (fanin, hopf, wta, cascade, ctrnn-ref, calibrate)";
    for (const auto& d : differing) r.detail << " differs: " << d;
    r.check(differing.empty(), "bit-identical outputs");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Result&)>>> criteria = {
        {"optics property suite", optics_suite},
        {"circuit solver oracles", circuit_suite},
        {"CTRNN feedforward and Jacobian", ctrnn_suite},
        {"fan-in", fanin_suite},
        {"cascadability", cascade_suite},
        {"Hopf bifurcation", hopf_suite},
        {"winner-take-all", wta_suite},
        {"weight calibration", calibration_suite},
        {"determinism", determinism_suite},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Result r;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[k].second(r);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail << " [exception: " << e.what() << "]";
        }
        if (!r.pass) ++failed;
        std::cout << (r.pass ? "PASS" : "FAIL") << " " << k + 1 << " " << criteria[k].first << ": " << r.detail.str() << " ("
                  << seconds_since(t0) << " s)" << std::endl;
    }
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
