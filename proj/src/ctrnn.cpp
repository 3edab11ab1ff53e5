#include "pnsim/ctrnn.hpp"

#include "pnsim/errors.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pnsim::ctrnn {

using nlohmann::json;

void SigmoidParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw InvalidParamsError("sigmoid alpha must be > 0");
    }
    if (beta == 0.0 || !std::isfinite(beta) || !std::isfinite(gamma) || !std::isfinite(s0)) {
        throw InvalidParamsError("sigmoid beta must be nonzero and parameters finite");
    }
}

double sigmoid(double s, const SigmoidParams& p) {
    const double z = -p.beta * (s - p.s0);
    if (z > 700.0) return p.gamma;
    return p.alpha / (1.0 + std::exp(z)) + p.gamma;
}

double sigmoid_derivative(double s, const SigmoidParams& p) {
    const double z = -p.beta * (s - p.s0);
    if (std::abs(z) > 700.0) return 0.0;
    const double e = std::exp(z);
    return p.alpha * p.beta * e / ((1.0 + e) * (1.0 + e));
}

double sigmoid_inverse(double y, const SigmoidParams& p) {
    const double u = (y - p.gamma) / p.alpha;
    if (!(u > 0.0 && u < 1.0)) {
        throw InvalidInputError("value outside the open sigmoid range");
    }
    return p.s0 + std::log(u / (1.0 - u)) / p.beta;
}

void to_json(json& j, const SigmoidParams& p) {
    j = {{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}, {"s0", p.s0}};
}

void from_json(const json& j, SigmoidParams& p) {
    p.alpha = j.value("alpha", p.alpha);
    p.beta = j.value("beta", p.beta);
    p.gamma = j.value("gamma", p.gamma);
    p.s0 = j.value("s0", p.s0);
}

CtrnnParams CtrnnParams::uniform(int n, int m, double tau, const SigmoidParams& s) {
    CtrnnParams p;
    p.tau = Vec::Constant(n, tau);
    p.b = Vec::Zero(n);
    p.w_x = Mat::Zero(n, m);
    p.w_y = Mat::Zero(n, n);
    p.sigma.assign(n, s);
    return p;
}

void CtrnnParams::validate() const {
    const int n = size();
    if (n < 1) throw InvalidParamsError("network needs at least one neuron");
    if ((tau.array() <= 0.0).any() || !tau.allFinite()) throw InvalidParamsError("tau must be > 0");
    if (b.size() != n || w_x.rows() != n || w_y.rows() != n || w_y.cols() != n ||
        static_cast<int>(sigma.size()) != n) {
        throw InvalidParamsError("network parameter shapes disagree");
    }
    if (!b.allFinite() || !w_x.allFinite() || !w_y.allFinite()) throw InvalidParamsError("non-finite weights");
    for (const auto& s : sigma) s.validate();
}

namespace {

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
        rows.push_back(r);
    }
    return rows;
}

Mat matrix_from(const json& j, Eigen::Index rows) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ConfigError("matrix must have one row per neuron");
    }
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols) throw ConfigError("ragged matrix");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

Vec vec_from(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void to_json(json& j, const CtrnnParams& p) {
    j = {{"tau", std::vector<double>(p.tau.begin(), p.tau.end())},
         {"b", std::vector<double>(p.b.begin(), p.b.end())},
         {"W_x", matrix_json(p.w_x)},
         {"W_y", matrix_json(p.w_y)},
         {"sigma", p.sigma}};
}

void from_json(const json& j, CtrnnParams& p) {
    p.tau = vec_from(j.at("tau"));
    const auto n = p.tau.size();
    p.b = j.contains("b") ? vec_from(j.at("b")) : Vec::Zero(n);
    p.w_x = j.contains("W_x") ? matrix_from(j.at("W_x"), n) : Mat::Zero(n, 0);
    p.w_y = j.contains("W_y") ? matrix_from(j.at("W_y"), n) : Mat::Zero(n, n);
    if (j.contains("sigma")) {
        const auto& s = j.at("sigma");
        if (s.is_array()) {
            p.sigma = s.get<std::vector<SigmoidParams>>();
        } else {
            p.sigma.assign(n, s.get<SigmoidParams>());
        }
    } else {
        p.sigma.assign(n, SigmoidParams{});
    }
    p.validate();
}

Vec outputs(const CtrnnParams& p, const Vec& s) {
    Vec y(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) y[i] = sigmoid(s[i], p.sigma[i]);
    return y;
}

Vec rhs(const CtrnnParams& p, const Vec& s, const Vec& x) {
    Vec drive = -(s - p.b) + p.w_y * outputs(p, s);
    if (p.input_count() > 0 && x.size() > 0) drive += p.w_x * x;
    return drive.cwiseQuotient(p.tau);
}

Mat jacobian(const CtrnnParams& p, const Vec& s) {
    const int n = p.size();
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = sigmoid_derivative(s[i], p.sigma[i]);
    Mat j = -Mat::Identity(n, n) + p.w_y * d.asDiagonal();
    return p.tau.cwiseInverse().asDiagonal() * j;
}

Trajectory integrate(const CtrnnParams& p, const InputFn& x, const Vec& s_init, double duration, double dt,
                     std::size_t record_interval) {
    p.validate();
    if (s_init.size() != p.size()) throw InvalidInputError("initial state has the wrong size");
    if (!(dt > 0.0) || dt > p.tau.minCoeff() / 20.0 * (1.0 + 1e-12)) {
        throw InvalidInputError("dt must lie in (0, min(tau)/20]");
    }
    if (!(duration >= 0.0)) throw InvalidInputError("duration must be >= 0");
    record_interval = std::max<std::size_t>(record_interval, 1);

    const Vec none;
    auto input = [&](double t) { return x ? x(t) : none; };
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));

    Trajectory tr;
    tr.time.reserve(steps / record_interval + 2);
    Vec s = s_init;
    auto record = [&](double t) {
        tr.time.push_back(t);
        tr.s.push_back(s);
        tr.y.push_back(outputs(p, s));
    };
    record(0.0);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vec xm = input(t + 0.5 * dt);
        const Vec k1 = rhs(p, s, input(t));
        const Vec k2 = rhs(p, s + 0.5 * dt * k1, xm);
        const Vec k3 = rhs(p, s + 0.5 * dt * k2, xm);
        const Vec k4 = rhs(p, s + dt * k3, input(t + dt));
        s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!s.allFinite()) throw DivergenceError("CTRNN state became non-finite", t + dt);
        if ((k + 1) % record_interval == 0 || k + 1 == steps) record(static_cast<double>(k + 1) * dt);
    }
    return tr;
}

std::pair<Vec, Vec> feedforward_fixed_point(const CtrnnParams& p, const Vec& x) {
    p.validate();
    if (!p.w_y.isZero(0.0)) throw ContractViolation("feedforward fixed point needs W_y = 0");
    Vec s = p.b;
    if (p.input_count() > 0) s += p.w_x * x;
    return {s, outputs(p, s)};
}

const char* stability_name(Stability s) noexcept {
    switch (s) {
        case Stability::StableNode: return "stable_node";
        case Stability::StableFocus: return "stable_focus";
        case Stability::Saddle: return "saddle";
        case Stability::UnstableNode: return "unstable_node";
        case Stability::UnstableFocus: return "unstable_focus";
        case Stability::Marginal: return "center-marginal";
    }
    return "?";
}

Stability classify(const std::vector<std::complex<double>>& ev, double tol) {
    bool any_pos = false, any_neg = false, any_zero = false, complex_pair = false;
    for (const auto& l : ev) {
        if (l.real() > tol) any_pos = true;
        else if (l.real() < -tol) any_neg = true;
        else any_zero = true;
        if (std::abs(l.imag()) > tol) complex_pair = true;
    }
    if (any_pos && any_neg) return Stability::Saddle;
    if (any_zero) return Stability::Marginal;
    if (any_pos) return complex_pair ? Stability::UnstableFocus : Stability::UnstableNode;
    return complex_pair ? Stability::StableFocus : Stability::StableNode;
}

std::vector<std::complex<double>> eigenvalues(const Mat& m) {
    Eigen::EigenSolver<Mat> es(m, false);
    const auto& v = es.eigenvalues();
    std::vector<std::complex<double>> out(v.begin(), v.end());
    std::sort(out.begin(), out.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    return out;
}

FixedPoint analyze_fixed_point(const CtrnnParams& p, const Vec& s, const Vec& x) {
    FixedPoint fp;
    fp.s_star = s;
    fp.eigenvalues = eigenvalues(jacobian(p, s));
    fp.stability = classify(fp.eigenvalues);
    fp.residual = rhs(p, s, x).cwiseProduct(p.tau).cwiseAbs().maxCoeff();
    return fp;
}

std::optional<FixedPoint> find_fixed_point(const CtrnnParams& p, const Vec& x, const Vec& guess, double tol,
                                           int max_iterations) {
    Vec s = guess;
    for (int it = 0; it < max_iterations; ++it) {
        const Vec f = rhs(p, s, x);
        const Vec ds = jacobian(p, s).partialPivLu().solve(-f);
        if (!ds.allFinite()) return std::nullopt;
        s += ds;
        if (ds.cwiseAbs().maxCoeff() < tol * std::max(1.0, s.cwiseAbs().maxCoeff())) {
            auto fp = analyze_fixed_point(p, s, x);
            if (fp.residual < 1e-10) return fp;
        }
    }
    return std::nullopt;
}

std::vector<NullclineRoot> nullcline_roots(const CtrnnParams& p, double x, double w_f, int grid) {
    p.validate();
    if (p.size() != 1) throw ContractViolation("nullcline analysis needs a single neuron");
    const auto& sg = p.sigma[0];
    const double c = p.b[0] + x;
    const double lo_sig = sg.gamma, hi_sig = sg.gamma + sg.alpha;
    const double margin = 1.0 + 0.1 * std::abs(w_f) * sg.alpha;
    const double lo = c + std::min(w_f * lo_sig, w_f * hi_sig) - margin;
    const double hi = c + std::max(w_f * lo_sig, w_f * hi_sig) + margin;
    auto f = [&](double s) { return -s + c + w_f * sigmoid(s, sg); };
    auto slope = [&](double s) { return -1.0 + w_f * sigmoid_derivative(s, sg); };

    grid = std::max(grid, 3);
    std::vector<NullclineRoot> roots;
    auto push = [&](double s) {
        if (!roots.empty() && std::abs(roots.back().s - s) < 1e-10) return;
        const double d = slope(s);
        roots.push_back({s, d < 0.0, d});
    };
    const double h = (hi - lo) / (grid - 1);
    double s_prev = lo, f_prev = f(lo);
    for (int i = 1; i < grid; ++i) {
        const double s = lo + i * h;
        const double fs = f(s);
        if (f_prev == 0.0) {
            push(s_prev);
        } else if (f_prev * fs < 0.0) {
            auto stop = [](double a, double b) { return std::abs(b - a) <= 1e-12; };
            const auto br = boost::math::tools::bisect(f, s_prev, s, stop);
            push(0.5 * (br.first + br.second));
        }
        s_prev = s;
        f_prev = fs;
    }
    if (f_prev == 0.0) push(s_prev);
    return roots;
}

std::vector<double> cubic_nullcline_roots(const CtrnnParams& p, double x, double w_f) {
    p.validate();
    if (p.size() != 1) throw ContractViolation("nullcline analysis needs a single neuron");
    const auto& sg = p.sigma[0];
    // sigma(s0 + u) ~ alpha/2 + gamma + (alpha beta / 4) u - (alpha beta^3 / 48) u^3
    const double c0 = p.b[0] + x + w_f * (sg.alpha / 2 + sg.gamma) - sg.s0;
    const double c1 = w_f * sg.alpha * sg.beta / 4 - 1.0;
    const double c3 = -w_f * sg.alpha * std::pow(sg.beta, 3) / 48;
    std::vector<double> out;
    if (c3 == 0.0) {
        if (c1 != 0.0) out.push_back(sg.s0 - c0 / c1);
        return out;
    }
    // Companion matrix of u^3 + (c1/c3) u + c0/c3.
    Mat comp = Mat::Zero(3, 3);
    comp(1, 0) = 1.0;
    comp(2, 1) = 1.0;
    comp(0, 2) = -c0 / c3;
    comp(1, 2) = -c1 / c3;
    for (const auto& l : eigenvalues(comp)) {
        if (std::abs(l.imag()) < 1e-9 * std::max(1.0, std::abs(l.real()))) out.push_back(sg.s0 + l.real());
    }
    std::sort(out.begin(), out.end());
    return out;
}

CtrnnParams hopf_network(double w_f, const SigmoidParams& s, double tau) {
    auto p = CtrnnParams::uniform(2, 0, tau, s);
    p.w_y << w_f, 1.0, -1.0, w_f;
    return p;
}

CtrnnParams wta_network(double w_inh, const SigmoidParams& s, double tau) {
    auto p = CtrnnParams::uniform(2, 2, tau, s);
    p.w_y << 1.0, w_inh, w_inh, 1.0;
    p.w_x = Mat::Identity(2, 2);
    return p;
}

Vec centering_bias(const CtrnnParams& p) {
    const int n = p.size();
    Vec mid(n), s0(n);
    for (int i = 0; i < n; ++i) {
        mid[i] = p.sigma[i].gamma + p.sigma[i].alpha / 2;
        s0[i] = p.sigma[i].s0;
    }
    return s0 - p.w_y * mid;
}

CycleMeasure measure_cycle(const std::vector<double>& time, const std::vector<double>& y, double discard,
                           double threshold, int periods) {
    CycleMeasure m;
    const auto first = std::lower_bound(time.begin(), time.end(), discard) - time.begin();
    if (time.size() - first < 4) return m;
    const auto b = y.begin() + first;
    const auto [mn, mx] = std::minmax_element(b, y.end());
    const double mean = 0.5 * (*mn + *mx);
    // Upward crossings of the mid level.
    std::vector<double> ups;
    for (std::size_t k = first + 1; k < y.size(); ++k) {
        if (y[k - 1] < mean && y[k] >= mean) {
            const double f = (mean - y[k - 1]) / (y[k] - y[k - 1]);
            ups.push_back(time[k - 1] + f * (time[k] - time[k - 1]));
        }
    }
    std::size_t start = first;
    if (ups.size() >= 2) {
        const std::size_t use = std::min<std::size_t>(periods, ups.size() - 1);
        const double t0 = ups[ups.size() - 1 - use];
        m.period = (ups.back() - t0) / static_cast<double>(use);
        start = std::lower_bound(time.begin(), time.end(), t0) - time.begin();
    }
    const auto [lo, hi] = std::minmax_element(y.begin() + start, y.end());
    m.amplitude = *hi - *lo;
    m.oscillating = m.amplitude > threshold && ups.size() >= 3;
    return m;
}

namespace {

HopfSample hopf_point(const CtrnnParams& base, double w_f, const Vec& guess, const HopfOptions& opts,
                      bool run_integration) {
    CtrnnParams p = base;
    p.w_y(0, 0) = w_f;
    p.w_y(1, 1) = w_f;
    if (opts.recenter) p.b = centering_bias(p);
    const Vec x = Vec::Zero(p.input_count());
    HopfSample out;
    out.w_f = w_f;
    auto fp = find_fixed_point(p, x, guess);
    if (!fp) {
        // Settle by integration, then polish.
        const double tau = p.tau.maxCoeff();
        auto tr = integrate(p, {}, guess, 200 * tau, p.tau.minCoeff() * opts.dt_fraction, 100);
        fp = find_fixed_point(p, x, tr.s.back());
        out.newton_converged = false;
        if (!fp) fp = analyze_fixed_point(p, tr.s.back(), x);
    }
    out.fixed_point = *fp;
    out.max_real = fp->eigenvalues.front().real();
    if (run_integration) {
        const double tau = p.tau.maxCoeff();
        const double dt = p.tau.minCoeff() * opts.dt_fraction;
        double period = 2 * 3.141592653589793 * tau;
        const auto& l = fp->eigenvalues.front();
        if (std::abs(l.imag()) > 0.0) period = 2 * 3.141592653589793 / std::abs(l.imag());
        const double discard = opts.discard_taus * tau;
        const double duration = discard + (opts.periods + 2) * 2 * period;
        Vec start = fp->s_star;
        start[0] += 1e-3;
        auto tr = integrate(p, {}, start, duration, dt);
        std::vector<double> y0(tr.y.size());
        for (std::size_t k = 0; k < y0.size(); ++k) y0[k] = tr.y[k][0];
        out.cycle = measure_cycle(tr.time, y0, discard, 1e-6 * p.sigma[0].alpha, opts.periods);
    }
    return out;
}

}  // namespace

HopfRecord hopf_sweep(const CtrnnParams& base, const HopfOptions& opts) {
    base.validate();
    if (base.size() != 2) throw ContractViolation("Hopf sweep needs two neurons");
    if (!(opts.resolution > 0.0) || !(opts.w_max >= opts.w_min)) throw InvalidInputError("bad sweep range");
    HopfRecord rec;
    const int n = static_cast<int>(std::floor((opts.w_max - opts.w_min) / opts.resolution + 1e-9)) + 1;
    Vec guess = base.b;
    for (int i = 0; i < n; ++i) {
        const double w = opts.w_min + i * opts.resolution;
        auto s = hopf_point(base, w, guess, opts, opts.integrate);
        guess = s.fixed_point.s_star;
        rec.samples.push_back(std::move(s));
    }
    for (std::size_t i = 1; i < rec.samples.size(); ++i) {
        const auto& a = rec.samples[i - 1];
        const auto& b = rec.samples[i];
        if (a.max_real < 0.0 && b.max_real >= 0.0) {
            double lo = a.w_f, hi = b.w_f;
            Vec g = a.fixed_point.s_star;
            while (hi - lo > opts.bisect_tolerance) {
                const double mid = 0.5 * (lo + hi);
                auto s = hopf_point(base, mid, g, opts, false);
                if (s.max_real < 0.0) {
                    lo = mid;
                    g = s.fixed_point.s_star;
                } else {
                    hi = mid;
                }
            }
            rec.critical_w_f = 0.5 * (lo + hi);
            break;
        }
    }
    return rec;
}

WtaResult wta_analyze(const CtrnnParams& p, const Vec& x, const Vec& s_init, double duration, double dt) {
    WtaResult r;
    r.trajectory = integrate(p, [&](double) { return x; }, s_init, duration, dt);
    const auto& tr = r.trajectory;
    r.y_final = tr.y.back();
    const Vec ds = rhs(p, tr.s.back(), x);
    const double speed = ds.cwiseProduct(p.tau).cwiseAbs().maxCoeff();
    // Oscillation check over the last quarter of the run.
    const std::size_t q = tr.y.size() * 3 / 4;
    double swing = 0.0;
    for (std::size_t k = q; k < tr.y.size(); ++k) {
        swing = std::max(swing, (tr.y[k] - r.y_final).cwiseAbs().maxCoeff());
    }
    r.settled = speed < 1e-6 && swing < 1e-3 * p.sigma[0].alpha;
    if (!r.settled) {
        r.diagnostics = "no settling: |tau ds/dt| = " + std::to_string(speed) + ", late swing = " +
                        std::to_string(swing);
        return r;
    }
    Eigen::Index w = 0;
    const double top = r.y_final.maxCoeff(&w);
    int ties = 0;
    for (Eigen::Index i = 0; i < r.y_final.size(); ++i) {
        if (std::abs(r.y_final[i] - top) < 1e-6 * p.sigma[i].alpha) ++ties;
    }
    if (ties > 1) {
        r.tie = true;
        r.diagnostics = "outputs tied";
        return r;
    }
    r.winner = static_cast<int>(w);
    return r;
}

std::vector<FieldSample> vector_field(const CtrnnParams& p, const Vec& x, const Vec& lo, const Vec& hi, int n1,
                                      int n2) {
    p.validate();
    if (p.size() != 2) throw ContractViolation("vector field needs two neurons");
    std::vector<FieldSample> out;
    out.reserve(static_cast<std::size_t>(n1) * n2);
    for (int i = 0; i < n1; ++i) {
        for (int k = 0; k < n2; ++k) {
            FieldSample f;
            f.y1 = n1 > 1 ? lo[0] + (hi[0] - lo[0]) * i / (n1 - 1) : lo[0];
            f.y2 = n2 > 1 ? lo[1] + (hi[1] - lo[1]) * k / (n2 - 1) : lo[1];
            const double in1 = (f.y1 - p.sigma[0].gamma) / p.sigma[0].alpha;
            const double in2 = (f.y2 - p.sigma[1].gamma) / p.sigma[1].alpha;
            if (in1 > 0.0 && in1 < 1.0 && in2 > 0.0 && in2 < 1.0) {
                Vec s(2);
                s << sigmoid_inverse(f.y1, p.sigma[0]), sigmoid_inverse(f.y2, p.sigma[1]);
                const Vec ds = rhs(p, s, x);
                f.dy1 = sigmoid_derivative(s[0], p.sigma[0]) * ds[0];
                f.dy2 = sigmoid_derivative(s[1], p.sigma[1]) * ds[1];
                f.valid = true;
            }
            out.push_back(f);
        }
    }
    return out;
}

}  // namespace pnsim::ctrnn
