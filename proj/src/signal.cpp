#include "pnsim/signal.hpp"

#include "pnsim/errors.hpp"

#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace pnsim::signal {

std::vector<double> highpass(const std::vector<double>& x, double dt, double cutoff) {
    if (!(dt > 0.0) || !(cutoff > 0.0) || cutoff >= 0.5 / dt) {
        throw ConfigError("high-pass cutoff must lie in (0, Nyquist)");
    }
    // H(s) = s / (s + wc), prewarped bilinear map.
    const double k = std::tan(std::numbers::pi * cutoff * dt);
    const double a = (1.0 - k) / (1.0 + k);
    const double g = 1.0 / (1.0 + k);
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t n = 1; n < x.size(); ++n) {
        y[n] = a * y[n - 1] + g * (x[n] - x[n - 1]);
    }
    return y;
}

std::vector<double> amplitude_spectrum(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 2) throw InvalidInputError("spectrum needs at least two samples");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> centred(n);
    std::transform(x.begin(), x.end(), centred.begin(), [&](double v) { return v - mean; });
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, centred);
    std::vector<double> amp(n / 2 + 1);
    for (std::size_t k = 0; k < amp.size(); ++k) {
        const double scale = (k == 0 || 2 * k == n) ? 1.0 : 2.0;
        amp[k] = scale * std::abs(spec[k]) / static_cast<double>(n);
    }
    return amp;
}

SpectralPeak fft_peak(const std::vector<double>& x, double dt) {
    const auto amp = amplitude_spectrum(x);
    const auto it = std::max_element(amp.begin() + 1, amp.end());
    const auto k = static_cast<double>(it - amp.begin());
    return {k / (static_cast<double>(x.size()) * dt), *it};
}

double line_amplitude(const std::vector<double>& x, double dt, double frequency) {
    const auto amp = amplitude_spectrum(x);
    const auto k = static_cast<std::size_t>(std::llround(frequency * static_cast<double>(x.size()) * dt));
    return k < amp.size() ? amp[k] : 0.0;
}

double polyval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw InvalidInputError("rmse needs equal non-empty series");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

namespace {

double range_of(const std::vector<double>& y) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    return *hi - *lo;
}

}  // namespace

PolyFit polyfit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
    if (x.size() != y.size() || static_cast<int>(x.size()) <= degree || degree < 0) {
        throw FitError("polynomial fit needs more points than coefficients");
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    // Centre and scale x for conditioning, then map the coefficients back.
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double sx = 0.0;
    for (double v : x) sx = std::max(sx, std::abs(v - mx));
    if (!(sx > 0.0)) throw FitError("degenerate abscissa");
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (x[i] - mx) / sx;
        double p = 1.0;
        for (int d = 0; d <= degree; ++d, p *= u) a(i, d) = p;
        b[i] = y[i];
    }
    const Eigen::VectorXd cu = a.colPivHouseholderQr().solve(b);
    // Expand sum cu_d ((x - mx)/sx)^d into powers of x.
    std::vector<double> c(degree + 1, 0.0);
    for (int d = 0; d <= degree; ++d) {
        double binom = 1.0;
        for (int k = 0; k <= d; ++k) {
            c[k] += cu[d] * binom * std::pow(-mx, d - k) / std::pow(sx, d);
            binom = binom * (d - k) / (k + 1);
        }
    }
    PolyFit f;
    const Eigen::VectorXd fit = a * cu;
    std::vector<double> yf(fit.begin(), fit.end());
    f.coeffs = c;
    f.rmse = rmse(y, yf);
    const double r = range_of(y);
    f.rmse_percent = r > 0.0 ? 100.0 * f.rmse / r : 0.0;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double ss_tot = 0.0;
    for (double v : y) ss_tot += (v - my) * (v - my);
    f.r_squared = ss_tot > 0.0 ? 1.0 - f.rmse * f.rmse * static_cast<double>(n) / ss_tot : 1.0;
    return f;
}

double loop_area(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidInputError("loop needs matching coordinates");
    const std::size_t n = x.size();
    if (n < 3) return 0.0;
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        a += x[i] * y[j] - x[j] * y[i];
    }
    return 0.5 * std::abs(a);
}

namespace {

struct SigmoidResidual : Eigen::DenseFunctor<double> {
    const std::vector<double>& x;
    const std::vector<double>& y;
    SigmoidResidual(const std::vector<double>& xs, const std::vector<double>& ys)
        : Eigen::DenseFunctor<double>(4, static_cast<int>(xs.size())), x(xs), y(ys) {}

    // p = (alpha, beta, gamma, s0)
    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            f[static_cast<Eigen::Index>(i)] = sigmoid(x[i], p) - y[i];
        }
        return 0;
    }
    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = 1.0 / (1.0 + std::exp(-p[1] * (x[i] - p[3])));
            const double du = u * (1.0 - u);
            const auto r = static_cast<Eigen::Index>(i);
            j(r, 0) = u;
            j(r, 1) = p[0] * du * (x[i] - p[3]);
            j(r, 2) = 1.0;
            j(r, 3) = -p[0] * du * p[1];
        }
        return 0;
    }
    static double sigmoid(double s, const Eigen::VectorXd& p) {
        return p[0] / (1.0 + std::exp(-p[1] * (s - p[3]))) + p[2];
    }
};

}  // namespace

SigmoidFit fit_sigmoid(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 5) throw FitError("sigmoid fit needs at least five points");
    const double xr = range_of(x), yr = range_of(y);
    if (!(xr > 0.0) || !(yr > 0.0)) throw FitError("degenerate cloud: no excursion to fit");

    // Initial guess from the extremes and the mid-level crossing.
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    const double y_lo = *std::min_element(y.begin(), y.end());
    const double mid = y_lo + 0.5 * yr;
    double s0 = x[order[order.size() / 2]];
    for (std::size_t k = 1; k < order.size(); ++k) {
        const double a = y[order[k - 1]] - mid, b = y[order[k]] - mid;
        if (a * b <= 0.0) {
            s0 = x[order[k]];
            break;
        }
    }
    const bool rising = y[order.back()] > y[order.front()];
    Eigen::VectorXd p(4);
    p << yr, (rising ? 1.0 : -1.0) * 8.0 / xr, y_lo, s0;

    SigmoidResidual fn(x, y);
    Eigen::LevenbergMarquardt<SigmoidResidual> lm(fn);
    lm.setMaxfev(2000);
    lm.minimize(p);
    if (!p.allFinite()) throw FitError("sigmoid fit diverged");
    if (p[0] < 0.0) {  // same curve with the orientation flipped
        p[2] += p[0];
        p[0] = -p[0];
        p[1] = -p[1];
    }
    SigmoidFit out;
    out.params = {p[0], p[1], p[2], p[3]};
    std::vector<double> fit(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) fit[i] = SigmoidResidual::sigmoid(x[i], p);
    out.rmse = rmse(y, fit);
    out.rmse_percent = 100.0 * out.rmse / yr;
    return out;
}

double rise_time_63(const std::vector<double>& t, const std::vector<double>& y, double t_step) {
    if (t.size() != y.size() || t.size() < 3) throw InvalidInputError("rise time needs a trace");
    const auto k0 = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t_step) - t.begin());
    if (k0 >= t.size()) throw InvalidInputError("step lies after the trace");
    const double start = k0 > 0 ? y[k0 - 1] : y[0];
    const double level = start + 0.632 * (y.back() - start);
    const bool up = y.back() > start;
    for (std::size_t k = k0; k < t.size(); ++k) {
        if ((up && y[k] >= level) || (!up && y[k] <= level)) {
            if (k == k0) return t[k] - t_step;
            const double f = (level - y[k - 1]) / (y[k] - y[k - 1]);
            return t[k - 1] + f * (t[k] - t[k - 1]) - t_step;
        }
    }
    throw FitError("step response never reaches 63.2%");
}

}  // namespace pnsim::signal
