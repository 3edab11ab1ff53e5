#pragma once

// Post-processing of sampled traces.

#include "pnsim/ctrnn.hpp"

#include <vector>

namespace pnsim::signal {

/// First-order high-pass, bilinear-transform discretisation. Starts from rest at x[0].
std::vector<double> highpass(const std::vector<double>& x, double dt, double cutoff);

/// One-sided amplitude spectrum of the mean-removed signal; bin k sits at k / (N dt).
std::vector<double> amplitude_spectrum(const std::vector<double>& x);

struct SpectralPeak {
    double frequency = 0.0;
    double amplitude = 0.0;
};

/// Strongest non-DC line.
SpectralPeak fft_peak(const std::vector<double>& x, double dt);
/// Amplitude of the bin nearest `frequency`.
double line_amplitude(const std::vector<double>& x, double dt, double frequency);

struct PolyFit {
    std::vector<double> coeffs;  // c0 + c1 x + ...
    double rmse = 0.0;
    double rmse_percent = 0.0;   // relative to the range of y
    double r_squared = 0.0;
};

double polyval(const std::vector<double>& c, double x);
PolyFit polyfit(const std::vector<double>& x, const std::vector<double>& y, int degree);

double rmse(const std::vector<double>& a, const std::vector<double>& b);

/// Shoelace area of the closed polygon through (x, y).
double loop_area(const std::vector<double>& x, const std::vector<double>& y);

/// Least-squares sigmoid through the (x, y) cloud.
struct SigmoidFit {
    ctrnn::SigmoidParams params;
    double rmse = 0.0;
    double rmse_percent = 0.0;
};
SigmoidFit fit_sigmoid(const std::vector<double>& x, const std::vector<double>& y);

/// Time for a step response to cover 63.2% of its total change, measured from `t_step`.
double rise_time_63(const std::vector<double>& t, const std::vector<double>& y, double t_step);

}  // namespace pnsim::signal
