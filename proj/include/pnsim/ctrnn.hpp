#pragma once

// Continuous-time recurrent neural network reference model:
//   tau ds/dt = -(s - b) + W_x x + W_y sigma(s),   y = sigma(s)
// with fixed-point, nullcline and bifurcation analysis.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pnsim::ctrnn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct SigmoidParams {
    double alpha = 1.0;
    double beta = 1.0;  // sign sets orientation
    double gamma = 0.0;
    double s0 = 0.0;

    void validate() const;
    bool operator==(const SigmoidParams&) const = default;
};

double sigmoid(double s, const SigmoidParams& p);
double sigmoid_derivative(double s, const SigmoidParams& p);
/// Inverse on the open range (gamma, alpha + gamma).
double sigmoid_inverse(double y, const SigmoidParams& p);

void to_json(nlohmann::json& j, const SigmoidParams& p);
void from_json(const nlohmann::json& j, SigmoidParams& p);

struct CtrnnParams {
    Vec tau;
    Vec b;
    Mat w_x;  // n x inputs
    Mat w_y;  // n x n
    std::vector<SigmoidParams> sigma;

    /// n neurons, m inputs, all weights and biases zero.
    static CtrnnParams uniform(int n, int m, double tau, const SigmoidParams& s);

    int size() const noexcept { return static_cast<int>(tau.size()); }
    int input_count() const noexcept { return static_cast<int>(w_x.cols()); }
    void validate() const;
};

void to_json(nlohmann::json& j, const CtrnnParams& p);
void from_json(const nlohmann::json& j, CtrnnParams& p);

using InputFn = std::function<Vec(double)>;

Vec outputs(const CtrnnParams& p, const Vec& s);
/// ds/dt.
Vec rhs(const CtrnnParams& p, const Vec& s, const Vec& x);
/// d(ds/dt)/ds = (-I + W_y diag(sigma'(s))) / tau.
Mat jacobian(const CtrnnParams& p, const Vec& s);

struct Trajectory {
    std::vector<double> time;
    std::vector<Vec> s;
    std::vector<Vec> y;
};

/// Classic RK4. Requires dt <= min(tau)/20. An empty `x` means zero input.
Trajectory integrate(const CtrnnParams& p, const InputFn& x, const Vec& s_init, double duration, double dt,
                     std::size_t record_interval = 1);

/// s* = W_x x + b and y* = sigma(s*); only valid without feedback.
std::pair<Vec, Vec> feedforward_fixed_point(const CtrnnParams& p, const Vec& x);

enum class Stability { StableNode, StableFocus, Saddle, UnstableNode, UnstableFocus, Marginal };
const char* stability_name(Stability s) noexcept;
Stability classify(const std::vector<std::complex<double>>& eigenvalues, double tol = 1e-12);

struct FixedPoint {
    Vec s_star;
    Stability stability = Stability::Marginal;
    std::vector<std::complex<double>> eigenvalues;
    double residual = 0.0;  // max |tau ds/dt|
};

std::vector<std::complex<double>> eigenvalues(const Mat& m);
FixedPoint analyze_fixed_point(const CtrnnParams& p, const Vec& s, const Vec& x);
/// Newton from `guess`; empty when it does not converge.
std::optional<FixedPoint> find_fixed_point(const CtrnnParams& p, const Vec& x, const Vec& guess,
                                           double tol = 1e-12, int max_iterations = 50);

struct NullclineRoot {
    double s = 0.0;
    bool stable = false;
    double slope = 0.0;  // d/ds of the right-hand side at the root
};

/// Real roots of 0 = -s + b + x + w_f sigma(s) for a single neuron.
std::vector<NullclineRoot> nullcline_roots(const CtrnnParams& p, double x, double w_f, int grid = 4001);
/// Same equation with sigma replaced by its cubic Taylor expansion around s0.
std::vector<double> cubic_nullcline_roots(const CtrnnParams& p, double x, double w_f);

/// Two neurons with W_y = [[w_f, 1], [-1, w_f]].
CtrnnParams hopf_network(double w_f, const SigmoidParams& s, double tau);
/// Two neurons with W_y = [[1, w_inh], [w_inh, 1]] and one input per neuron.
CtrnnParams wta_network(double w_inh, const SigmoidParams& s, double tau);
/// Biases that put every neuron at its sigmoid centre when all outputs sit at their midpoints.
Vec centering_bias(const CtrnnParams& p);

struct CycleMeasure {
    bool oscillating = false;
    double amplitude = 0.0;  // peak-to-peak of y_0
    double period = 0.0;
};

/// Limit-cycle detection on a recorded output trace after discarding `discard` seconds.
CycleMeasure measure_cycle(const std::vector<double>& time, const std::vector<double>& y, double discard,
                           double threshold, int periods = 20);

struct HopfOptions {
    double w_min = 0.0;
    double w_max = 1.0;
    double resolution = 0.05;
    double bisect_tolerance = 1e-6;
    bool integrate = true;
    double discard_taus = 50.0;
    int periods = 20;
    double dt_fraction = 1.0 / 50.0;  // dt as a fraction of tau
    bool recenter = false;  // re-derive the centering bias at every w_f instead of keeping base.b
};

struct HopfSample {
    double w_f = 0.0;
    FixedPoint fixed_point;
    bool newton_converged = true;
    double max_real = 0.0;
    CycleMeasure cycle;
};

struct HopfRecord {
    std::vector<HopfSample> samples;
    std::optional<double> critical_w_f;
};

/// `base` is a two-neuron network; its diagonal feedback is replaced by each swept w_f.
HopfRecord hopf_sweep(const CtrnnParams& base, const HopfOptions& opts = {});

struct WtaResult {
    int winner = -1;  // -1 when tied or unsettled
    bool settled = false;
    bool tie = false;
    Vec y_final;
    Trajectory trajectory;
    std::string diagnostics;
};

/// Integrates from `s_init` under constant input `x` and reports the winner.
WtaResult wta_analyze(const CtrnnParams& p, const Vec& x, const Vec& s_init, double duration, double dt);

struct FieldSample {
    double y1 = 0.0, y2 = 0.0;
    double dy1 = 0.0, dy2 = 0.0;
    bool valid = false;
};

/// dy/dt = sigma'(s) ds/dt on an n1 x n2 grid spanning [lo, hi] in output space.
std::vector<FieldSample> vector_field(const CtrnnParams& p, const Vec& x, const Vec& lo, const Vec& hi, int n1,
                                      int n2);

}  // namespace pnsim::ctrnn
