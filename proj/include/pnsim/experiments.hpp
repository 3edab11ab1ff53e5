#pragma once

// The four physical experiments plus calibration and plain netlist transients.
// Each returns a RunOutput; `drive` entries in the metrics record every
// normalization and bias the reference comparison needs.

#include "pnsim/harness.hpp"

#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace pnsim::harness {

struct FaninConfig {
    double input_power = 0.5e-3;  // peak, each input
    double modulation_frequency = 900e6;
    double phase_offset = std::numbers::pi / 2;  // B relative to A, rad
    double pump_power = 1e-3;
    int pump_channel = 2;
    double duration = 50e-9;
    double discard = 10e-9;
    std::optional<double> linear_voltage;     // steepest point of the modulator flank when absent
    std::optional<double> quadratic_voltage;  // resonance dip when absent
    double highpass_cutoff = 400e6;
    bool cancellation_check = true;
};

void to_json(json& j, const FaninConfig& c);
void from_json(const json& j, FaninConfig& c);

struct RampSpec {
    std::string name;
    double frequency = 1e5;
    double asymmetry = 0.5;
};

struct CascadeConfig {
    double pump_power = 4.8e-3;
    int pump_channel = 0;
    double delay = 10e-12;
    std::vector<double> feedback_weights{0.0, 1.0};
    std::vector<RampSpec> ramps{{"slow", 1e5, 0.5}, {"fast", 1e6, 0.5}, {"slow_asymmetric", 1e5, 0.8}};
    std::optional<double> bias_min;  // A; both or neither
    std::optional<double> bias_max;
    int periods = 1;
    int samples_per_period = 10000;
    double hysteresis_threshold = 0.01;
};

void to_json(json& j, const CascadeConfig& c);
void from_json(const json& j, CascadeConfig& c);

struct KickSpec {
    double fraction = 1e-3;  // extra power on the first pump
    double duration = 100e-12;
};

struct HopfConfig {
    double pump_power = 5e-3;  // each pump; the 3 dB coupler halves it before the banks
    double delay = 10e-12;
    std::vector<double> feedback_weights{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    /// Feedback weight at which the bias puts both neurons on their steepest point;
    /// when absent the bias is re-centred for every swept weight.
    std::optional<double> centering_weight;
    double duration = 30e-9;
    double window = 5e-9;  // amplitude is compared over the last two windows
    double oscillation_threshold = 0.01;  // peak-to-peak y
    int refine_steps = 6;  // bisections of the stable/unstable bracket
    KickSpec kick;
};

void to_json(json& j, const HopfConfig& c);
void from_json(const json& j, HopfConfig& c);

struct WtaConfig {
    double pump_power = 7.4e-3;
    double input_scale = 1.0;  // input power at level 1, as a fraction of the pump power
    double self_weight = 1.0;
    double inhibition = -1.0;
    double delay = 10e-12;
    /// (x1, x2) levels, one per segment.
    std::vector<std::pair<double, double>> segments{{0, 0}, {1, 0}, {0, 0}, {0, 1}, {0, 0}, {1, 0}, {0, 1}, {0, 0}};
    double segment_length = 6e-9;
    double settle = 5e-9;  // winner read this long after each transition
    double rise_time = 100e-12;
    double winner_margin = 0.05;
    KickSpec kick;
};

void to_json(json& j, const WtaConfig& c);
void from_json(const json& j, WtaConfig& c);

RunOutput run_fanin(const Hardware& hw, const FaninConfig& cfg, const SolverSettings& solver);
RunOutput run_cascade(const Hardware& hw, const CascadeConfig& cfg, const SolverSettings& solver);
RunOutput run_hopf(const Hardware& hw, const HopfConfig& cfg, const SolverSettings& solver);
RunOutput run_wta(const Hardware& hw, const WtaConfig& cfg, const SolverSettings& solver);

/// Bias window of the self-afferent neuron: both ends monostable, both folds inside.
std::pair<double, double> cascade_bias_range(const Hardware& hw, const CascadeConfig& cfg);

/// Hysteresis loop area in normalized (b, y) coordinates over the last full period.
double hysteresis_area(const std::vector<double>& b, const std::vector<double>& y);

/// Calibration run: spectrum, per-channel sweeps, weight map and closed-loop checks.
struct CalibrationRun {
    calibration::WeightMap map;
    calibration::Spectrum spectrum;
    std::vector<calibration::CurrentSweep> sweeps;
    json metrics;
};

CalibrationRun run_calibration(const Setup& setup);
void write_calibration(const std::string& dir, const CalibrationRun& run, const json& resolved);

/// Dispatches on cfg.experiment for the physical experiments and "transient".
RunOutput run_experiment(const ExperimentConfig& cfg, const Hardware* hw = nullptr);

}  // namespace pnsim::harness
