#pragma once

// Shared plumbing for the experiment runner: configuration, the calibrated
// neuron hardware every experiment builds on, and run outputs.

#include "pnsim/calibration.hpp"
#include "pnsim/circuit.hpp"
#include "pnsim/ctrnn.hpp"
#include "pnsim/neuron.hpp"
#include "pnsim/trace.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pnsim::harness {

using nlohmann::json;

struct SolverSettings {
    std::optional<double> dt;  // experiment default when absent
    circuit::Method method = circuit::Method::BackwardEuler;
    std::optional<std::size_t> record_interval;
};

void to_json(json& j, const SolverSettings& s);
void from_json(const json& j, SolverSettings& s);

struct CalibrationSource {
    std::string weight_map;  // JSON file; calibrate in-process when empty
    double probe_power = 1e-3;
    calibration::CalibrationOptions options;
};

void to_json(json& j, const CalibrationSource& c);
void from_json(const json& j, CalibrationSource& c);

/// Hardware description shared by every physical experiment.
struct Setup {
    BankSpec bank;
    NeuronParams neuron;
    CalibrationSource calibration;
    SolverSettings solver;
};

/// Whole configuration file. Sections other than the shared setup stay as JSON and
/// are parsed by the experiment that owns them.
struct ExperimentConfig {
    std::string experiment;
    Setup setup;
    json raw;          // the file as given
    std::string base_dir;  // relative paths resolve against this

    /// Section for `name` with defaults left to the consumer; empty object when absent.
    json section(const std::string& name) const;
    std::string resolve_path(const std::string& path) const;
};

ExperimentConfig parse_config(const json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Calibrated bank plus the receiver figures the experiments need.
class Hardware {
public:
    explicit Hardware(const Setup& setup, const std::string& base_dir = ".");
    Hardware(const Setup& setup, calibration::WeightMap map);

    const Setup& setup() const noexcept { return setup_; }
    const BankSpec& bank() const noexcept { return setup_.bank; }
    const NeuronParams& neuron() const noexcept { return setup_.neuron; }
    const calibration::WeightMap& map() const noexcept { return map_; }

    /// Junction voltage per watt of bank input at W = -1, common to all channels
    /// (the weakest channel sets it so every channel can reach |W| = 1).
    double volts_per_watt() const noexcept { return volts_per_watt_; }
    /// Junction volts per unit of y when y = 1 delivers `bank_power` to the bank.
    double gain(double bank_power) const noexcept { return volts_per_watt_ * bank_power; }
    /// DC junction voltage per ampere of bias current.
    double bias_resistance() const noexcept { return r_eff_; }

    /// Heater current realizing `w` on `channel` with the common scale.
    double heater_current(int channel, double w) const;
    /// Heater currents for the first weights.size() channels; the rest get zero current.
    std::vector<double> heater_currents(const std::vector<double>& weights) const;
    /// Applies heater_currents to a built neuron.
    void program(circuit::Netlist& nl, const NeuronHandles& n, const std::vector<double>& weights) const;

private:
    void measure();

    Setup setup_;
    calibration::WeightMap map_;
    double volts_per_watt_ = 0.0;
    double r_eff_ = 0.0;
};

/// Static modulator figures for a pump at `wavelength`, from the thru transmission curve.
struct ModulatorCurve {
    double dip_voltage = 0.0;
    double dip_transmission = 0.0;
    double half_width = 0.0;       // voltage half width at half depth, blue side
    double steepest_voltage = 0.0;  // maximum |dT/dV| below the dip
    double steepest_slope = 0.0;    // |dT/dV| there, 1/V
    double steepest_transmission = 0.0;
};

ModulatorCurve modulator_curve(const NeuronParams& p, double wavelength);

/// First-order CTRNN equivalent of one physical neuron.
struct NeuronModel {
    ctrnn::SigmoidParams sigma_v;  // y against junction voltage
    ctrnn::SigmoidParams sigma;    // y against s = -V / gain
    double gain = 0.0;             // V per unit y
    double tau = 0.0;              // s
    double fit_rmse_percent = 0.0;
    double v_min = 0.0, v_max = 0.0;  // fitted voltage span

    double bias_to_s(double v_bias) const { return -v_bias / gain; }
};

void to_json(json& j, const NeuronModel& m);

struct CharacterizeOptions {
    double ramp_time = 50e-9;
    double step_height = 0.02;  // V
    double dt = 1e-12;
    /// Voltage span of the ramp below the dip, in half widths.
    double span_half_widths = 3.0;
};

/// Fits sigma to a slow bias ramp through a feedforward neuron and takes tau from
/// the 63% rise of the junction voltage after a small bias step.
NeuronModel characterize(const Hardware& hw, double pump_wavelength, double bank_power,
                         const CharacterizeOptions& opts = {});

/// Output of one experiment run.
struct RunOutput {
    Trace trace;
    json metrics = json::object();
    json resolved = json::object();
    std::vector<std::string> warnings;
};

/// Writes trace.csv, metrics.json and config.resolved.json into `dir` (created if needed).
void write_outputs(const std::string& dir, const RunOutput& out);

/// JSON text with fixed formatting, used for every file the harness writes.
std::string dump(const json& j);

}  // namespace pnsim::harness
