#pragma once

// Weight-bank calibration: sweep the probe wavelength and each heater current while
// watching the DC junction voltage, then invert the voltage-vs-current curve into a
// monotone current-for-weight map on [-1, +1].

#include "pnsim/circuit.hpp"
#include "pnsim/neuron.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace pnsim::calibration {

/// A bank behind a balanced receiver, probed at DC by one tunable laser.
class Rig {
public:
    /// Standard rig: probe laser -> weight bank -> neuron receiver, no bias current.
    Rig(const BankSpec& bank, const NeuronParams& params, double probe_power = 1e-3);
    /// Custom netlist: `laser` probes, `modulator` reads the junction voltage, `rings` in channel order.
    Rig(circuit::Netlist netlist, BankSpec bank, std::string laser, std::string modulator,
        std::vector<std::string> rings, double probe_power);

    const BankSpec& bank() const noexcept { return bank_; }
    double probe_power() const noexcept { return power_; }
    const std::vector<std::string>& rings() const noexcept { return rings_; }

    void set_probe(double wavelength, double power);
    void set_probe(double wavelength) { set_probe(wavelength, power_); }
    void set_heater(int channel, double current);
    double heater(int channel) const;
    void zero_heaters();

    /// DC junction voltage at the current settings.
    double junction_voltage();
    /// Balanced photocurrent (drop minus thru) at the current settings, if the rig has detectors.
    double photocurrent();

private:
    circuit::Circuit circuit_;
    BankSpec bank_;
    std::string laser_, modulator_;
    std::vector<std::string> rings_;
    std::vector<std::string> detectors_;  // drop, thru
    std::vector<double> heaters_;
    double wavelength_;
    double power_;
};

struct Spectrum {
    std::vector<double> wavelength;
    std::vector<double> voltage;
    std::vector<bool> valid;  // false where the operating point failed

    /// Wavelengths of local voltage maxima that rise `prominence` above both neighbouring minima.
    std::vector<double> peaks(double prominence) const;
};

/// Junction voltage versus probe wavelength with every heater off.
Spectrum spectrum_sweep(Rig& rig, double lambda_min, double lambda_max, int points = 2000);

struct CurrentSweep {
    int channel = 0;
    std::vector<double> current;
    std::vector<double> voltage;
};

/// Junction voltage versus the channel's heater current with the probe on that channel.
CurrentSweep current_sweep(Rig& rig, int channel, double i_min = 0.0, double i_max = 1e-3, int points = 200);

/// Heater current of the voltage maximum: grid scan plus parabolic refinement.
double resonance_current(const CurrentSweep& sweep);

struct ChannelMap {
    double resonance_current = 0.0;
    std::vector<std::pair<double, double>> curve;  // (W, I) with W ascending from -1 to +1
    double v_at_wneg1 = 0.0;
    double v_at_wpos1 = 0.0;
};

/// Keeps the rising branch below resonance, truncates it symmetric about 0 V, and
/// inverts it on a uniform weight grid.
ChannelMap build_weight_map(const CurrentSweep& sweep, double resonance_current, int curve_points = 101);

struct WeightMap {
    BankSpec bank;
    double probe_power = 0.0;
    std::vector<ChannelMap> channels;

    void validate() const;
};

void to_json(nlohmann::json& j, const WeightMap& m);
void from_json(const nlohmann::json& j, WeightMap& m);

/// Monotone cubic interpolation of the stored curve.
double apply_weight(const WeightMap& map, int channel, double w);

struct CalibrationOptions {
    int wavelength_points = 2000;
    int current_points = 200;
    double i_min = 0.0;
    double i_max = 1e-3;
    int curve_points = 101;
};

/// Calibrates every channel in turn, other heaters held at zero.
WeightMap calibrate(Rig& rig, const CalibrationOptions& opts = {});

/// Weight read back from the junction voltage with the probe on `channel`.
double realized_weight(Rig& rig, const WeightMap& map, int channel);

struct CrosstalkReport {
    int channel = 0;
    double max_shift = 0.0;  // largest change of another channel's realized weight
    int worst_channel = -1;
    bool within_bound = true;
};

/// Moves `channel` from W = 0 to `w` and reports the effect on every other channel held at W = 0.
CrosstalkReport crosstalk(Rig& rig, const WeightMap& map, int channel, double w, double bound = 0.05);

struct ClosedLoopReport {
    std::vector<double> target;
    std::vector<double> realized;
    std::vector<double> photocurrent;
    double max_error = 0.0;
    double r_squared = 0.0;  // affine fit of photocurrent against target
};

ClosedLoopReport closed_loop(Rig& rig, const WeightMap& map, int channel, const std::vector<double>& targets);

}  // namespace pnsim::calibration
