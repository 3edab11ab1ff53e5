#pragma once

// Active electro-optic devices: heater and PN-junction phase shifters,
// photodetectors, and laser sources.
//
// The index-shift laws are low-order polynomials with exposed coefficients so
// that experimentally fitted curves can be substituted through the netlist
// parameters.

#include "pnsim/optics.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace pnsim::devices {

using optics::IndexShift;

struct HeaterParams {
    double resistance = 1e3;         // ohm
    double thermo_optic_gain = 2.5;  // index change per watt dissipated
    double max_current = 1e-3;       // A

    void validate() const;
};

/// Real index shift gain * i^2 * R. Throws ActuatorLimitError outside [0, max_current].
IndexShift heater_index_shift(double i_heat, const HeaterParams& params);

struct PnModulatorParams {
    double dn_dv = 2.5e-4;      // 1/V
    double dn_dv2 = 5e-6;       // 1/V^2
    double dalpha_dv = 1e-6;    // 1/V
    double junction_capacitance = 30e-15;
    double series_resistance = 100.0;
    bool forward_bias_mode = false;
    double carrier_lifetime = 20e-12;  // s, lag time constant in forward-bias mode
    double v_min = -4.0;                // validity window of the fitted law
    double v_max = 1.0;

    void validate() const;
    bool in_window(double v) const noexcept { return v >= v_min && v <= v_max; }
};

struct ModulatorShift {
    IndexShift delta;
    bool extrapolated = false;  // v outside the validity window
};

/// dn = dn_dv*v + dn_dv2*v^2, dalpha = dalpha_dv*v.
ModulatorShift modulator_index_shift(double v_mod, const PnModulatorParams& params);

struct PhotodetectorParams {
    double responsivity = 0.8;            // A/W
    double junction_capacitance = 50e-15;
    double shunt_resistance = 10e3;
    double series_resistance = 25.0;

    void validate() const;
};

/// eta * sum of channel powers.
double photodetect(const optics::WdmBus& bus, const PhotodetectorParams& params);

/// eta * sum_j (D_j - T_j) P_j, with drop and thru buses carrying the same channel set.
double balanced_photocurrent(const optics::WdmBus& drop_bus, const optics::WdmBus& thru_bus,
                             const PhotodetectorParams& params);

struct SourceSpec {
    double wavelength = 1.55e-6;
    double power = 1e-3;
    /// Name of a waveform giving the amplitude-modulation envelope in [0, 1]; empty for CW.
    std::optional<std::string> modulation;

    void validate() const;
};

/// Field of a source with power scaled by `envelope` (the field scales with sqrt(envelope)).
optics::OpticalField source_field(const SourceSpec& spec, double envelope);

// Missing keys keep their defaults.
void to_json(nlohmann::json& j, const HeaterParams& p);
void from_json(const nlohmann::json& j, HeaterParams& p);
void to_json(nlohmann::json& j, const PnModulatorParams& p);
void from_json(const nlohmann::json& j, PnModulatorParams& p);
void to_json(nlohmann::json& j, const PhotodetectorParams& p);
void from_json(const nlohmann::json& j, PhotodetectorParams& p);

}  // namespace pnsim::devices
