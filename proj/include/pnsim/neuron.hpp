#pragma once

// Builders for the photonic neuron: a heater-tuned MRR weight bank feeding a
// balanced photodetector pair, the receiver circuit with its bond-pad and
// bias-tee parasitics, and the PN microring modulator that writes the output
// onto a pump carrier.

#include "pnsim/netlist.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace pnsim {

/// Ring i has radius base_radius + i*radius_increment and serves the channel at
/// base_wavelength + i*wavelength_increment.
struct BankSpec {
    int channel_count = 5;
    double base_radius = 8e-6;
    double radius_increment = 12e-9;
    double base_wavelength = 1548.7e-9;
    double wavelength_increment = 2.35e-9;

    double radius(int i) const noexcept { return base_radius + i * radius_increment; }
    double wavelength(int i) const noexcept { return base_wavelength + i * wavelength_increment; }
    void validate() const;
    bool operator==(const BankSpec&) const = default;
};

void to_json(nlohmann::json& j, const BankSpec& b);
void from_json(const nlohmann::json& j, BankSpec& b);

/// Bank ring effective index: puts ring 0's untuned resonance about 0.9 nm blue of
/// channel 0, so every ring reaches its channel with less than 1 mA of heater current.
inline constexpr double kBankRingIndex = 2.40186;

struct NeuronParams {
    // Receiver circuit.
    double pad_capacitance = 10e-15;
    double bond_inductance = 1e-9;
    double tee_inductance = 1e-3;
    double tee_capacitance = 2e-6;
    double bias_resistance = 1e3;
    double pd_bias = 2.0;
    /// Replace the photodiode bias tees by sources tied straight to the tee node.
    bool ideal_bias_tee = false;
    devices::PhotodetectorParams photodetector;

    // Weight bank rings.
    double bank_coupling = 0.2;
    double bank_index = kBankRingIndex;
    double bank_alpha = optics::kDefaultRingAlpha0;
    devices::HeaterParams heater;

    // Output modulator: an all-pass ring near critical coupling.
    devices::PnModulatorParams modulator;
    double modulator_coupling = 0.15;
    double modulator_radius = 8e-6;
    double modulator_index = 2.4;
    double modulator_alpha = optics::kDefaultRingAlpha0;
    /// Junction voltage at which the modulator resonance sits on its pump.
    double dip_voltage = 0.6;

    void validate() const;
};

void to_json(nlohmann::json& j, const NeuronParams& p);
void from_json(const nlohmann::json& j, NeuronParams& p);

/// Ids of the pieces of one neuron inside a netlist.
struct NeuronHandles {
    std::string prefix;
    std::string junction;        // receiver node J
    std::string modulator;       // pn_modulator element
    std::string bias_source;     // current source feeding J through a bond wire
    std::string drop_pd, thru_pd;
    std::vector<std::string> rings;  // weight bank, channel order
    std::string drop_net, thru_net;
    std::string modulator_ring;  // empty until add_modulator_ring
    std::string output_net;
};

/// Weight bank on `in_net`; ring i sits in the input bus path and chains its drop
/// port into ring i+1's add port. Returns the ring ids.
std::vector<std::string> add_weight_bank(circuit::Netlist& nl, const std::string& prefix, const BankSpec& bank,
                                         const NeuronParams& p, const std::string& in_net,
                                         const std::string& drop_net, const std::string& thru_net);

/// Full neuron: weight bank, balanced detectors and receiver circuit. `bias` drives
/// the modulator bias current.
NeuronHandles add_neuron(circuit::Netlist& nl, const std::string& prefix, const BankSpec& bank,
                         const NeuronParams& p, const std::string& bank_in_net, Waveform bias);

/// Modulator ring between `pump_net` and `out_net`, tuned by the neuron's PN junction.
void add_modulator_ring(circuit::Netlist& nl, NeuronHandles& n, const NeuronParams& p,
                        const std::string& pump_net, const std::string& out_net, double pump_wavelength);

/// Radius that puts the modulator resonance on `pump_wavelength` at `p.dip_voltage`.
double modulator_radius_for(const NeuronParams& p, double pump_wavelength);

/// Thru transmission of the modulator ring at junction voltage v for a pump at `wavelength`.
double modulator_transmission(const NeuronParams& p, double pump_wavelength, double v);

}  // namespace pnsim
