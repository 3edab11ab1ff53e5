#pragma once

// Electro-optic netlist: lumped electrical elements, behavioural devices and
// optical components wired by named optical nets.

#include "pnsim/devices.hpp"
#include "pnsim/errors.hpp"
#include "pnsim/optics.hpp"
#include "pnsim/waveform.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pnsim::circuit {

inline constexpr const char* kGround = "gnd";
bool is_ground(const std::string& node) noexcept;

enum class Method { BackwardEuler, Trapezoidal };

const char* method_name(Method m) noexcept;
Method parse_method(const std::string& name);

struct Resistor {
    std::string id, a, b;
    double resistance = 1.0;
};

struct Capacitor {
    std::string id, a, b;
    double capacitance = 1e-12;
};

struct Inductor {
    std::string id, a, b;
    double inductance = 1e-9;
};

/// v(pos) - v(neg) = value(t).
struct VoltageSource {
    std::string id, pos, neg;
    Waveform value;
};

/// Drives value(t) through the source from `from` to `to`, i.e. injects it into `to`.
struct CurrentSource {
    std::string id, from, to;
    Waveform value;
};

/// Reverse-biased photodiode: photocurrent leaves through the anode. Internally the
/// cathode goes through R_s to a junction node holding the photocurrent source, C_j and R_sh.
struct Photodiode {
    std::string id, anode, cathode;
    std::string optical_in;
    devices::PhotodetectorParams params;
};

/// Electrical load of a PN modulator: anode -R_s- junction -C_j- cathode.
/// v_mod is the voltage across C_j, positive when the anode side is higher.
struct PnModulator {
    std::string id, anode, cathode;
    devices::PnModulatorParams params;
};

struct Laser {
    std::string id, out;
    double wavelength = 1.55e-6;
    double power = 1e-3;
    /// Power envelope in [0, 1]; CW when absent.
    std::optional<Waveform> envelope;
};

/// Coherent combiner of several optical nets.
struct Mux {
    std::string id;
    std::vector<std::string> inputs;
    std::string out;
};

struct Waveguide {
    std::string id, in, out;
    optics::WaveguideParams params;
};

struct Coupler {
    std::string id, in1, in2, out1, out2;
    optics::CouplerParams params;
};

/// Add-drop ring. Tuned either by the PN modulator named in `modulator`
/// or by a heater carrying `heater_current`.
struct Mrr {
    std::string id, in, add, thru, drop;
    optics::MrrParams params;
    std::string modulator;
    devices::HeaterParams heater;
    Waveform heater_current = Waveform::constant(0.0);
};

struct DelayLine {
    std::string id, in, out;
    double delay = 10e-12;
    double transmission = 1.0;  // power
};

using Element = std::variant<Resistor, Capacitor, Inductor, VoltageSource, CurrentSource, Photodiode, PnModulator,
                             Laser, Mux, Waveguide, Coupler, Mrr, DelayLine>;

const std::string& element_id(const Element& e);
std::string element_kind(const Element& e);

struct Probe {
    enum class Kind { Voltage, Vmod, Current, OpticalPower };
    std::string name;
    Kind kind = Kind::Voltage;
    std::string target;  // node, element id or optical net
    std::string ref;     // negative node for differential voltages
    std::optional<double> wavelength;

    static Probe voltage(std::string name, std::string node, std::string ref = {});
    static Probe vmod(std::string name, std::string modulator);
    static Probe current(std::string name, std::string element);
    static Probe optical_power(std::string name, std::string net, std::optional<double> wavelength = {});
};

struct SimSettings {
    double dt = 1e-12;
    double duration = 1e-9;
    Method method = Method::BackwardEuler;
    std::size_t record_interval = 1;
    bool dc_init = true;  // false starts from the all-zero state
};

struct Netlist {
    int version = 1;
    std::vector<std::string> nodes;
    std::vector<Element> elements;
    std::vector<Probe> probes;
    SimSettings sim;

    template <class T>
    T& add(T e) {
        elements.emplace_back(std::move(e));
        return std::get<T>(elements.back());
    }
    Netlist& probe(Probe p) {
        probes.push_back(std::move(p));
        return *this;
    }

    const Element* find(const std::string& id) const;
    Element* find(const std::string& id);

    template <class T>
    T& get(const std::string& id) {
        Element* e = find(id);
        if (!e || !std::holds_alternative<T>(*e)) {
            throw NetlistError("no element '" + id + "' of the requested kind");
        }
        return std::get<T>(*e);
    }
    template <class T>
    const T& get(const std::string& id) const {
        return const_cast<Netlist*>(this)->get<T>(id);
    }

    /// Declared plus referenced electrical nodes, ground excluded, in first-seen order.
    std::vector<std::string> electrical_nodes() const;

    /// Reference and parameter checks that do not need the assembled system.
    void validate() const;
};

void to_json(nlohmann::json& j, const Netlist& n);
void from_json(const nlohmann::json& j, Netlist& n);

Netlist load_netlist(const std::string& path);

}  // namespace pnsim::circuit
