#pragma once

// Transient electro-optic co-simulation.
//
// Electrical side: modified nodal analysis with companion models for
// capacitors and inductors (backward Euler or trapezoidal). Optical side:
// quasi-static evaluation of the optical DAG each step; delay lines are the
// only way to close an optical feedback path.

#include "pnsim/netlist.hpp"
#include "pnsim/trace.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pnsim::circuit {

struct SimState {
    double time = 0.0;
    std::size_t step = 0;
    /// Node voltages, then inductor currents, then voltage-source currents.
    Eigen::VectorXd x;
    std::vector<double> cap_current;  // trapezoidal history, one per capacitor
    std::vector<double> lag;          // optically effective modulator voltage
    std::vector<std::vector<optics::WdmBus>> delay_buffers;

    bool finite() const;
};

struct StepInfo {
    int iterations = 0;
    double voltage_change = 0.0;  // last fixed-point update, V
    double kcl_residual = 0.0;    // A
};

struct DcOptions {
    /// Starting modulator voltages for the Newton search, in modulator order.
    std::vector<double> vmod_guess;
    double tolerance = 1e-10;
    int max_iterations = 100;
    double max_step = 0.25;  // V, largest Newton update per iteration
};

struct DcInfo {
    int iterations = 0;
    double residual = 0.0;
};

struct CouplingOptions {
    double tolerance = 1e-9;
    int max_iterations = 20;
};

class Circuit {
public:
    /// Assembles the MNA system for `netlist`. Throws NetlistError for bad references,
    /// floating subcircuits, voltage-source/inductor loops or zero-delay optical loops.
    Circuit(Netlist netlist, double dt, Method method = Method::BackwardEuler);
    ~Circuit();
    Circuit(Circuit&&) noexcept;
    Circuit& operator=(Circuit&&) noexcept;

    const Netlist& netlist() const noexcept;
    double dt() const noexcept;
    Method method() const noexcept;
    std::size_t system_size() const noexcept;
    std::size_t node_count() const noexcept;
    std::size_t inductor_count() const noexcept;
    std::size_t vsource_count() const noexcept;
    std::optional<std::size_t> node_index(const std::string& node) const;
    const std::vector<std::string>& modulator_ids() const noexcept;
    /// True when every photodiode is isolated from modulator rings by a delay line.
    bool decoupled() const noexcept;

    CouplingOptions& coupling() noexcept;

    SimState zero_state();
    SimState dc_operating_point(const DcOptions& opts = {}, DcInfo* info = nullptr);
    /// Advances `state` by one time step.
    StepInfo step(SimState& state);

    double voltage(const SimState& s, const std::string& node) const;
    double vmod(const SimState& s, const std::string& modulator) const;
    double current(const SimState& s, const std::string& element) const;
    /// Bus on an optical net as of the last evaluation (step or operating point).
    const optics::WdmBus& net(const std::string& name) const;

    std::vector<std::string> probe_names() const;
    std::vector<double> probe_values(const SimState& s) const;

    /// Number of optics evaluations that used a modulator voltage outside its fitted window.
    std::size_t extrapolation_events() const noexcept;

    // Parameter updates that leave the assembled matrices intact.
    void set_heater_current(const std::string& ring, Waveform current);
    void set_laser(const std::string& laser, double wavelength, double power);
    void set_source(const std::string& source, Waveform value);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct CosimOptions {
    std::size_t record_interval = 1;
    bool dc_init = true;
    /// Start from the zero state with a warning when the operating point fails.
    bool fallback_to_zero = true;
    std::optional<SimState> initial;
    DcOptions dc;
};

struct CosimResult {
    Trace trace;
    RunSummary summary;
    SimState final_state;
};

CosimResult cosimulate(const Netlist& netlist, double duration, double dt, Method method,
                       const CosimOptions& opts = {});
/// Uses the netlist's own sim settings.
CosimResult cosimulate(const Netlist& netlist);

}  // namespace pnsim::circuit
