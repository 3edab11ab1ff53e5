#pragma once

// Physical run against its CTRNN equivalent: characterize the neurons, rebuild
// the network in state units s = -V / gain, drive it the same way and report
// deviations plus qualitative agreement flags.

#include "pnsim/experiments.hpp"

namespace pnsim::harness {

/// Sigmoid over s = -V / gain from one over junction voltage.
ctrnn::SigmoidParams sigma_in_state_units(const ctrnn::SigmoidParams& sigma_v, double gain);

struct Comparison {
    std::vector<NeuronModel> models;       // one per physical neuron, sigma refit on the run's own cloud
    std::vector<NeuronModel> ramp_models;  // the slow-ramp characterization they started from
    ctrnn::CtrnnParams params;             // reference network (last configuration run)
    Trace reference;
    json report = json::object();
};

/// `physical` must come from run_experiment on the same config.
Comparison compare(const ExperimentConfig& cfg, const Hardware& hw, const RunOutput& physical);

/// Standalone CTRNN run from a "ctrnn" config section: trajectory, fixed point and optional
/// Hopf sweep, WTA analysis and vector field.
RunOutput run_ctrnn_reference(const json& section);

}  // namespace pnsim::harness
