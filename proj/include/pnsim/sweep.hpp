#pragma once

// Parameter sweeps: the cartesian product of JSON-pointer axes over one
// configuration, run concurrently, aggregated in index order.

#include "pnsim/experiments.hpp"

#include <cstddef>
#include <exception>
#include <string>
#include <vector>

namespace pnsim::harness {

struct SweepAxis {
    std::string pointer;  // JSON pointer into the configuration, e.g. "/hopf/feedback_weights"
    std::vector<json> values;
};

/// Axes from the "sweep" section: {"axes": [{"pointer": ..., "values": [...]}, ...]}.
std::vector<SweepAxis> sweep_axes(const ExperimentConfig& cfg);

/// Number of points in the product.
std::size_t sweep_size(const std::vector<SweepAxis>& axes);

/// Configuration of point `index`; the last axis varies fastest.
json sweep_point_config(const json& raw, const std::vector<SweepAxis>& axes, std::size_t index);

/// Runs one configuration: the physical experiments, "transient" and "ctrnn-ref".
RunOutput run_any(const ExperimentConfig& cfg, const Hardware* hw = nullptr);

/// "config", "convergence", "calibration" or "error".
std::string error_kind(const std::exception& e);

struct SweepPoint {
    std::size_t index = 0;
    json values = json::object();  // pointer -> value
    bool ok = false;
    std::string error;
    std::string error_kind;
    RunOutput output;
};

struct SweepOptions {
    unsigned workers = 1;
    /// Execution order as a permutation of point indices; index order when empty.
    std::vector<std::size_t> order;
};

struct SweepResult {
    std::string experiment;
    std::vector<SweepAxis> axes;
    std::vector<SweepPoint> points;  // always in index order

    std::size_t failures() const;
    /// Aggregate record: axes, then per point its values, status and metrics.
    json summary() const;
};

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& opts = {});

/// sweep.json plus one point_NNNN directory of run outputs per successful point.
void write_sweep(const std::string& dir, const SweepResult& result);

}  // namespace pnsim::harness
