#include "pnsim/sweep.hpp"

#include "pnsim/compare.hpp"
#include "pnsim/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

namespace fs = std::filesystem;

namespace pnsim::harness {

namespace {

bool physical(const std::string& e) { return e == "fanin" || e == "cascade" || e == "hopf" || e == "wta"; }

// Axes under these keys change the hardware, so points cannot share one calibration.
bool touches_setup(const std::vector<SweepAxis>& axes) {
    for (const auto& a : axes) {
        for (const char* key : {"/bank", "/neuron", "/calibration", "/experiment"}) {
            const std::string k(key);
            if (a.pointer == k || a.pointer.starts_with(k + "/")) return true;
        }
    }
    return false;
}

std::string point_dir(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "point_%04zu", index);
    return buf;
}

}  // namespace

std::vector<SweepAxis> sweep_axes(const ExperimentConfig& cfg) {
    const json s = cfg.section("sweep");
    if (!s.contains("axes") || !s["axes"].is_array() || s["axes"].empty()) {
        throw ConfigError("sweep needs a non-empty \"axes\" array");
    }
    std::vector<SweepAxis> axes;
    for (const auto& a : s["axes"]) {
        SweepAxis axis;
        try {
            axis.pointer = a.at("pointer").get<std::string>();
            axis.values = a.at("values").get<std::vector<json>>();
            (void)json::json_pointer(axis.pointer);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad sweep axis: ") + e.what());
        }
        if (axis.pointer.empty() || axis.pointer == "/sweep" || axis.pointer.starts_with("/sweep/")) {
            throw ConfigError("sweep axis pointer '" + axis.pointer + "' is not a sweepable field");
        }
        if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.pointer + "' has no values");
        axes.push_back(std::move(axis));
    }
    return axes;
}

std::size_t sweep_size(const std::vector<SweepAxis>& axes) {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.values.size();
    return n;
}

json sweep_point_config(const json& raw, const std::vector<SweepAxis>& axes, std::size_t index) {
    json j = raw;
    j.erase("sweep");
    for (std::size_t k = axes.size(); k-- > 0;) {
        const auto& a = axes[k];
        j[json::json_pointer(a.pointer)] = a.values[index % a.values.size()];
        index /= a.values.size();
    }
    return j;
}

RunOutput run_any(const ExperimentConfig& cfg, const Hardware* hw) {
    if (cfg.experiment == "ctrnn-ref") {
        auto out = run_ctrnn_reference(cfg.section("ctrnn"));
        return out;
    }
    return run_experiment(cfg, hw);
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const NetlistError*>(&e) ||
        dynamic_cast<const InvalidParamsError*>(&e) || dynamic_cast<const InvalidInputError*>(&e) ||
        dynamic_cast<const WeightRangeError*>(&e) || dynamic_cast<const json::exception*>(&e)) {
        return "config";
    }
    if (dynamic_cast<const StepConvergenceError*>(&e) || dynamic_cast<const DcConvergenceError*>(&e) ||
        dynamic_cast<const DivergenceError*>(&e)) {
        return "convergence";
    }
    if (dynamic_cast<const CalibrationRangeError*>(&e) || dynamic_cast<const CalibrationQualityError*>(&e)) {
        return "calibration";
    }
    return "error";
}

std::size_t SweepResult::failures() const {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const SweepPoint& p) { return !p.ok; }));
}

json SweepResult::summary() const {
    json ax = json::array();
    for (const auto& a : axes) ax.push_back({{"pointer", a.pointer}, {"values", a.values}});
    json pts = json::array();
    for (const auto& p : points) {
        json r = {{"index", p.index}, {"values", p.values}, {"status", p.ok ? "ok" : "failed"}};
        if (p.ok) {
            r["output"] = point_dir(p.index);
            r["metrics"] = p.output.metrics;
        } else {
            r["error"] = p.error;
            r["error_kind"] = p.error_kind;
        }
        pts.push_back(std::move(r));
    }
    return {{"experiment", experiment}, {"axes", ax}, {"points", pts}, {"failures", failures()}};
}

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& opts) {
    SweepResult res;
    res.experiment = cfg.experiment;
    res.axes = sweep_axes(cfg);
    const std::size_t n = sweep_size(res.axes);

    std::vector<std::size_t> order = opts.order;
    if (order.empty()) {
        order.resize(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
    } else {
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (sorted.size() != n || sorted[i] != i) throw ConfigError("sweep execution order is not a permutation of the points");
        }
    }

    // Calibrating once is the expensive part of every physical point.
    std::optional<Hardware> shared;
    if (physical(cfg.experiment) && !touches_setup(res.axes)) shared.emplace(cfg.setup, cfg.base_dir);

    res.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = res.points[i];
        p.index = i;
        std::size_t rem = i;
        for (std::size_t k = res.axes.size(); k-- > 0;) {
            const auto& a = res.axes[k];
            p.values[a.pointer] = a.values[rem % a.values.size()];
            rem /= a.values.size();
        }
    }

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            auto& p = res.points[order[k]];
            try {
                const auto pc = parse_config(sweep_point_config(cfg.raw, res.axes, p.index), cfg.base_dir);
                p.output = run_any(pc, shared ? &*shared : nullptr);
                p.ok = true;
            } catch (const std::exception& e) {
                p.error = e.what();
                p.error_kind = error_kind(e);
            }
        }
    };
    const unsigned workers = std::clamp<unsigned>(opts.workers, 1, static_cast<unsigned>(std::max<std::size_t>(n, 1)));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return res;
}

void write_sweep(const std::string& dir, const SweepResult& result) {
    fs::create_directories(dir);
    for (const auto& p : result.points) {
        if (p.ok) write_outputs((fs::path(dir) / point_dir(p.index)).string(), p.output);
    }
    write_file_atomic((fs::path(dir) / "sweep.json").string(), dump(result.summary()));
}

}  // namespace pnsim::harness
