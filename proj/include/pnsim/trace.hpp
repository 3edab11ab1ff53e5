#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace pnsim {

/// Uniformly sampled named signals. Column i has the same length as `time`.
struct Trace {
    std::vector<std::string> names;
    std::vector<double> time;
    std::vector<std::vector<double>> columns;

    Trace() = default;
    explicit Trace(std::vector<std::string> column_names);

    std::size_t rows() const noexcept { return time.size(); }
    void reserve(std::size_t rows);
    void append(double t, const std::vector<double>& values);
    void add_column(const std::string& name, std::vector<double> values);

    bool has(const std::string& name) const noexcept;
    const std::vector<double>& column(const std::string& name) const;
    std::vector<double>& column(const std::string& name);

    /// Rows with time in [t0, t1).
    Trace window(double t0, double t1) const;

    void validate() const;

    std::string to_csv() const;
    static Trace from_csv(const std::string& text);
};

struct ProbeStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double final = 0.0;
};

struct RunSummary {
    std::size_t steps = 0;
    std::size_t total_iterations = 0;
    int max_iterations = 0;
    double max_kcl_residual = 0.0;
    bool dc_converged = true;
    int dc_iterations = 0;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, ProbeStats>> probes;

    void collect_stats(const Trace& trace);
    nlohmann::json to_json() const;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Writes to a temporary file next to `path`, then renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

void write_trace_csv(const std::string& path, const Trace& trace);
Trace read_trace_csv(const std::string& path);

}  // namespace pnsim
