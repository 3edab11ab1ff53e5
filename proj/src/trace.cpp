#include "pnsim/trace.hpp"

#include "pnsim/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

namespace pnsim {

Trace::Trace(std::vector<std::string> column_names)
    : names(std::move(column_names)), columns(names.size()) {}

void Trace::reserve(std::size_t n) {
    time.reserve(n);
    for (auto& c : columns) {
        c.reserve(n);
    }
}

void Trace::append(double t, const std::vector<double>& values) {
    if (values.size() != columns.size()) {
        throw InvalidInputError("trace row has " + std::to_string(values.size()) + " values, expected " +
                                std::to_string(columns.size()));
    }
    time.push_back(t);
    for (std::size_t i = 0; i < values.size(); ++i) {
        columns[i].push_back(values[i]);
    }
}

void Trace::add_column(const std::string& name, std::vector<double> values) {
    if (values.size() != time.size()) {
        throw InvalidInputError("column '" + name + "' length differs from the time grid");
    }
    if (has(name)) {
        throw InvalidInputError("duplicate trace column '" + name + "'");
    }
    names.push_back(name);
    columns.push_back(std::move(values));
}

bool Trace::has(const std::string& name) const noexcept {
    return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<double>& Trace::column(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw InvalidInputError("no trace column '" + name + "'");
    }
    return columns[static_cast<std::size_t>(it - names.begin())];
}

std::vector<double>& Trace::column(const std::string& name) {
    return const_cast<std::vector<double>&>(static_cast<const Trace*>(this)->column(name));
}

Trace Trace::window(double t0, double t1) const {
    Trace out(names);
    auto lo = std::lower_bound(time.begin(), time.end(), t0);
    auto hi = std::lower_bound(time.begin(), time.end(), t1);
    const auto a = static_cast<std::size_t>(lo - time.begin());
    const auto b = static_cast<std::size_t>(hi - time.begin());
    out.time.assign(time.begin() + a, time.begin() + b);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out.columns[c].assign(columns[c].begin() + a, columns[c].begin() + b);
    }
    return out;
}

void Trace::validate() const {
    if (columns.size() != names.size()) {
        throw InvalidInputError("trace names and columns disagree");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].size() != time.size()) {
            throw InvalidInputError("trace column '" + names[c] + "' has the wrong length");
        }
    }
    for (std::size_t i = 1; i < time.size(); ++i) {
        if (!(time[i] > time[i - 1])) {
            throw InvalidInputError("trace time is not strictly increasing");
        }
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) {
        throw InvalidInputError("cannot format number");
    }
    return std::string(buf, ptr);
}

std::string Trace::to_csv() const {
    validate();
    std::string out = "time_s";
    for (const auto& n : names) {
        out += ',';
        out += n;
    }
    out += '\n';
    out.reserve(out.size() + time.size() * (columns.size() + 1) * 22);
    char buf[64];
    for (std::size_t i = 0; i < time.size(); ++i) {
        auto put = [&](double v) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out.append(buf, ptr);
        };
        put(time[i]);
        for (const auto& c : columns) {
            out += ',';
            put(c[i]);
        }
        out += '\n';
    }
    return out;
}

Trace Trace::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidInputError("empty trace CSV");
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            header.push_back(cell);
        }
    }
    if (header.empty() || header.front() != "time_s") {
        throw InvalidInputError("trace CSV must start with a time_s column");
    }
    Trace t(std::vector<std::string>(header.begin() + 1, header.end()));
    std::vector<double> row(header.size() - 1);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const char* p = line.data();
        const char* end = p + line.size();
        double tv = 0.0;
        for (std::size_t c = 0; c < header.size(); ++c) {
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{}) {
                throw InvalidInputError("malformed number in trace CSV");
            }
            (c == 0 ? tv : row[c - 1]) = v;
            p = next;
            if (p < end && *p == ',') {
                ++p;
            }
        }
        t.append(tv, row);
    }
    return t;
}

void RunSummary::collect_stats(const Trace& trace) {
    probes.clear();
    for (std::size_t c = 0; c < trace.names.size(); ++c) {
        const auto& col = trace.columns[c];
        ProbeStats s;
        if (!col.empty()) {
            auto [lo, hi] = std::minmax_element(col.begin(), col.end());
            s.min = *lo;
            s.max = *hi;
            double sum = 0.0;
            for (double v : col) {
                sum += v;
            }
            s.mean = sum / static_cast<double>(col.size());
            s.final = col.back();
        }
        probes.emplace_back(trace.names[c], s);
    }
}

nlohmann::json RunSummary::to_json() const {
    nlohmann::json j;
    j["steps"] = steps;
    j["iterations"] = {{"total", total_iterations},
                       {"max_per_step", max_iterations},
                       {"mean_per_step", steps ? static_cast<double>(total_iterations) / static_cast<double>(steps) : 0.0}};
    j["max_kcl_residual_A"] = max_kcl_residual;
    j["dc"] = {{"converged", dc_converged}, {"iterations", dc_iterations}};
    j["warnings"] = warnings;
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [name, s] : probes) {
        p[name] = {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"final", s.final}};
    }
    j["probes"] = p;
    return j;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        fs::create_directories(target.parent_path());
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot write '" + tmp.string() + "'");
        }
        out << content;
        out.flush();
        if (!out) {
            throw ConfigError("write failed for '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        throw ConfigError("cannot rename into '" + path + "': " + ec.message());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_trace_csv(const std::string& path, const Trace& trace) { write_file_atomic(path, trace.to_csv()); }

Trace read_trace_csv(const std::string& path) { return Trace::from_csv(read_file(path)); }

}  // namespace pnsim
