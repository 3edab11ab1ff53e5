#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace pnsim {

/// Time-dependent scalar drive: offset + amplitude * shape(t), except for `Constant`,
/// which is just `level`.
struct Waveform {
    enum class Kind { Constant, Triangular, Square, Sine, AmCarrier, Pwl };
    enum class Envelope { Sine, Square };

    Kind kind = Kind::Constant;
    double level = 0.0;
    double amplitude = 1.0;
    double offset = 0.0;
    double frequency = 0.0;   // Hz
    double phase = 0.0;       // rad (sine, am_carrier) or fraction of a period (triangular)
    double asymmetry = 0.5;   // triangular: rising fraction of the period
    double depth = 1.0;       // am_carrier modulation depth
    Envelope envelope = Envelope::Sine;
    double rise_time = 0.0;   // square: linear transition time between levels
    /// Square: (start time, level) pairs; Pwl: (time, value) breakpoints.
    std::vector<std::pair<double, double>> schedule;

    static Waveform constant(double level);
    static Waveform triangular(double frequency, double amplitude, double offset, double asymmetry = 0.5);
    static Waveform sine(double frequency, double amplitude, double offset, double phase = 0.0);
    static Waveform am_carrier(double frequency, double depth, double phase = 0.0,
                               Envelope envelope = Envelope::Sine);
    static Waveform square(std::vector<std::pair<double, double>> schedule, double amplitude = 1.0,
                           double offset = 0.0, double rise_time = 0.0);
    static Waveform pwl(std::vector<std::pair<double, double>> points);

    double operator()(double t) const;
    /// Smallest and largest value over one period (or over the schedule).
    std::pair<double, double> range() const;
    /// Highest characteristic frequency (0 for static waveforms).
    double max_frequency() const noexcept;

    void validate() const;
};

void to_json(nlohmann::json& j, const Waveform& w);
void from_json(const nlohmann::json& j, Waveform& w);

}  // namespace pnsim
