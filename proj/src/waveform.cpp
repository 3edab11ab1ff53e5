#include "pnsim/waveform.hpp"

#include "pnsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pnsim {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double triangle_shape(double t, double frequency, double asymmetry, double phase) {
    double u = t * frequency + phase;
    u -= std::floor(u);
    return u < asymmetry ? u / asymmetry : (1.0 - u) / (1.0 - asymmetry);
}
}  // namespace

Waveform Waveform::constant(double level) {
    Waveform w;
    w.kind = Kind::Constant;
    w.level = level;
    return w;
}

Waveform Waveform::triangular(double frequency, double amplitude, double offset, double asymmetry) {
    Waveform w;
    w.kind = Kind::Triangular;
    w.frequency = frequency;
    w.amplitude = amplitude;
    w.offset = offset;
    w.asymmetry = asymmetry;
    return w;
}

Waveform Waveform::sine(double frequency, double amplitude, double offset, double phase) {
    Waveform w;
    w.kind = Kind::Sine;
    w.frequency = frequency;
    w.amplitude = amplitude;
    w.offset = offset;
    w.phase = phase;
    return w;
}

Waveform Waveform::am_carrier(double frequency, double depth, double phase, Envelope envelope) {
    Waveform w;
    w.kind = Kind::AmCarrier;
    w.frequency = frequency;
    w.depth = depth;
    w.phase = phase;
    w.envelope = envelope;
    w.amplitude = 1.0;
    w.offset = 0.0;
    return w;
}

Waveform Waveform::square(std::vector<std::pair<double, double>> schedule, double amplitude, double offset,
                          double rise_time) {
    Waveform w;
    w.kind = Kind::Square;
    w.schedule = std::move(schedule);
    w.amplitude = amplitude;
    w.offset = offset;
    w.rise_time = rise_time;
    return w;
}

Waveform Waveform::pwl(std::vector<std::pair<double, double>> points) {
    Waveform w;
    w.kind = Kind::Pwl;
    w.schedule = std::move(points);
    return w;
}

double Waveform::operator()(double t) const {
    switch (kind) {
        case Kind::Constant:
            return level;
        case Kind::Triangular:
            return offset + amplitude * triangle_shape(t, frequency, asymmetry, phase);
        case Kind::Sine:
            return offset + amplitude * std::sin(kTwoPi * frequency * t + phase);
        case Kind::AmCarrier: {
            double s = std::sin(kTwoPi * frequency * t + phase);
            if (envelope == Envelope::Square) {
                s = s >= 0.0 ? 1.0 : -1.0;
            }
            return offset + amplitude * 0.5 * (1.0 + depth * s);
        }
        case Kind::Square: {
            if (schedule.empty() || t < schedule.front().first) {
                return offset;
            }
            auto it = std::upper_bound(schedule.begin(), schedule.end(), t,
                                       [](double v, const auto& p) { return v < p.first; });
            const std::size_t k = static_cast<std::size_t>(std::distance(schedule.begin(), it)) - 1;
            double lvl = schedule[k].second;
            if (rise_time > 0.0 && k > 0 && t - schedule[k].first < rise_time) {
                const double prev = schedule[k - 1].second;
                lvl = prev + (lvl - prev) * (t - schedule[k].first) / rise_time;
            } else if (rise_time > 0.0 && k == 0 && t - schedule[0].first < rise_time) {
                lvl = lvl * (t - schedule[0].first) / rise_time;
            }
            return offset + amplitude * lvl;
        }
        case Kind::Pwl: {
            if (schedule.empty()) {
                return 0.0;
            }
            if (t <= schedule.front().first) {
                return schedule.front().second;
            }
            if (t >= schedule.back().first) {
                return schedule.back().second;
            }
            auto it = std::upper_bound(schedule.begin(), schedule.end(), t,
                                       [](double v, const auto& p) { return v < p.first; });
            const auto& b = *it;
            const auto& a = *(it - 1);
            return a.second + (b.second - a.second) * (t - a.first) / (b.first - a.first);
        }
    }
    return 0.0;
}

std::pair<double, double> Waveform::range() const {
    switch (kind) {
        case Kind::Constant:
            return {level, level};
        case Kind::Triangular:
            return std::minmax(offset, offset + amplitude);
        case Kind::Sine:
            return std::minmax(offset - amplitude, offset + amplitude);
        case Kind::AmCarrier:
            return std::minmax(offset + amplitude * 0.5 * (1.0 - depth), offset + amplitude * 0.5 * (1.0 + depth));
        case Kind::Square: {
            double lo = offset;
            double hi = offset;
            for (const auto& [time, lvl] : schedule) {
                lo = std::min(lo, offset + amplitude * lvl);
                hi = std::max(hi, offset + amplitude * lvl);
            }
            return {lo, hi};
        }
        case Kind::Pwl: {
            if (schedule.empty()) {
                return {0.0, 0.0};
            }
            double lo = schedule.front().second;
            double hi = lo;
            for (const auto& p : schedule) {
                lo = std::min(lo, p.second);
                hi = std::max(hi, p.second);
            }
            return {lo, hi};
        }
    }
    return {0.0, 0.0};
}

double Waveform::max_frequency() const noexcept {
    switch (kind) {
        case Kind::Triangular:
        case Kind::Sine:
        case Kind::AmCarrier:
            return frequency;
        case Kind::Square:
            return rise_time > 0.0 ? 1.0 / rise_time : 0.0;
        default:
            return 0.0;
    }
}

void Waveform::validate() const {
    if ((kind == Kind::Triangular || kind == Kind::Sine || kind == Kind::AmCarrier) && !(frequency > 0.0)) {
        throw ConfigError("waveform frequency must be > 0");
    }
    if (kind == Kind::Triangular && !(asymmetry > 0.0 && asymmetry < 1.0)) {
        throw ConfigError("triangular asymmetry must lie in (0, 1)");
    }
    if (kind == Kind::Square || kind == Kind::Pwl) {
        for (std::size_t i = 1; i < schedule.size(); ++i) {
            if (!(schedule[i].first > schedule[i - 1].first)) {
                throw ConfigError("waveform schedule times must be strictly increasing");
            }
        }
    }
}

namespace {
const char* kind_name(Waveform::Kind k) {
    switch (k) {
        case Waveform::Kind::Constant: return "constant";
        case Waveform::Kind::Triangular: return "triangular";
        case Waveform::Kind::Square: return "square";
        case Waveform::Kind::Sine: return "sine";
        case Waveform::Kind::AmCarrier: return "am_carrier";
        case Waveform::Kind::Pwl: return "pwl";
    }
    return "constant";
}
}  // namespace

void to_json(nlohmann::json& j, const Waveform& w) {
    j = nlohmann::json::object();
    j["kind"] = kind_name(w.kind);
    switch (w.kind) {
        case Waveform::Kind::Constant:
            j["level"] = w.level;
            break;
        case Waveform::Kind::Triangular:
            j["frequency"] = w.frequency;
            j["amplitude"] = w.amplitude;
            j["offset"] = w.offset;
            j["asymmetry"] = w.asymmetry;
            j["phase"] = w.phase;
            break;
        case Waveform::Kind::Sine:
            j["frequency"] = w.frequency;
            j["amplitude"] = w.amplitude;
            j["offset"] = w.offset;
            j["phase"] = w.phase;
            break;
        case Waveform::Kind::AmCarrier:
            j["frequency"] = w.frequency;
            j["amplitude"] = w.amplitude;
            j["offset"] = w.offset;
            j["phase"] = w.phase;
            j["depth"] = w.depth;
            j["envelope"] = w.envelope == Waveform::Envelope::Square ? "square" : "sine";
            break;
        case Waveform::Kind::Square:
            j["schedule"] = w.schedule;
            j["amplitude"] = w.amplitude;
            j["offset"] = w.offset;
            j["rise_time"] = w.rise_time;
            break;
        case Waveform::Kind::Pwl:
            j["points"] = w.schedule;
            break;
    }
}

void from_json(const nlohmann::json& j, Waveform& w) {
    if (j.is_number()) {
        w = Waveform::constant(j.get<double>());
        return;
    }
    const std::string kind = j.value("kind", "constant");
    w = Waveform{};
    if (kind == "constant") {
        w.kind = Waveform::Kind::Constant;
        w.level = j.value("level", 0.0);
    } else if (kind == "triangular") {
        w.kind = Waveform::Kind::Triangular;
        w.asymmetry = j.value("asymmetry", 0.5);
    } else if (kind == "sine") {
        w.kind = Waveform::Kind::Sine;
    } else if (kind == "am_carrier") {
        w.kind = Waveform::Kind::AmCarrier;
        w.depth = j.value("depth", 1.0);
        w.envelope = j.value("envelope", std::string("sine")) == "square" ? Waveform::Envelope::Square
                                                                           : Waveform::Envelope::Sine;
    } else if (kind == "square") {
        w.kind = Waveform::Kind::Square;
        w.schedule = j.at("schedule").get<std::vector<std::pair<double, double>>>();
        w.rise_time = j.value("rise_time", 0.0);
    } else if (kind == "pwl") {
        w.kind = Waveform::Kind::Pwl;
        w.schedule = j.at("points").get<std::vector<std::pair<double, double>>>();
    } else {
        throw ConfigError("unknown waveform kind '" + kind + "'");
    }
    w.frequency = j.value("frequency", w.frequency);
    w.amplitude = j.value("amplitude", w.amplitude);
    w.offset = j.value("offset", w.offset);
    w.phase = j.value("phase", w.phase);
    w.validate();
}

}  // namespace pnsim
