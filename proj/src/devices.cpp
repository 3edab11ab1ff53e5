#include "pnsim/devices.hpp"

#include "pnsim/errors.hpp"

#include <cmath>

namespace pnsim::devices {

void HeaterParams::validate() const {
    if (!(resistance > 0.0)) {
        throw InvalidParamsError("heater resistance must be > 0");
    }
    if (!(max_current > 0.0)) {
        throw InvalidParamsError("heater max_current must be > 0");
    }
    if (!std::isfinite(thermo_optic_gain)) {
        throw InvalidParamsError("heater gain must be finite");
    }
}

IndexShift heater_index_shift(double i_heat, const HeaterParams& params) {
    params.validate();
    if (!std::isfinite(i_heat) || i_heat < 0.0 || i_heat > params.max_current * (1.0 + 1e-12)) {
        throw ActuatorLimitError("heater current " + std::to_string(i_heat) + " A outside [0, " +
                                 std::to_string(params.max_current) + "]");
    }
    return {params.thermo_optic_gain * i_heat * i_heat * params.resistance, 0.0};
}

void PnModulatorParams::validate() const {
    if (!(junction_capacitance > 0.0)) {
        throw InvalidParamsError("modulator junction capacitance must be > 0");
    }
    if (series_resistance < 0.0) {
        throw InvalidParamsError("modulator series resistance must be >= 0");
    }
    if (forward_bias_mode && !(carrier_lifetime > 0.0)) {
        throw InvalidParamsError("forward-bias mode needs a positive carrier lifetime");
    }
    if (!(v_min < v_max)) {
        throw InvalidParamsError("modulator validity window is empty");
    }
}

ModulatorShift modulator_index_shift(double v_mod, const PnModulatorParams& params) {
    ModulatorShift out;
    out.delta = {params.dn_dv * v_mod + params.dn_dv2 * v_mod * v_mod, params.dalpha_dv * v_mod};
    out.extrapolated = !params.in_window(v_mod);
    return out;
}

void PhotodetectorParams::validate() const {
    if (!(responsivity > 0.0)) {
        throw InvalidParamsError("photodetector responsivity must be > 0");
    }
    if (!(junction_capacitance > 0.0)) {
        throw InvalidParamsError("photodetector capacitance must be > 0");
    }
    if (!(shunt_resistance > 0.0) || series_resistance < 0.0) {
        throw InvalidParamsError("photodetector resistances invalid");
    }
}

double photodetect(const optics::WdmBus& bus, const PhotodetectorParams& params) {
    return params.responsivity * bus.total_power();
}

double balanced_photocurrent(const optics::WdmBus& drop_bus, const optics::WdmBus& thru_bus,
                             const PhotodetectorParams& params) {
    if (drop_bus.size() != thru_bus.size()) {
        throw ChannelMismatchError("drop and thru buses carry different channel sets");
    }
    for (const auto& ch : drop_bus.channels()) {
        if (!thru_bus.find(ch.wavelength)) {
            throw ChannelMismatchError("drop and thru buses carry different channel sets");
        }
    }
    return photodetect(drop_bus, params) - photodetect(thru_bus, params);
}

void SourceSpec::validate() const {
    if (!(wavelength > 0.0)) {
        throw InvalidParamsError("source wavelength must be > 0");
    }
    if (!(power >= 0.0)) {
        throw InvalidParamsError("source power must be >= 0");
    }
}

optics::OpticalField source_field(const SourceSpec& spec, double envelope) {
    if (envelope < 0.0 || envelope > 1.0 + 1e-12) {
        throw InvalidInputError("source modulation envelope outside [0, 1]");
    }
    return optics::OpticalField::from_power(spec.power * envelope, spec.wavelength);
}

void to_json(nlohmann::json& j, const HeaterParams& p) {
    j = {{"resistance", p.resistance}, {"thermo_optic_gain", p.thermo_optic_gain}, {"max_current", p.max_current}};
}

void from_json(const nlohmann::json& j, HeaterParams& p) {
    p.resistance = j.value("resistance", p.resistance);
    p.thermo_optic_gain = j.value("thermo_optic_gain", p.thermo_optic_gain);
    p.max_current = j.value("max_current", p.max_current);
}

void to_json(nlohmann::json& j, const PnModulatorParams& p) {
    j = {{"dn_dv", p.dn_dv},
         {"dn_dv2", p.dn_dv2},
         {"dalpha_dv", p.dalpha_dv},
         {"junction_capacitance", p.junction_capacitance},
         {"series_resistance", p.series_resistance},
         {"forward_bias_mode", p.forward_bias_mode},
         {"carrier_lifetime", p.carrier_lifetime},
         {"v_min", p.v_min},
         {"v_max", p.v_max}};
}

void from_json(const nlohmann::json& j, PnModulatorParams& p) {
    p.dn_dv = j.value("dn_dv", p.dn_dv);
    p.dn_dv2 = j.value("dn_dv2", p.dn_dv2);
    p.dalpha_dv = j.value("dalpha_dv", p.dalpha_dv);
    p.junction_capacitance = j.value("junction_capacitance", p.junction_capacitance);
    p.series_resistance = j.value("series_resistance", p.series_resistance);
    p.forward_bias_mode = j.value("forward_bias_mode", p.forward_bias_mode);
    p.carrier_lifetime = j.value("carrier_lifetime", p.carrier_lifetime);
    p.v_min = j.value("v_min", p.v_min);
    p.v_max = j.value("v_max", p.v_max);
}

void to_json(nlohmann::json& j, const PhotodetectorParams& p) {
    j = {{"responsivity", p.responsivity},
         {"junction_capacitance", p.junction_capacitance},
         {"shunt_resistance", p.shunt_resistance},
         {"series_resistance", p.series_resistance}};
}

void from_json(const nlohmann::json& j, PhotodetectorParams& p) {
    p.responsivity = j.value("responsivity", p.responsivity);
    p.junction_capacitance = j.value("junction_capacitance", p.junction_capacitance);
    p.shunt_resistance = j.value("shunt_resistance", p.shunt_resistance);
    p.series_resistance = j.value("series_resistance", p.series_resistance);
}

}  // namespace pnsim::devices
