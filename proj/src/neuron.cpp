#include "pnsim/neuron.hpp"

#include "pnsim/errors.hpp"

namespace pnsim {

using nlohmann::json;
namespace c = circuit;

void BankSpec::validate() const {
    if (channel_count < 1) {
        throw InvalidParamsError("bank needs at least one channel");
    }
    if (!(base_radius > 0.0) || !(base_wavelength > 0.0)) {
        throw InvalidParamsError("bank base radius and wavelength must be > 0");
    }
    if (!(radius_increment > 0.0) || !(wavelength_increment > 0.0)) {
        throw InvalidParamsError("bank increments must be > 0");
    }
}

void to_json(json& j, const BankSpec& b) {
    j = {{"channel_count", b.channel_count},
         {"base_radius", b.base_radius},
         {"radius_increment", b.radius_increment},
         {"base_wavelength", b.base_wavelength},
         {"wavelength_increment", b.wavelength_increment}};
}

void from_json(const json& j, BankSpec& b) {
    b.channel_count = j.value("channel_count", b.channel_count);
    b.base_radius = j.value("base_radius", b.base_radius);
    b.radius_increment = j.value("radius_increment", b.radius_increment);
    b.base_wavelength = j.value("base_wavelength", b.base_wavelength);
    b.wavelength_increment = j.value("wavelength_increment", b.wavelength_increment);
}

void NeuronParams::validate() const {
    if (!(pad_capacitance > 0.0) || !(bond_inductance > 0.0) || !(tee_inductance > 0.0) ||
        !(tee_capacitance > 0.0) || !(bias_resistance > 0.0)) {
        throw InvalidParamsError("receiver element values must be > 0");
    }
    photodetector.validate();
    heater.validate();
    modulator.validate();
    if (!(bank_coupling > 0.0 && bank_coupling <= 1.0) || !(modulator_coupling > 0.0 && modulator_coupling <= 1.0)) {
        throw InvalidParamsError("ring couplings must lie in (0, 1]");
    }
    if (!(bank_index > 0.0) || !(modulator_index > 0.0) || !(modulator_radius > 0.0)) {
        throw InvalidParamsError("ring index and radius must be > 0");
    }
    if (bank_alpha < 0.0 || modulator_alpha < 0.0) {
        throw InvalidParamsError("ring loss must be >= 0");
    }
}

void to_json(json& j, const NeuronParams& p) {
    j = {{"pad_capacitance", p.pad_capacitance},
         {"bond_inductance", p.bond_inductance},
         {"tee_inductance", p.tee_inductance},
         {"tee_capacitance", p.tee_capacitance},
         {"bias_resistance", p.bias_resistance},
         {"pd_bias", p.pd_bias},
         {"ideal_bias_tee", p.ideal_bias_tee},
         {"photodetector", p.photodetector},
         {"bank_coupling", p.bank_coupling},
         {"bank_index", p.bank_index},
         {"bank_alpha", p.bank_alpha},
         {"heater", p.heater},
         {"modulator", p.modulator},
         {"modulator_coupling", p.modulator_coupling},
         {"modulator_radius", p.modulator_radius},
         {"modulator_index", p.modulator_index},
         {"modulator_alpha", p.modulator_alpha},
         {"dip_voltage", p.dip_voltage}};
}

void from_json(const json& j, NeuronParams& p) {
    p.pad_capacitance = j.value("pad_capacitance", p.pad_capacitance);
    p.bond_inductance = j.value("bond_inductance", p.bond_inductance);
    p.tee_inductance = j.value("tee_inductance", p.tee_inductance);
    p.tee_capacitance = j.value("tee_capacitance", p.tee_capacitance);
    p.bias_resistance = j.value("bias_resistance", p.bias_resistance);
    p.pd_bias = j.value("pd_bias", p.pd_bias);
    p.ideal_bias_tee = j.value("ideal_bias_tee", p.ideal_bias_tee);
    if (j.contains("photodetector")) j.at("photodetector").get_to(p.photodetector);
    p.bank_coupling = j.value("bank_coupling", p.bank_coupling);
    p.bank_index = j.value("bank_index", p.bank_index);
    p.bank_alpha = j.value("bank_alpha", p.bank_alpha);
    if (j.contains("heater")) j.at("heater").get_to(p.heater);
    if (j.contains("modulator")) j.at("modulator").get_to(p.modulator);
    p.modulator_coupling = j.value("modulator_coupling", p.modulator_coupling);
    p.modulator_radius = j.value("modulator_radius", p.modulator_radius);
    p.modulator_index = j.value("modulator_index", p.modulator_index);
    p.modulator_alpha = j.value("modulator_alpha", p.modulator_alpha);
    p.dip_voltage = j.value("dip_voltage", p.dip_voltage);
}

std::vector<std::string> add_weight_bank(c::Netlist& nl, const std::string& prefix, const BankSpec& bank,
                                         const NeuronParams& p, const std::string& in_net,
                                         const std::string& drop_net, const std::string& thru_net) {
    bank.validate();
    std::vector<std::string> ids;
    std::string in = in_net;
    std::string add;
    for (int i = 0; i < bank.channel_count; ++i) {
        const bool last = i + 1 == bank.channel_count;
        c::Mrr r;
        r.id = prefix + ".w" + std::to_string(i);
        r.in = in;
        r.add = add;
        r.thru = last ? thru_net : prefix + ".bus" + std::to_string(i);
        r.drop = last ? drop_net : prefix + ".dbus" + std::to_string(i);
        r.params = optics::MrrParams::make(bank.radius(i), p.bank_coupling, p.bank_coupling, p.bank_index,
                                           p.bank_alpha, optics::ShifterKind::Heater);
        r.heater = p.heater;
        in = r.thru;
        add = r.drop;
        ids.push_back(r.id);
        nl.add(std::move(r));
    }
    return ids;
}

namespace {

// Bias tee feeding one photodiode terminal with `volts` (pos side at tee node when volts > 0).
void add_tee(c::Netlist& nl, const std::string& prefix, const std::string& tag, const std::string& pad,
             double volts, const NeuronParams& p) {
    const std::string t = prefix + ".t" + tag;
    nl.add(c::Inductor{prefix + ".lb_" + tag, pad, t, p.bond_inductance});
    std::string src = t;
    if (!p.ideal_bias_tee) {
        src = prefix + ".x" + tag;
        nl.add(c::Capacitor{prefix + ".ct_" + tag, t, c::kGround, p.tee_capacitance});
        nl.add(c::Inductor{prefix + ".lt_" + tag, t, src, p.tee_inductance});
    }
    nl.add(c::VoltageSource{prefix + ".vpd_" + tag, src, c::kGround, Waveform::constant(volts)});
}

}  // namespace

NeuronHandles add_neuron(c::Netlist& nl, const std::string& prefix, const BankSpec& bank, const NeuronParams& p,
                         const std::string& bank_in_net, Waveform bias) {
    p.validate();
    NeuronHandles h;
    h.prefix = prefix;
    h.junction = prefix + ".j";
    h.drop_net = prefix + ".drop";
    h.thru_net = prefix + ".thru";
    h.rings = add_weight_bank(nl, prefix, bank, p, bank_in_net, h.drop_net, h.thru_net);

    const std::string j = h.junction, m = prefix + ".m", a = prefix + ".a", b = prefix + ".b";

    // Drop detector pushes photocurrent into J, thru detector pulls it out.
    h.drop_pd = prefix + ".pd_drop";
    h.thru_pd = prefix + ".pd_thru";
    nl.add(c::Photodiode{h.drop_pd, j, a, h.drop_net, p.photodetector});
    nl.add(c::Photodiode{h.thru_pd, b, j, h.thru_net, p.photodetector});

    nl.add(c::Capacitor{prefix + ".cp_a", a, j, p.pad_capacitance});
    nl.add(c::Capacitor{prefix + ".cp_b", j, b, p.pad_capacitance});
    nl.add(c::Capacitor{prefix + ".cp_m", m, b, p.pad_capacitance});

    h.modulator = prefix + ".mod";
    nl.add(c::PnModulator{h.modulator, j, m, p.modulator});
    nl.add(c::Resistor{prefix + ".rb", j, m, p.bias_resistance});
    nl.add(c::Inductor{prefix + ".lb_m", m, c::kGround, p.bond_inductance});

    const std::string ib = prefix + ".ib";
    h.bias_source = prefix + ".ibias";
    nl.add(c::Inductor{prefix + ".lb_j", j, ib, p.bond_inductance});
    nl.add(c::CurrentSource{h.bias_source, c::kGround, ib, std::move(bias)});

    add_tee(nl, prefix, "1", a, p.pd_bias, p);
    add_tee(nl, prefix, "2", b, -p.pd_bias, p);
    return h;
}

double modulator_radius_for(const NeuronParams& p, double pump_wavelength) {
    const double dn = devices::modulator_index_shift(p.dip_voltage, p.modulator).delta.real();
    return optics::radius_for_resonance(p.modulator_radius, p.modulator_index, pump_wavelength, dn);
}

namespace {

optics::MrrParams modulator_ring_params(const NeuronParams& p, double pump_wavelength) {
    return optics::MrrParams::make(modulator_radius_for(p, pump_wavelength), p.modulator_coupling, 0.0,
                                   p.modulator_index, p.modulator_alpha, optics::ShifterKind::PnModulator);
}

}  // namespace

void add_modulator_ring(c::Netlist& nl, NeuronHandles& n, const NeuronParams& p, const std::string& pump_net,
                        const std::string& out_net, double pump_wavelength) {
    c::Mrr r;
    r.id = n.prefix + ".modring";
    r.in = pump_net;
    r.thru = out_net;
    r.params = modulator_ring_params(p, pump_wavelength);
    r.modulator = n.modulator;
    n.modulator_ring = r.id;
    n.output_net = out_net;
    nl.add(std::move(r));
}

double modulator_transmission(const NeuronParams& p, double pump_wavelength, double v) {
    const auto params = modulator_ring_params(p, pump_wavelength);
    const auto shift = devices::modulator_index_shift(v, p.modulator).delta;
    const auto in = optics::OpticalField::from_power(1.0, pump_wavelength);
    const optics::OpticalField dark(0.0, 0.0, pump_wavelength);
    return optics::mrr_transfer(in, dark, params, shift).thru.power();
}

}  // namespace pnsim
