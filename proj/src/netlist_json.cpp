#include "pnsim/errors.hpp"
#include "pnsim/netlist.hpp"

#include <fstream>
#include <numbers>

namespace pnsim::circuit {

using nlohmann::json;

namespace {

std::string str_at(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw NetlistError(where + ": missing string field '" + key + "'");
    }
    return j.at(key).get<std::string>();
}

std::string str_or(const json& j, const char* key) {
    return j.contains(key) && j.at(key).is_string() ? j.at(key).get<std::string>() : std::string{};
}

double num_at(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw NetlistError(where + ": missing numeric field '" + key + "'");
    }
    return j.at(key).get<double>();
}

Waveform waveform_at(const json& params, const char* key, double fallback) {
    if (!params.contains(key)) {
        return Waveform::constant(fallback);
    }
    return params.at(key).get<Waveform>();
}

json element_json(const Element& e) {
    json j;
    j["id"] = element_id(e);
    j["kind"] = element_kind(e);
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Resistor>) {
                j["params"] = {{"resistance", x.resistance}};
                j["terminals"] = {{"a", x.a}, {"b", x.b}};
            } else if constexpr (std::is_same_v<T, Capacitor>) {
                j["params"] = {{"capacitance", x.capacitance}};
                j["terminals"] = {{"a", x.a}, {"b", x.b}};
            } else if constexpr (std::is_same_v<T, Inductor>) {
                j["params"] = {{"inductance", x.inductance}};
                j["terminals"] = {{"a", x.a}, {"b", x.b}};
            } else if constexpr (std::is_same_v<T, VoltageSource>) {
                j["params"] = {{"value", x.value}};
                j["terminals"] = {{"pos", x.pos}, {"neg", x.neg}};
            } else if constexpr (std::is_same_v<T, CurrentSource>) {
                j["params"] = {{"value", x.value}};
                j["terminals"] = {{"from", x.from}, {"to", x.to}};
            } else if constexpr (std::is_same_v<T, Photodiode>) {
                j["params"] = json(x.params);
                j["terminals"] = {{"anode", x.anode}, {"cathode", x.cathode}};
                j["ports"] = {{"in", x.optical_in}};
            } else if constexpr (std::is_same_v<T, PnModulator>) {
                j["params"] = json(x.params);
                j["terminals"] = {{"anode", x.anode}, {"cathode", x.cathode}};
            } else if constexpr (std::is_same_v<T, Laser>) {
                j["params"] = {{"wavelength", x.wavelength}, {"power", x.power}};
                if (x.envelope) {
                    j["params"]["envelope"] = *x.envelope;
                }
                j["ports"] = {{"out", x.out}};
            } else if constexpr (std::is_same_v<T, Mux>) {
                j["params"] = json::object();
                j["ports"] = {{"in", x.inputs}, {"out", x.out}};
            } else if constexpr (std::is_same_v<T, Waveguide>) {
                j["params"] = {{"n0", x.params.n0}, {"alpha0", x.params.alpha0}, {"length", x.params.length}};
                j["ports"] = {{"in", x.in}, {"out", x.out}};
            } else if constexpr (std::is_same_v<T, Coupler>) {
                j["params"] = {{"k", x.params.k}, {"excess_loss", x.params.excess_loss}};
                j["ports"] = {{"in1", x.in1}, {"in2", x.in2}, {"out1", x.out1}, {"out2", x.out2}};
            } else if constexpr (std::is_same_v<T, Mrr>) {
                const auto& p = x.params;
                json params = {{"radius", p.radius},
                               {"k_in", p.coupler_in.k},
                               {"k_drop", p.coupler_drop.k},
                               {"excess_loss_in", p.coupler_in.excess_loss},
                               {"excess_loss_drop", p.coupler_drop.excess_loss},
                               {"n0", p.waveguide.n0},
                               {"alpha0", p.waveguide.alpha0}};
                if (p.shifter_kind == optics::ShifterKind::PnModulator) {
                    params["shifter"] = "pn_modulator";
                    params["modulator"] = x.modulator;
                } else {
                    params["shifter"] = "heater";
                    params["heater"] = json(x.heater);
                    params["heater_current"] = x.heater_current;
                }
                j["params"] = params;
                j["ports"] = {{"in", x.in}, {"add", x.add}, {"thru", x.thru}, {"drop", x.drop}};
            } else if constexpr (std::is_same_v<T, DelayLine>) {
                j["params"] = {{"delay", x.delay}, {"transmission", x.transmission}};
                j["ports"] = {{"in", x.in}, {"out", x.out}};
            }
        },
        e);
    return j;
}

Element element_from(const json& j) {
    const std::string id = str_at(j, "id", "element");
    const std::string kind = str_at(j, "kind", "element '" + id + "'");
    const std::string where = "element '" + id + "'";
    const json params = j.value("params", json::object());
    const json term = j.value("terminals", json::object());
    const json ports = j.value("ports", json::object());

    if (kind == "resistor") {
        return Resistor{id, str_at(term, "a", where), str_at(term, "b", where), num_at(params, "resistance", where)};
    }
    if (kind == "capacitor") {
        return Capacitor{id, str_at(term, "a", where), str_at(term, "b", where), num_at(params, "capacitance", where)};
    }
    if (kind == "inductor") {
        return Inductor{id, str_at(term, "a", where), str_at(term, "b", where), num_at(params, "inductance", where)};
    }
    if (kind == "vsource") {
        return VoltageSource{id, str_at(term, "pos", where), str_at(term, "neg", where), waveform_at(params, "value", 0.0)};
    }
    if (kind == "isource") {
        return CurrentSource{id, str_at(term, "from", where), str_at(term, "to", where), waveform_at(params, "value", 0.0)};
    }
    if (kind == "photodiode") {
        return Photodiode{id, str_at(term, "anode", where), str_at(term, "cathode", where), str_or(ports, "in"),
                          params.get<devices::PhotodetectorParams>()};
    }
    if (kind == "pn_modulator") {
        return PnModulator{id, str_at(term, "anode", where), str_at(term, "cathode", where), params.get<devices::PnModulatorParams>()};
    }
    if (kind == "laser") {
        Laser l{id, str_at(ports, "out", where), num_at(params, "wavelength", where), num_at(params, "power", where),
                std::nullopt};
        if (params.contains("envelope")) {
            l.envelope = params.at("envelope").get<Waveform>();
        }
        return l;
    }
    if (kind == "mux") {
        Mux m{id, {}, str_at(ports, "out", where)};
        if (!ports.contains("in") || !ports.at("in").is_array()) {
            throw NetlistError(where + ": mux needs an 'in' array");
        }
        m.inputs = ports.at("in").get<std::vector<std::string>>();
        return m;
    }
    if (kind == "waveguide") {
        optics::WaveguideParams w;
        w.n0 = params.value("n0", w.n0);
        w.alpha0 = params.value("alpha0", w.alpha0);
        w.length = params.value("length", w.length);
        return Waveguide{id, str_or(ports, "in"), str_at(ports, "out", where), w};
    }
    if (kind == "coupler") {
        optics::CouplerParams c{num_at(params, "k", where), params.value("excess_loss", 1.0)};
        return Coupler{id, str_or(ports, "in1"), str_or(ports, "in2"), str_at(ports, "out1", where),
                       str_at(ports, "out2", where), c};
    }
    if (kind == "mrr") {
        const std::string shifter = params.value("shifter", std::string("heater"));
        optics::ShifterKind sk;
        if (shifter == "heater") {
            sk = optics::ShifterKind::Heater;
        } else if (shifter == "pn_modulator") {
            sk = optics::ShifterKind::PnModulator;
        } else {
            throw NetlistError(where + ": unknown shifter '" + shifter + "'");
        }
        Mrr m;
        m.id = id;
        m.params = optics::MrrParams::make(num_at(params, "radius", where),
                                           params.value("k_in", optics::kDefaultRingCoupling),
                                           params.value("k_drop", optics::kDefaultRingCoupling),
                                           params.value("n0", 2.4), params.value("alpha0", optics::kDefaultRingAlpha0), sk);
        m.params.coupler_in.excess_loss = params.value("excess_loss_in", 1.0);
        m.params.coupler_drop.excess_loss = params.value("excess_loss_drop", 1.0);
        m.modulator = params.value("modulator", std::string{});
        if (params.contains("heater")) {
            m.heater = params.at("heater").get<devices::HeaterParams>();
        }
        m.heater_current = waveform_at(params, "heater_current", 0.0);
        m.in = str_or(ports, "in");
        m.add = str_or(ports, "add");
        m.thru = str_at(ports, "thru", where);
        m.drop = str_or(ports, "drop");
        return m;
    }
    if (kind == "delay_line") {
        return DelayLine{id, str_or(ports, "in"), str_at(ports, "out", where), num_at(params, "delay", where),
                         params.value("transmission", 1.0)};
    }
    throw NetlistError(where + ": unknown kind '" + kind + "'");
}

const char* probe_kind_name(Probe::Kind k) {
    switch (k) {
        case Probe::Kind::Voltage: return "voltage";
        case Probe::Kind::Vmod: return "vmod";
        case Probe::Kind::Current: return "current";
        case Probe::Kind::OpticalPower: return "optical_power";
    }
    return "voltage";
}

}  // namespace

void to_json(json& j, const Netlist& n) {
    j = json::object();
    j["version"] = n.version;
    j["nodes"] = n.nodes;
    j["elements"] = json::array();
    for (const auto& e : n.elements) {
        j["elements"].push_back(element_json(e));
    }
    j["probes"] = json::array();
    for (const auto& p : n.probes) {
        json pj = {{"name", p.name}, {"kind", probe_kind_name(p.kind)}};
        switch (p.kind) {
            case Probe::Kind::Voltage:
                pj["node"] = p.target;
                if (!p.ref.empty()) {
                    pj["ref"] = p.ref;
                }
                break;
            case Probe::Kind::Vmod:
            case Probe::Kind::Current:
                pj["element"] = p.target;
                break;
            case Probe::Kind::OpticalPower:
                pj["net"] = p.target;
                if (p.wavelength) {
                    pj["wavelength"] = *p.wavelength;
                }
                break;
        }
        j["probes"].push_back(pj);
    }
    j["sim"] = {{"dt", n.sim.dt},
                {"duration", n.sim.duration},
                {"method", method_name(n.sim.method)},
                {"record_interval", n.sim.record_interval},
                {"initial", n.sim.dc_init ? "dc" : "zero"}};
}

void from_json(const json& j, Netlist& n) {
    n = Netlist{};
    n.version = j.value("version", 1);
    if (n.version != 1) {
        throw NetlistError("unsupported netlist version " + std::to_string(n.version));
    }
    if (j.contains("nodes")) {
        n.nodes = j.at("nodes").get<std::vector<std::string>>();
    }
    for (const auto& e : j.value("elements", json::array())) {
        n.elements.push_back(element_from(e));
    }
    for (const auto& pj : j.value("probes", json::array())) {
        const std::string name = str_at(pj, "name", "probe");
        const std::string kind = str_at(pj, "kind", "probe '" + name + "'");
        const std::string where = "probe '" + name + "'";
        if (kind == "voltage") {
            n.probes.push_back(Probe::voltage(name, str_at(pj, "node", where), str_or(pj, "ref")));
        } else if (kind == "vmod") {
            n.probes.push_back(Probe::vmod(name, str_at(pj, "element", where)));
        } else if (kind == "current") {
            n.probes.push_back(Probe::current(name, str_at(pj, "element", where)));
        } else if (kind == "optical_power") {
            std::optional<double> wl;
            if (pj.contains("wavelength")) {
                wl = pj.at("wavelength").get<double>();
            }
            n.probes.push_back(Probe::optical_power(name, str_at(pj, "net", where), wl));
        } else {
            throw NetlistError(where + ": unknown kind '" + kind + "'");
        }
    }
    if (j.contains("sim")) {
        const json& s = j.at("sim");
        n.sim.dt = s.value("dt", n.sim.dt);
        n.sim.duration = s.value("duration", n.sim.duration);
        n.sim.method = parse_method(s.value("method", std::string("backward_euler")));
        n.sim.record_interval = s.value("record_interval", std::size_t{1});
        const std::string init = s.value("initial", std::string("dc"));
        if (init != "dc" && init != "zero") {
            throw NetlistError("sim.initial must be 'dc' or 'zero'");
        }
        n.sim.dc_init = init == "dc";
    }
}

Netlist load_netlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open netlist '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("netlist '" + path + "': " + e.what());
    }
    Netlist n = j.get<Netlist>();
    n.validate();
    return n;
}

}  // namespace pnsim::circuit
