#include "pnsim/netlist.hpp"

#include "pnsim/errors.hpp"

#include <cmath>
#include <map>
#include <set>

namespace pnsim::circuit {

bool is_ground(const std::string& node) noexcept { return node == kGround || node == "0"; }

const char* method_name(Method m) noexcept {
    return m == Method::Trapezoidal ? "trapezoidal" : "backward_euler";
}

Method parse_method(const std::string& name) {
    if (name == "backward_euler" || name == "be") {
        return Method::BackwardEuler;
    }
    if (name == "trapezoidal" || name == "trap") {
        return Method::Trapezoidal;
    }
    throw ConfigError("unknown integration method '" + name + "'");
}

const std::string& element_id(const Element& e) {
    return std::visit([](const auto& x) -> const std::string& { return x.id; }, e);
}

namespace {
template <class T>
struct KindName;
template <> struct KindName<Resistor> { static constexpr const char* v = "resistor"; };
template <> struct KindName<Capacitor> { static constexpr const char* v = "capacitor"; };
template <> struct KindName<Inductor> { static constexpr const char* v = "inductor"; };
template <> struct KindName<VoltageSource> { static constexpr const char* v = "vsource"; };
template <> struct KindName<CurrentSource> { static constexpr const char* v = "isource"; };
template <> struct KindName<Photodiode> { static constexpr const char* v = "photodiode"; };
template <> struct KindName<PnModulator> { static constexpr const char* v = "pn_modulator"; };
template <> struct KindName<Laser> { static constexpr const char* v = "laser"; };
template <> struct KindName<Mux> { static constexpr const char* v = "mux"; };
template <> struct KindName<Waveguide> { static constexpr const char* v = "waveguide"; };
template <> struct KindName<Coupler> { static constexpr const char* v = "coupler"; };
template <> struct KindName<Mrr> { static constexpr const char* v = "mrr"; };
template <> struct KindName<DelayLine> { static constexpr const char* v = "delay_line"; };
}  // namespace

std::string element_kind(const Element& e) {
    return std::visit([](const auto& x) { return std::string(KindName<std::decay_t<decltype(x)>>::v); }, e);
}

Probe Probe::voltage(std::string name, std::string node, std::string ref) {
    return {std::move(name), Kind::Voltage, std::move(node), std::move(ref), std::nullopt};
}
Probe Probe::vmod(std::string name, std::string modulator) {
    return {std::move(name), Kind::Vmod, std::move(modulator), {}, std::nullopt};
}
Probe Probe::current(std::string name, std::string element) {
    return {std::move(name), Kind::Current, std::move(element), {}, std::nullopt};
}
Probe Probe::optical_power(std::string name, std::string net, std::optional<double> wavelength) {
    return {std::move(name), Kind::OpticalPower, std::move(net), {}, wavelength};
}

const Element* Netlist::find(const std::string& id) const {
    for (const auto& e : elements) {
        if (element_id(e) == id) {
            return &e;
        }
    }
    return nullptr;
}

Element* Netlist::find(const std::string& id) {
    return const_cast<Element*>(static_cast<const Netlist*>(this)->find(id));
}

std::vector<std::string> Netlist::electrical_nodes() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto note = [&](const std::string& n) {
        if (!n.empty() && !is_ground(n) && seen.insert(n).second) {
            out.push_back(n);
        }
    };
    for (const auto& n : nodes) {
        note(n);
    }
    for (const auto& e : elements) {
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, Resistor> || std::is_same_v<T, Capacitor> ||
                              std::is_same_v<T, Inductor>) {
                    note(x.a);
                    note(x.b);
                } else if constexpr (std::is_same_v<T, VoltageSource>) {
                    note(x.pos);
                    note(x.neg);
                } else if constexpr (std::is_same_v<T, CurrentSource>) {
                    note(x.from);
                    note(x.to);
                } else if constexpr (std::is_same_v<T, Photodiode> || std::is_same_v<T, PnModulator>) {
                    note(x.anode);
                    note(x.cathode);
                }
            },
            e);
    }
    return out;
}

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw NetlistError(msg);
    }
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void Netlist::validate() const {
    std::set<std::string> ids;
    std::map<std::string, std::string> drivers;  // optical net -> driving element
    std::vector<std::pair<std::string, std::string>> consumed;  // (net, consumer)
    std::set<std::string> electrical;
    for (const auto& n : electrical_nodes()) {
        electrical.insert(n);
    }

    auto drive = [&](const std::string& net, const std::string& id) {
        require(!net.empty(), "element '" + id + "' has an unconnected optical output");
        auto [it, fresh] = drivers.emplace(net, id);
        require(fresh, "optical net '" + net + "' is driven by both '" + it->second + "' and '" + id + "'");
    };
    auto consume = [&](const std::string& net, const std::string& id) {
        if (!net.empty()) {
            consumed.emplace_back(net, id);
        }
    };
    auto terminal = [&](const std::string& node, const std::string& id) {
        require(!node.empty(), "element '" + id + "' has an unconnected terminal");
    };

    for (const auto& e : elements) {
        const std::string& id = element_id(e);
        require(!id.empty(), "element of kind " + element_kind(e) + " has no id");
        require(ids.insert(id).second, "duplicate element id '" + id + "'");
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                try {
                    if constexpr (std::is_same_v<T, Resistor>) {
                        terminal(x.a, id);
                        terminal(x.b, id);
                        require(finite_positive(x.resistance), "resistor '" + id + "' needs resistance > 0");
                    } else if constexpr (std::is_same_v<T, Capacitor>) {
                        terminal(x.a, id);
                        terminal(x.b, id);
                        require(finite_positive(x.capacitance), "capacitor '" + id + "' needs capacitance > 0");
                    } else if constexpr (std::is_same_v<T, Inductor>) {
                        terminal(x.a, id);
                        terminal(x.b, id);
                        require(finite_positive(x.inductance), "inductor '" + id + "' needs inductance > 0");
                    } else if constexpr (std::is_same_v<T, VoltageSource>) {
                        terminal(x.pos, id);
                        terminal(x.neg, id);
                        x.value.validate();
                    } else if constexpr (std::is_same_v<T, CurrentSource>) {
                        terminal(x.from, id);
                        terminal(x.to, id);
                        x.value.validate();
                    } else if constexpr (std::is_same_v<T, Photodiode>) {
                        terminal(x.anode, id);
                        terminal(x.cathode, id);
                        x.params.validate();
                        consume(x.optical_in, id);
                    } else if constexpr (std::is_same_v<T, PnModulator>) {
                        terminal(x.anode, id);
                        terminal(x.cathode, id);
                        x.params.validate();
                    } else if constexpr (std::is_same_v<T, Laser>) {
                        drive(x.out, id);
                        require(finite_positive(x.wavelength), "laser '" + id + "' needs wavelength > 0");
                        require(std::isfinite(x.power) && x.power >= 0.0, "laser '" + id + "' needs power >= 0");
                        if (x.envelope) {
                            x.envelope->validate();
                        }
                    } else if constexpr (std::is_same_v<T, Mux>) {
                        drive(x.out, id);
                        for (const auto& in : x.inputs) {
                            consume(in, id);
                        }
                    } else if constexpr (std::is_same_v<T, Waveguide>) {
                        drive(x.out, id);
                        consume(x.in, id);
                        x.params.validate();
                    } else if constexpr (std::is_same_v<T, Coupler>) {
                        drive(x.out1, id);
                        drive(x.out2, id);
                        consume(x.in1, id);
                        consume(x.in2, id);
                        x.params.validate();
                    } else if constexpr (std::is_same_v<T, Mrr>) {
                        drive(x.thru, id);
                        if (!x.drop.empty()) {
                            drive(x.drop, id);
                        }
                        consume(x.in, id);
                        consume(x.add, id);
                        x.params.validate();
                        if (x.params.shifter_kind == optics::ShifterKind::PnModulator) {
                            require(!x.modulator.empty(), "modulator ring '" + id + "' names no pn_modulator");
                        } else {
                            x.heater.validate();
                            x.heater_current.validate();
                        }
                    } else if constexpr (std::is_same_v<T, DelayLine>) {
                        drive(x.out, id);
                        consume(x.in, id);
                        require(std::isfinite(x.delay) && x.delay >= 0.0, "delay line '" + id + "' needs delay >= 0");
                        require(x.transmission >= 0.0 && x.transmission <= 1.0,
                                "delay line '" + id + "' needs transmission in [0, 1]");
                    }
                } catch (const NetlistError&) {
                    throw;
                } catch (const Error& err) {
                    throw NetlistError("element '" + id + "': " + err.what());
                }
            },
            e);
    }

    for (const auto& [net, consumer] : consumed) {
        require(drivers.count(net) > 0, "optical net '" + net + "' used by '" + consumer + "' has no driver");
    }
    for (const auto& e : elements) {
        if (const auto* m = std::get_if<Mrr>(&e); m && !m->modulator.empty()) {
            const Element* mod = find(m->modulator);
            require(mod && std::holds_alternative<PnModulator>(*mod),
                    "ring '" + m->id + "' references unknown pn_modulator '" + m->modulator + "'");
        }
    }
    for (const auto& p : probes) {
        require(!p.name.empty(), "probe without a name");
        switch (p.kind) {
            case Probe::Kind::Voltage:
                require(is_ground(p.target) || electrical.count(p.target), "probe '" + p.name + "': unknown node '" + p.target + "'");
                require(p.ref.empty() || is_ground(p.ref) || electrical.count(p.ref),
                        "probe '" + p.name + "': unknown node '" + p.ref + "'");
                break;
            case Probe::Kind::Vmod: {
                const Element* e = find(p.target);
                require(e && std::holds_alternative<PnModulator>(*e),
                        "probe '" + p.name + "': '" + p.target + "' is not a pn_modulator");
                break;
            }
            case Probe::Kind::Current: {
                const Element* e = find(p.target);
                require(e && (std::holds_alternative<Resistor>(*e) || std::holds_alternative<Inductor>(*e) ||
                              std::holds_alternative<VoltageSource>(*e) || std::holds_alternative<CurrentSource>(*e) ||
                              std::holds_alternative<Photodiode>(*e)),
                        "probe '" + p.name + "': no current available for '" + p.target + "'");
                break;
            }
            case Probe::Kind::OpticalPower:
                require(drivers.count(p.target) > 0, "probe '" + p.name + "': unknown optical net '" + p.target + "'");
                break;
        }
    }
    std::set<std::string> names;
    for (const auto& p : probes) {
        require(names.insert(p.name).second, "duplicate probe name '" + p.name + "'");
    }
    require(finite_positive(sim.dt), "sim.dt must be > 0");
    require(finite_positive(sim.duration), "sim.duration must be > 0");
    require(sim.record_interval >= 1, "sim.record_interval must be >= 1");
}

}  // namespace pnsim::circuit
