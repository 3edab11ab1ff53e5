#include "pnsim/circuit.hpp"

#include "pnsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace pnsim::circuit {

namespace {

using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

constexpr double kGmin = 1e-12;

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        parent[a] = b;
        return true;
    }
};

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) {
            out += ", ";
        }
        out += p;
    }
    return out;
}

void scale_bus(const optics::WdmBus& in, double power_factor, optics::WdmBus& out) {
    out.clear();
    const double a = std::sqrt(power_factor);
    for (const auto& ch : in.channels()) {
        out.channels().emplace_back(a * ch.e_real, a * ch.e_imag, ch.wavelength);
    }
}

}  // namespace

bool SimState::finite() const { return x.allFinite() && std::isfinite(time); }

struct Circuit::Impl {
    enum class OptKind { Laser, Mux, Waveguide, Coupler, Mrr, Delay };

    struct Res { int a, b; double g; };
    struct Cap { int a, b; double c; };
    struct Ind { int a, b; double l; };
    struct VSrc { int p, n; Waveform w; };
    struct ISrc { int from, to; Waveform w; };
    struct Pd { int junction, anode; int net; double eta; };
    struct Mod { int a, b; devices::PnModulatorParams p; };
    struct OptComp {
        OptKind kind;
        std::size_t elem;
        std::vector<int> in;
        std::vector<int> out;
        int mod = -1;
        int delay = -1;
    };

    Netlist nl;
    double dt;
    Method method;
    CouplingOptions coupling;

    std::vector<std::string> node_names;
    std::unordered_map<std::string, int> node_of;
    std::size_t N = 0, L = 0, S = 0, n = 0;

    std::vector<Res> res;
    std::vector<Cap> caps;
    std::vector<Ind> inds;
    std::vector<VSrc> vsrcs;
    std::vector<ISrc> isrcs;
    std::vector<Pd> pds;
    std::vector<Mod> mods;
    std::vector<std::string> mod_ids;
    std::map<std::string, std::pair<char, std::size_t>> by_id;  // element id -> (category, index)

    std::vector<std::string> net_names;
    std::unordered_map<std::string, int> net_of;
    std::vector<optics::WdmBus> buses;
    optics::WdmBus scratch, empty;
    std::vector<OptComp> comps;
    std::vector<int> delay_depth;
    std::vector<int> delay_comp;
    std::vector<std::size_t> pre_tr, post_tr, pre_dc, post_dc;
    bool decoupled_tr = true, decoupled_dc = true, dc_cyclic = false;
    std::vector<const optics::WdmBus*> mux_inputs;

    struct System {
        Eigen::MatrixXd A;
        MatL A_ld;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    };
    System main_sys;
    // Backward-Euler system for the first trapezoidal step, which damps the inconsistency of
    // an initial state with the sources at t = 0.
    System start_sys;
    Eigen::MatrixXd A_dc;
    MatL A_dc_ld;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_dc;

    std::vector<double> pd_current;
    std::size_t extrapolations = 0;

    Impl(Netlist netlist, double dt_, Method m) : nl(std::move(netlist)), dt(dt_), method(m) {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw NetlistError("time step must be > 0");
        }
        nl.validate();
        build_electrical();
        check_topology();
        build_optical();
        assemble();
    }

    int node(const std::string& name) const {
        if (is_ground(name)) {
            return -1;
        }
        return node_of.at(name);
    }

    int add_node(const std::string& name) {
        auto [it, fresh] = node_of.emplace(name, static_cast<int>(node_names.size()));
        if (fresh) {
            node_names.push_back(name);
        }
        return it->second;
    }

    void build_electrical() {
        for (const auto& name : nl.electrical_nodes()) {
            add_node(name);
        }
        for (const auto& e : nl.elements) {
            std::visit(
                [&](const auto& x) {
                    using T = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T, Resistor>) {
                        by_id[x.id] = {'R', res.size()};
                        res.push_back({node(x.a), node(x.b), 1.0 / x.resistance});
                    } else if constexpr (std::is_same_v<T, Capacitor>) {
                        caps.push_back({node(x.a), node(x.b), x.capacitance});
                    } else if constexpr (std::is_same_v<T, Inductor>) {
                        by_id[x.id] = {'L', inds.size()};
                        inds.push_back({node(x.a), node(x.b), x.inductance});
                    } else if constexpr (std::is_same_v<T, VoltageSource>) {
                        by_id[x.id] = {'V', vsrcs.size()};
                        vsrcs.push_back({node(x.pos), node(x.neg), x.value});
                    } else if constexpr (std::is_same_v<T, CurrentSource>) {
                        by_id[x.id] = {'I', isrcs.size()};
                        isrcs.push_back({node(x.from), node(x.to), x.value});
                    } else if constexpr (std::is_same_v<T, Photodiode>) {
                        int j = node(x.cathode);
                        if (x.params.series_resistance > 0.0) {
                            j = add_node(x.id + "#j");
                            res.push_back({node(x.cathode), j, 1.0 / x.params.series_resistance});
                        }
                        const int an = node(x.anode);
                        caps.push_back({j, an, x.params.junction_capacitance});
                        res.push_back({j, an, 1.0 / x.params.shunt_resistance});
                        by_id[x.id] = {'P', pds.size()};
                        pds.push_back({j, an, -1, x.params.responsivity});
                    } else if constexpr (std::is_same_v<T, PnModulator>) {
                        int j = node(x.anode);
                        if (x.params.series_resistance > 0.0) {
                            j = add_node(x.id + "#j");
                            res.push_back({node(x.anode), j, 1.0 / x.params.series_resistance});
                        }
                        caps.push_back({j, node(x.cathode), x.params.junction_capacitance});
                        by_id[x.id] = {'M', mods.size()};
                        mods.push_back({j, node(x.cathode), x.params});
                        mod_ids.push_back(x.id);
                    }
                },
                e);
        }
        N = node_names.size();
        L = inds.size();
        S = vsrcs.size();
        n = N + L + S;
        if (n == 0) {
            throw NetlistError("netlist has no electrical unknowns");
        }
    }

    // Element names touching each node, for diagnostics.
    std::vector<std::vector<std::string>> touching() const {
        std::vector<std::vector<std::string>> out(N);
        auto note = [&](const std::string& node_name, const std::string& id) {
            if (!is_ground(node_name)) {
                out[static_cast<std::size_t>(node_of.at(node_name))].push_back(id);
            }
        };
        for (const auto& e : nl.elements) {
            std::visit(
                [&](const auto& x) {
                    using T = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T, Resistor> || std::is_same_v<T, Capacitor> ||
                                  std::is_same_v<T, Inductor>) {
                        note(x.a, x.id);
                        note(x.b, x.id);
                    } else if constexpr (std::is_same_v<T, VoltageSource>) {
                        note(x.pos, x.id);
                        note(x.neg, x.id);
                    } else if constexpr (std::is_same_v<T, CurrentSource>) {
                        note(x.from, x.id);
                        note(x.to, x.id);
                    } else if constexpr (std::is_same_v<T, Photodiode> || std::is_same_v<T, PnModulator>) {
                        note(x.anode, x.id);
                        note(x.cathode, x.id);
                        if (node_of.count(x.id + "#j")) {
                            note(x.id + "#j", x.id);
                        }
                    }
                },
                e);
        }
        return out;
    }

    void check_topology() {
        // Ground is slot N in the union-find.
        auto slot = [&](int k) { return k < 0 ? static_cast<int>(N) : k; };
        UnionFind uf(N + 1);
        for (const auto& r : res) uf.unite(slot(r.a), slot(r.b));
        for (const auto& c : caps) uf.unite(slot(c.a), slot(c.b));
        for (const auto& l : inds) uf.unite(slot(l.a), slot(l.b));
        for (const auto& v : vsrcs) uf.unite(slot(v.p), slot(v.n));
        std::vector<std::string> floating;
        std::set<std::string> culprits;
        const auto touch = touching();
        for (std::size_t k = 0; k < N; ++k) {
            if (uf.find(static_cast<int>(k)) != uf.find(static_cast<int>(N))) {
                floating.push_back(node_names[k]);
                culprits.insert(touch[k].begin(), touch[k].end());
            }
        }
        if (!floating.empty()) {
            throw NetlistError("floating subcircuit: nodes {" + join(floating) + "} have no path to ground (elements {" +
                               join({culprits.begin(), culprits.end()}) + "})");
        }

        // Loops made only of voltage sources and inductors are singular at DC.
        struct Edge { int a, b; std::string id; };
        std::vector<Edge> edges;
        for (const auto& e : nl.elements) {
            if (const auto* v = std::get_if<VoltageSource>(&e)) {
                edges.push_back({slot(node(v->pos)), slot(node(v->neg)), v->id});
            } else if (const auto* l = std::get_if<Inductor>(&e)) {
                edges.push_back({slot(node(l->a)), slot(node(l->b)), l->id});
            }
        }
        UnionFind loop(N + 1);
        std::vector<std::vector<std::pair<int, std::size_t>>> adj(N + 1);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const auto& e = edges[i];
            if (!loop.unite(e.a, e.b)) {
                // Path between the endpoints through earlier edges closes the loop.
                std::vector<int> prev(N + 1, -2);
                std::vector<std::size_t> via(N + 1, 0);
                std::deque<int> q{e.a};
                prev[static_cast<std::size_t>(e.a)] = -1;
                while (!q.empty()) {
                    const int u = q.front();
                    q.pop_front();
                    for (auto [w, ei] : adj[static_cast<std::size_t>(u)]) {
                        if (prev[static_cast<std::size_t>(w)] == -2) {
                            prev[static_cast<std::size_t>(w)] = u;
                            via[static_cast<std::size_t>(w)] = ei;
                            q.push_back(w);
                        }
                    }
                }
                std::vector<std::string> names{e.id};
                for (int w = e.b; w != e.a && prev[static_cast<std::size_t>(w)] >= -1 && w >= 0;
                     w = prev[static_cast<std::size_t>(w)]) {
                    if (prev[static_cast<std::size_t>(w)] == -1) {
                        break;
                    }
                    names.push_back(edges[via[static_cast<std::size_t>(w)]].id);
                }
                throw NetlistError("loop of voltage sources/inductors: {" + join(names) + "}");
            }
            adj[static_cast<std::size_t>(e.a)].push_back({e.b, i});
            adj[static_cast<std::size_t>(e.b)].push_back({e.a, i});
        }
    }

    int net(const std::string& name) {
        if (name.empty()) {
            return -1;
        }
        auto [it, fresh] = net_of.emplace(name, static_cast<int>(net_names.size()));
        if (fresh) {
            net_names.push_back(name);
        }
        return it->second;
    }

    static int depth_for(double delay, double dt) {
        if (delay <= 0.0) {
            return 0;
        }
        return std::max(1, static_cast<int>(std::llround(delay / dt)));
    }

    void build_optical() {
        std::unordered_map<std::string, int> mod_index;
        for (std::size_t m = 0; m < mod_ids.size(); ++m) {
            mod_index[mod_ids[m]] = static_cast<int>(m);
        }
        std::size_t pd_i = 0;
        for (std::size_t i = 0; i < nl.elements.size(); ++i) {
            std::visit(
                [&](const auto& x) {
                    using T = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T, Photodiode>) {
                        pds[pd_i++].net = net(x.optical_in);
                    } else if constexpr (std::is_same_v<T, Laser>) {
                        comps.push_back({OptKind::Laser, i, {}, {net(x.out)}});
                    } else if constexpr (std::is_same_v<T, Mux>) {
                        OptComp c{OptKind::Mux, i, {}, {net(x.out)}};
                        for (const auto& in : x.inputs) {
                            c.in.push_back(net(in));
                        }
                        comps.push_back(c);
                    } else if constexpr (std::is_same_v<T, Waveguide>) {
                        comps.push_back({OptKind::Waveguide, i, {net(x.in)}, {net(x.out)}});
                    } else if constexpr (std::is_same_v<T, Coupler>) {
                        comps.push_back({OptKind::Coupler, i, {net(x.in1), net(x.in2)}, {net(x.out1), net(x.out2)}});
                    } else if constexpr (std::is_same_v<T, Mrr>) {
                        OptComp c{OptKind::Mrr, i, {net(x.in), net(x.add)}, {net(x.thru), net(x.drop)}};
                        if (!x.modulator.empty()) {
                            c.mod = mod_index.at(x.modulator);
                        }
                        comps.push_back(c);
                    } else if constexpr (std::is_same_v<T, DelayLine>) {
                        OptComp c{OptKind::Delay, i, {net(x.in)}, {net(x.out)}};
                        c.delay = static_cast<int>(delay_depth.size());
                        delay_depth.push_back(depth_for(x.delay, dt));
                        delay_comp.push_back(static_cast<int>(comps.size()));
                        comps.push_back(c);
                    }
                },
                nl.elements[i]);
        }
        buses.assign(net_names.size(), optics::WdmBus{});
        pd_current.assign(pds.size(), 0.0);

        std::vector<int> driver(net_names.size(), -1);
        for (std::size_t c = 0; c < comps.size(); ++c) {
            for (int o : comps[c].out) {
                if (o >= 0) {
                    driver[static_cast<std::size_t>(o)] = static_cast<int>(c);
                }
            }
        }
        auto breaks = [&](std::size_t c, bool dc) {
            return !dc && comps[c].kind == OptKind::Delay && delay_depth[static_cast<std::size_t>(comps[c].delay)] > 0;
        };
        auto order_for = [&](bool dc, std::vector<std::size_t>& order) -> bool {
            const std::size_t C = comps.size();
            std::vector<std::vector<std::size_t>> succ(C);
            std::vector<int> indeg(C, 0);
            for (std::size_t c = 0; c < C; ++c) {
                if (breaks(c, dc)) {
                    continue;
                }
                for (int in : comps[c].in) {
                    if (in >= 0 && driver[static_cast<std::size_t>(in)] >= 0) {
                        succ[static_cast<std::size_t>(driver[static_cast<std::size_t>(in)])].push_back(c);
                        ++indeg[c];
                    }
                }
            }
            std::set<std::size_t> ready;
            for (std::size_t c = 0; c < C; ++c) {
                if (indeg[c] == 0) {
                    ready.insert(c);
                }
            }
            order.clear();
            while (!ready.empty()) {
                const std::size_t c = *ready.begin();
                ready.erase(ready.begin());
                order.push_back(c);
                for (std::size_t s : succ[c]) {
                    if (--indeg[s] == 0) {
                        ready.insert(s);
                    }
                }
            }
            if (order.size() == C) {
                return true;
            }
            if (!dc) {
                std::vector<std::string> stuck;
                for (std::size_t c = 0; c < C; ++c) {
                    if (indeg[c] > 0) {
                        stuck.push_back(element_id(nl.elements[comps[c].elem]));
                    }
                }
                throw NetlistError("optical loop without a delay line through {" + join(stuck) + "}");
            }
            return false;
        };
        std::vector<std::size_t> order_tr, order_dc;
        order_for(false, order_tr);
        dc_cyclic = !order_for(true, order_dc);

        auto split = [&](bool dc, const std::vector<std::size_t>& order, std::vector<std::size_t>& pre,
                         std::vector<std::size_t>& post) -> bool {
            std::vector<char> needed(comps.size(), 0);
            std::vector<int> stack;
            for (const auto& p : pds) {
                if (p.net >= 0) {
                    stack.push_back(p.net);
                }
            }
            while (!stack.empty()) {
                const int nt = stack.back();
                stack.pop_back();
                const int d = driver[static_cast<std::size_t>(nt)];
                if (d < 0 || needed[static_cast<std::size_t>(d)]) {
                    continue;
                }
                needed[static_cast<std::size_t>(d)] = 1;
                if (breaks(static_cast<std::size_t>(d), dc)) {
                    continue;
                }
                for (int in : comps[static_cast<std::size_t>(d)].in) {
                    if (in >= 0) {
                        stack.push_back(in);
                    }
                }
            }
            bool coupled = false;
            pre.clear();
            post.clear();
            for (std::size_t c : order) {
                if (needed[c]) {
                    pre.push_back(c);
                    coupled = coupled || comps[c].mod >= 0;
                } else {
                    post.push_back(c);
                }
            }
            return !coupled;
        };
        decoupled_tr = split(false, order_tr, pre_tr, post_tr);
        if (!dc_cyclic) {
            decoupled_dc = split(true, order_dc, pre_dc, post_dc);
        }
    }

    void stamp_g(Eigen::MatrixXd& M, int a, int b, double g) const {
        if (a >= 0) M(a, a) += g;
        if (b >= 0) M(b, b) += g;
        if (a >= 0 && b >= 0) {
            M(a, b) -= g;
            M(b, a) -= g;
        }
    }

    void stamp_branch(Eigen::MatrixXd& M, std::size_t row, int a, int b) const {
        const auto r = static_cast<Eigen::Index>(row);
        if (a >= 0) {
            M(r, a) += 1.0;
            M(a, r) += 1.0;
        }
        if (b >= 0) {
            M(r, b) -= 1.0;
            M(b, r) -= 1.0;
        }
    }

    double cap_g(double c, bool trap) const { return (trap ? 2.0 : 1.0) * c / dt; }
    double ind_r(double l, bool trap) const { return (trap ? 2.0 : 1.0) * l / dt; }

    void build_system(System& sys, bool trap) const {
        const auto sz = static_cast<Eigen::Index>(n);
        auto& M = sys.A;
        M = Eigen::MatrixXd::Zero(sz, sz);
        for (const auto& r : res) {
            stamp_g(M, r.a, r.b, r.g);
        }
        for (const auto& c : caps) {
            stamp_g(M, c.a, c.b, cap_g(c.c, trap));
        }
        for (std::size_t l = 0; l < L; ++l) {
            stamp_branch(M, N + l, inds[l].a, inds[l].b);
            M(static_cast<Eigen::Index>(N + l), static_cast<Eigen::Index>(N + l)) -= ind_r(inds[l].l, trap);
        }
        for (std::size_t s = 0; s < S; ++s) {
            stamp_branch(M, N + L + s, vsrcs[s].p, vsrcs[s].n);
        }
        sys.lu.compute(M);
        const Eigen::VectorXd diag = sys.lu.matrixLU().diagonal().cwiseAbs();
        if (!diag.allFinite() || diag.minCoeff() <= 1e-300 * diag.maxCoeff()) {
            throw NetlistError("singular circuit matrix");
        }
        sys.A_ld = M.cast<long double>();
    }

    void assemble() {
        const bool trap = method == Method::Trapezoidal;
        build_system(main_sys, trap);
        if (trap) {
            build_system(start_sys, false);
        }
        const auto sz = static_cast<Eigen::Index>(n);
        A_dc = Eigen::MatrixXd::Zero(sz, sz);
        for (const auto& r : res) {
            stamp_g(A_dc, r.a, r.b, r.g);
        }
        for (std::size_t l = 0; l < L; ++l) {
            stamp_branch(A_dc, N + l, inds[l].a, inds[l].b);
        }
        for (std::size_t s = 0; s < S; ++s) {
            stamp_branch(A_dc, N + L + s, vsrcs[s].p, vsrcs[s].n);
        }
        // gmin only where capacitors are the sole path to ground.
        auto slot = [&](int k) { return k < 0 ? static_cast<int>(N) : k; };
        UnionFind dc(N + 1);
        for (const auto& r : res) dc.unite(slot(r.a), slot(r.b));
        for (const auto& l : inds) dc.unite(slot(l.a), slot(l.b));
        for (const auto& v : vsrcs) dc.unite(slot(v.p), slot(v.n));
        for (std::size_t k = 0; k < N; ++k) {
            if (dc.find(static_cast<int>(k)) != dc.find(static_cast<int>(N))) {
                A_dc(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) += kGmin;
            }
        }
        lu_dc.compute(A_dc);
        A_dc_ld = A_dc.cast<long double>();
    }

    static double v_of(const Eigen::VectorXd& x, int k) { return k < 0 ? 0.0 : x[k]; }

    double vmod_of(const Eigen::VectorXd& x, std::size_t m) const { return v_of(x, mods[m].a) - v_of(x, mods[m].b); }

    const optics::WdmBus& bus_in(int idx) const { return idx < 0 ? empty : buses[static_cast<std::size_t>(idx)]; }
    optics::WdmBus& bus_out(int idx) { return idx < 0 ? scratch : buses[static_cast<std::size_t>(idx)]; }

    // Evaluates `list` at time t with effective modulator voltages `u`. For transient passes
    // `m` is the time index used to address delay buffers; `state` is null at DC.
    void eval_optics(const std::vector<std::size_t>& list, double t, const std::vector<double>& u,
                     const SimState* state, std::size_t m) {
        for (std::size_t ci : list) {
            const OptComp& c = comps[ci];
            const Element& e = nl.elements[c.elem];
            switch (c.kind) {
                case OptKind::Laser: {
                    const auto& l = std::get<Laser>(e);
                    double env = l.envelope ? (*l.envelope)(t) : 1.0;
                    if (env < 0.0 || env > 1.0 + 1e-12) {
                        throw InvalidInputError("laser '" + l.id + "' envelope " + std::to_string(env) +
                                                " outside [0, 1]");
                    }
                    auto& out = bus_out(c.out[0]);
                    out.clear();
                    out.channels().push_back(optics::OpticalField::from_power(l.power * std::min(env, 1.0), l.wavelength));
                    break;
                }
                case OptKind::Mux: {
                    mux_inputs.clear();
                    for (int in : c.in) {
                        mux_inputs.push_back(&bus_in(in));
                    }
                    optics::merge_into(mux_inputs, bus_out(c.out[0]));
                    break;
                }
                case OptKind::Waveguide: {
                    const auto& w = std::get<Waveguide>(e);
                    const auto& in = bus_in(c.in[0]);
                    auto& out = bus_out(c.out[0]);
                    out.clear();
                    for (const auto& ch : in.channels()) {
                        out.channels().push_back(optics::propagate_waveguide(ch, w.params));
                    }
                    break;
                }
                case OptKind::Coupler: {
                    const auto& cp = std::get<Coupler>(e);
                    optics::couple_bus_into(bus_in(c.in[0]), bus_in(c.in[1]), cp.params, bus_out(c.out[0]),
                                            bus_out(c.out[1]));
                    break;
                }
                case OptKind::Mrr: {
                    const auto& r = std::get<Mrr>(e);
                    optics::IndexShift dn;
                    if (c.mod >= 0) {
                        const auto ms = devices::modulator_index_shift(u[static_cast<std::size_t>(c.mod)],
                                                                       mods[static_cast<std::size_t>(c.mod)].p);
                        extrapolations += ms.extrapolated ? 1 : 0;
                        dn = ms.delta;
                    } else {
                        dn = devices::heater_index_shift(r.heater_current(t), r.heater);
                    }
                    optics::mrr_bus_into(bus_in(c.in[0]), bus_in(c.in[1]), r.params, dn, bus_out(c.out[0]),
                                         bus_out(c.out[1]));
                    break;
                }
                case OptKind::Delay: {
                    const auto& d = std::get<DelayLine>(e);
                    const int depth = delay_depth[static_cast<std::size_t>(c.delay)];
                    if (state == nullptr || depth == 0) {
                        scale_bus(bus_in(c.in[0]), d.transmission, bus_out(c.out[0]));
                    } else {
                        const auto& buf = state->delay_buffers[static_cast<std::size_t>(c.delay)];
                        scale_bus(buf[m % static_cast<std::size_t>(depth)], d.transmission, bus_out(c.out[0]));
                    }
                    break;
                }
            }
        }
    }

    void update_pd_currents() {
        for (std::size_t p = 0; p < pds.size(); ++p) {
            pd_current[p] = pds[p].net < 0 ? 0.0 : pds[p].eta * buses[static_cast<std::size_t>(pds[p].net)].total_power();
        }
    }

    template <class V>
    void add_pd(V& z) const {
        for (std::size_t p = 0; p < pds.size(); ++p) {
            if (pds[p].anode >= 0) z[pds[p].anode] += pd_current[p];
            if (pds[p].junction >= 0) z[pds[p].junction] -= pd_current[p];
        }
    }

    // Right-hand side of A x = z without photocurrents.
    VecL source_rhs(double t, const SimState* prev, bool trap) const {
        VecL z = VecL::Zero(static_cast<Eigen::Index>(n));
        for (const auto& i : isrcs) {
            const long double v = i.w(t);
            if (i.to >= 0) z[i.to] += v;
            if (i.from >= 0) z[i.from] -= v;
        }
        for (std::size_t s = 0; s < S; ++s) {
            z[static_cast<Eigen::Index>(N + L + s)] = vsrcs[s].w(t);
        }
        if (prev == nullptr) {
            return z;
        }
        const auto& x = prev->x;
        for (std::size_t k = 0; k < caps.size(); ++k) {
            const auto& c = caps[k];
            long double ieq = static_cast<long double>(cap_g(c.c, trap)) * (v_of(x, c.a) - v_of(x, c.b));
            if (trap) {
                ieq += prev->cap_current[k];
            }
            if (c.a >= 0) z[c.a] += ieq;
            if (c.b >= 0) z[c.b] -= ieq;
        }
        for (std::size_t l = 0; l < L; ++l) {
            const auto row = static_cast<Eigen::Index>(N + l);
            long double rhs = -static_cast<long double>(ind_r(inds[l].l, trap)) * x[row];
            if (trap) {
                rhs -= v_of(x, inds[l].a) - v_of(x, inds[l].b);
            }
            z[row] = rhs;
        }
        return z;
    }

    // Solves M dx = r with one step of iterative refinement; returns the node-row residual.
    static double solve_refined(const Eigen::PartialPivLU<Eigen::MatrixXd>& f, const MatL& M, const VecL& r,
                                Eigen::VectorXd& dx, std::size_t node_rows) {
        auto worst_node = [&](const VecL& res) {
            long double w = 0.0L;
            for (std::size_t k = 0; k < node_rows; ++k) {
                w = std::max(w, std::abs(res[static_cast<Eigen::Index>(k)]));
            }
            return static_cast<double>(w);
        };
        dx = f.solve(r.cast<double>());
        VecL res = r - M * dx.cast<long double>();
        double worst = worst_node(res);
        // One refinement pass only when the plain solve leaves a visible residual.
        if (worst > 1e-13) {
            dx += f.solve(res.cast<double>());
            res = r - M * dx.cast<long double>();
            worst = worst_node(res);
        }
        return worst;
    }

    std::vector<double> lag_update(const Eigen::VectorXd& x, const std::vector<double>& prev_lag) const {
        std::vector<double> u(mods.size());
        for (std::size_t m = 0; m < mods.size(); ++m) {
            const double v = vmod_of(x, m);
            if (mods[m].p.forward_bias_mode) {
                const double k = dt / mods[m].p.carrier_lifetime;
                u[m] = (prev_lag[m] + k * v) / (1.0 + k);
            } else {
                u[m] = v;
            }
        }
        return u;
    }

    void push_delays(SimState& s, std::size_t m) const {
        for (std::size_t d = 0; d < delay_depth.size(); ++d) {
            const int depth = delay_depth[d];
            if (depth > 0) {
                const auto& c = comps[static_cast<std::size_t>(delay_comp[d])];
                s.delay_buffers[d][m % static_cast<std::size_t>(depth)] = bus_in(c.in[0]);
            }
        }
    }

    StepInfo step(SimState& s) {
        if (s.x.size() != static_cast<Eigen::Index>(n)) {
            throw InvalidInputError("state does not match the circuit");
        }
        const std::size_t m = s.step + 1;
        const double t = static_cast<double>(m) * dt;
        const bool trap = method == Method::Trapezoidal && s.step > 0;
        const System& sys = method == Method::Trapezoidal && s.step == 0 ? start_sys : main_sys;
        const VecL z = source_rhs(t, &s, trap);
        const VecL base = z - sys.A_ld * s.x.cast<long double>();
        const auto node_rows = static_cast<Eigen::Index>(N);

        StepInfo info;
        Eigen::VectorXd dx;
        Eigen::VectorXd x_new;
        std::vector<double> u;
        if (decoupled_tr) {
            eval_optics(pre_tr, t, s.lag, &s, m);
            update_pd_currents();
            VecL r = base;
            add_pd(r);
            info.kcl_residual = solve_refined(sys.lu, sys.A_ld, r, dx, N);
            x_new = s.x + dx;
            info.iterations = 1;
            info.voltage_change = N ? dx.head(node_rows).cwiseAbs().maxCoeff() : 0.0;
            u = lag_update(x_new, s.lag);
        } else {
            std::vector<double> guess = s.lag;
            Eigen::VectorXd x_iter = s.x;
            double prev_change = std::numeric_limits<double>::infinity();
            bool converged = false;
            for (int it = 1; it <= coupling.max_iterations; ++it) {
                eval_optics(pre_tr, t, guess, &s, m);
                update_pd_currents();
                VecL r = base;
                add_pd(r);
                dx = sys.lu.solve(r.cast<double>());
                x_new = s.x + dx;
                const double change = N ? (x_new - x_iter).head(node_rows).cwiseAbs().maxCoeff() : 0.0;
                const std::vector<double> u_new = lag_update(x_new, s.lag);
                info.iterations = it;
                info.voltage_change = change;
                if (!std::isfinite(change)) {
                    break;
                }
                if (change < coupling.tolerance) {
                    info.kcl_residual = solve_refined(sys.lu, sys.A_ld, r, dx, N);
                    x_new = s.x + dx;
                    u = lag_update(x_new, s.lag);
                    converged = true;
                    break;
                }
                const double w = change > prev_change ? 0.5 : 1.0;
                for (std::size_t k = 0; k < guess.size(); ++k) {
                    guess[k] += w * (u_new[k] - guess[k]);
                }
                prev_change = change;
                x_iter = x_new;
            }
            if (!converged) {
                std::ostringstream msg;
                msg << "electro-optic iteration did not settle at t = " << t << " s (last change "
                    << info.voltage_change << " V)";
                throw StepConvergenceError(msg.str(), t, info.voltage_change);
            }
        }
        if (!x_new.allFinite()) {
            throw StepConvergenceError("non-finite circuit state at t = " + std::to_string(t), t,
                                       std::numeric_limits<double>::infinity());
        }
        eval_optics(post_tr, t, u, &s, m);

        if (method == Method::Trapezoidal) {
            for (std::size_t k = 0; k < caps.size(); ++k) {
                const auto& c = caps[k];
                const double dv = (v_of(x_new, c.a) - v_of(x_new, c.b)) - (v_of(s.x, c.a) - v_of(s.x, c.b));
                s.cap_current[k] = trap ? cap_g(c.c, true) * dv - s.cap_current[k] : cap_g(c.c, false) * dv;
            }
        }
        s.x = std::move(x_new);
        s.lag = std::move(u);
        s.step = m;
        s.time = t;
        push_delays(s, m);
        return info;
    }

    SimState blank_state() const {
        SimState s;
        s.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        s.cap_current.assign(caps.size(), 0.0);
        s.lag.assign(mods.size(), 0.0);
        s.delay_buffers.resize(delay_depth.size());
        for (std::size_t d = 0; d < delay_depth.size(); ++d) {
            s.delay_buffers[d].assign(static_cast<std::size_t>(delay_depth[d]), optics::WdmBus{});
        }
        return s;
    }

    SimState zero_state() {
        SimState s = blank_state();
        // pre_tr is closed under upstream dependencies, so pre then post is a valid order.
        eval_optics(pre_tr, 0.0, s.lag, &s, 0);
        eval_optics(post_tr, 0.0, s.lag, &s, 0);
        update_pd_currents();
        push_delays(s, 0);
        return s;
    }

    Eigen::VectorXd solve_dc(double& kcl) {
        VecL z = source_rhs(0.0, nullptr, false);
        add_pd(z);
        Eigen::VectorXd x;
        kcl = solve_refined(lu_dc, A_dc_ld, z, x, N);
        return x;
    }

    std::vector<double> dc_map(const std::vector<double>& u, Eigen::VectorXd& x) {
        eval_optics(pre_dc, 0.0, u, nullptr, 0);
        update_pd_currents();
        double kcl = 0.0;
        x = solve_dc(kcl);
        std::vector<double> out(mods.size());
        for (std::size_t m = 0; m < mods.size(); ++m) {
            out[m] = vmod_of(x, m);
        }
        return out;
    }

    SimState dc_operating_point(const DcOptions& opts, DcInfo* info) {
        if (dc_cyclic) {
            throw DcConvergenceError("optical loop through delay lines has no quasi-static DC solution; start from "
                                     "the zero state",
                                     std::numeric_limits<double>::infinity());
        }
        const std::size_t M = mods.size();
        std::vector<double> u(M, 0.0);
        if (!opts.vmod_guess.empty()) {
            if (opts.vmod_guess.size() != M) {
                throw InvalidInputError("vmod_guess has the wrong size");
            }
            u = opts.vmod_guess;
        }
        Eigen::VectorXd x;
        DcInfo local;
        if (decoupled_dc || M == 0) {
            u = dc_map(u, x);
            local.iterations = 1;
        } else {
            auto residual = [&](const std::vector<double>& uu, Eigen::VectorXd& xx, Eigen::VectorXd& f) {
                const auto g = dc_map(uu, xx);
                f.resize(static_cast<Eigen::Index>(M));
                for (std::size_t k = 0; k < M; ++k) {
                    f[static_cast<Eigen::Index>(k)] = g[k] - uu[k];
                }
                return f.cwiseAbs().maxCoeff();
            };
            // Damped Newton from one start; false when it stalls or runs out of iterations.
            auto newton = [&](std::vector<double>& uu, int& it, double& norm) -> bool {
                Eigen::VectorXd f;
                norm = residual(uu, x, f);
                while (norm > opts.tolerance) {
                    if (++it > opts.max_iterations || !std::isfinite(norm)) {
                        return false;
                    }
                    Eigen::MatrixXd J(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
                    for (std::size_t k = 0; k < M; ++k) {
                        const double h = 1e-6 * std::max(1.0, std::abs(uu[k]));
                        auto up = uu;
                        up[k] += h;
                        Eigen::VectorXd xp, fp;
                        residual(up, xp, fp);
                        J.col(static_cast<Eigen::Index>(k)) = (fp - f) / h;
                    }
                    Eigen::VectorXd delta = J.partialPivLu().solve(-f);
                    // Near unity loop gain J is almost singular; cap the step at a fraction of a volt.
                    const double step = delta.cwiseAbs().maxCoeff();
                    if (!std::isfinite(step)) {
                        delta = -f;
                    } else if (step > opts.max_step) {
                        delta *= opts.max_step / step;
                    }
                    double lambda = 1.0;
                    bool improved = false;
                    for (int ls = 0; ls < 30; ++ls) {
                        std::vector<double> trial(M);
                        for (std::size_t k = 0; k < M; ++k) {
                            trial[k] = uu[k] + lambda * delta[static_cast<Eigen::Index>(k)];
                        }
                        Eigen::VectorXd xt, ft;
                        double nt;
                        try {
                            nt = residual(trial, xt, ft);
                        } catch (const InvalidParamsError&) {
                            nt = std::numeric_limits<double>::infinity();  // trial left the device models
                        }
                        // Newton directions descend the 2-norm, not the max-norm.
                        if (std::isfinite(nt) && ft.squaredNorm() < f.squaredNorm()) {
                            uu = trial;
                            x = xt;
                            f = ft;
                            norm = nt;
                            improved = true;
                            break;
                        }
                        lambda *= 0.5;
                    }
                    if (!improved) {
                        return false;
                    }
                }
                return true;
            };
            // Starts: the guess (or one pass of the map from zero), then a few uniform voltages.
            // Closed loops can hold local minima of |F| where the Jacobian is singular.
            std::vector<std::vector<double>> starts;
            starts.push_back(opts.vmod_guess.empty() ? dc_map(u, x) : u);
            for (double v : {0.0, 0.5, -0.5, 1.0}) {
                starts.emplace_back(M, v);
            }
            int it = 0;
            double norm = std::numeric_limits<double>::infinity(), best = norm;
            bool ok = false;
            for (auto& start : starts) {
                it = 0;
                ok = newton(start, it, norm);
                best = std::min(best, norm);
                if (ok) {
                    u = start;
                    break;
                }
            }
            if (!ok) {
                throw DcConvergenceError("operating point did not converge (best residual " + std::to_string(best) +
                                             " V)",
                                         best);
            }
            local.iterations = it + 1;
            local.residual = norm;
            // Leave x and photocurrents consistent with the accepted u.
            dc_map(u, x);
        }
        eval_optics(post_dc, 0.0, u, nullptr, 0);

        SimState s = blank_state();
        s.x = x;
        s.lag = u;
        for (std::size_t d = 0; d < delay_depth.size(); ++d) {
            const auto& c = comps[static_cast<std::size_t>(delay_comp[d])];
            for (auto& slot : s.delay_buffers[d]) {
                slot = bus_in(c.in[0]);
            }
        }
        if (info) {
            *info = local;
        }
        return s;
    }
};

Circuit::Circuit(Netlist netlist, double dt, Method method)
    : impl_(std::make_unique<Impl>(std::move(netlist), dt, method)) {}
Circuit::~Circuit() = default;
Circuit::Circuit(Circuit&&) noexcept = default;
Circuit& Circuit::operator=(Circuit&&) noexcept = default;

const Netlist& Circuit::netlist() const noexcept { return impl_->nl; }
double Circuit::dt() const noexcept { return impl_->dt; }
Method Circuit::method() const noexcept { return impl_->method; }
std::size_t Circuit::system_size() const noexcept { return impl_->n; }
std::size_t Circuit::node_count() const noexcept { return impl_->N; }
std::size_t Circuit::inductor_count() const noexcept { return impl_->L; }
std::size_t Circuit::vsource_count() const noexcept { return impl_->S; }
const std::vector<std::string>& Circuit::modulator_ids() const noexcept { return impl_->mod_ids; }
bool Circuit::decoupled() const noexcept { return impl_->decoupled_tr; }
CouplingOptions& Circuit::coupling() noexcept { return impl_->coupling; }
std::size_t Circuit::extrapolation_events() const noexcept { return impl_->extrapolations; }

std::optional<std::size_t> Circuit::node_index(const std::string& node) const {
    auto it = impl_->node_of.find(node);
    if (it == impl_->node_of.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it->second);
}

SimState Circuit::zero_state() { return impl_->zero_state(); }

SimState Circuit::dc_operating_point(const DcOptions& opts, DcInfo* info) {
    return impl_->dc_operating_point(opts, info);
}

StepInfo Circuit::step(SimState& state) { return impl_->step(state); }

double Circuit::voltage(const SimState& s, const std::string& node) const {
    if (is_ground(node)) {
        return 0.0;
    }
    auto it = impl_->node_of.find(node);
    if (it == impl_->node_of.end()) {
        throw InvalidInputError("unknown node '" + node + "'");
    }
    return s.x[it->second];
}

double Circuit::vmod(const SimState& s, const std::string& modulator) const {
    auto it = impl_->by_id.find(modulator);
    if (it == impl_->by_id.end() || it->second.first != 'M') {
        throw InvalidInputError("unknown pn_modulator '" + modulator + "'");
    }
    return impl_->vmod_of(s.x, it->second.second);
}

double Circuit::current(const SimState& s, const std::string& element) const {
    auto it = impl_->by_id.find(element);
    if (it == impl_->by_id.end()) {
        throw InvalidInputError("no current for element '" + element + "'");
    }
    const auto [cat, idx] = it->second;
    const auto& I = *impl_;
    switch (cat) {
        case 'R': {
            const auto& r = I.res[idx];
            return (Impl::v_of(s.x, r.a) - Impl::v_of(s.x, r.b)) * r.g;
        }
        case 'L':
            return s.x[static_cast<Eigen::Index>(I.N + idx)];
        case 'V':
            return -s.x[static_cast<Eigen::Index>(I.N + I.L + idx)];
        case 'I':
            return I.isrcs[idx].w(s.time);
        case 'P':
            return I.pd_current[idx];
        default:
            throw InvalidInputError("no current for element '" + element + "'");
    }
}

const optics::WdmBus& Circuit::net(const std::string& name) const {
    auto it = impl_->net_of.find(name);
    if (it == impl_->net_of.end()) {
        throw InvalidInputError("unknown optical net '" + name + "'");
    }
    return impl_->buses[static_cast<std::size_t>(it->second)];
}

std::vector<std::string> Circuit::probe_names() const {
    std::vector<std::string> out;
    for (const auto& p : impl_->nl.probes) {
        out.push_back(p.name);
    }
    return out;
}

std::vector<double> Circuit::probe_values(const SimState& s) const {
    std::vector<double> out;
    out.reserve(impl_->nl.probes.size());
    for (const auto& p : impl_->nl.probes) {
        switch (p.kind) {
            case Probe::Kind::Voltage:
                out.push_back(voltage(s, p.target) - (p.ref.empty() ? 0.0 : voltage(s, p.ref)));
                break;
            case Probe::Kind::Vmod:
                out.push_back(vmod(s, p.target));
                break;
            case Probe::Kind::Current:
                out.push_back(current(s, p.target));
                break;
            case Probe::Kind::OpticalPower: {
                const auto& b = net(p.target);
                out.push_back(p.wavelength ? b.channel_power(*p.wavelength) : b.total_power());
                break;
            }
        }
    }
    return out;
}

void Circuit::set_heater_current(const std::string& ring, Waveform current) {
    current.validate();
    auto& r = impl_->nl.get<Mrr>(ring);
    if (r.params.shifter_kind != optics::ShifterKind::Heater) {
        throw InvalidInputError("ring '" + ring + "' has no heater");
    }
    r.heater_current = std::move(current);
}

void Circuit::set_laser(const std::string& laser, double wavelength, double power) {
    if (!(wavelength > 0.0) || !(power >= 0.0)) {
        throw InvalidInputError("laser wavelength must be > 0 and power >= 0");
    }
    auto& l = impl_->nl.get<Laser>(laser);
    l.wavelength = wavelength;
    l.power = power;
}

void Circuit::set_source(const std::string& source, Waveform value) {
    value.validate();
    auto it = impl_->by_id.find(source);
    if (it != impl_->by_id.end() && it->second.first == 'V') {
        impl_->vsrcs[it->second.second].w = value;
        impl_->nl.get<VoltageSource>(source).value = std::move(value);
    } else if (it != impl_->by_id.end() && it->second.first == 'I') {
        impl_->isrcs[it->second.second].w = value;
        impl_->nl.get<CurrentSource>(source).value = std::move(value);
    } else {
        throw InvalidInputError("no independent source '" + source + "'");
    }
}

CosimResult cosimulate(const Netlist& netlist, double duration, double dt, Method method, const CosimOptions& opts) {
    if (!(duration > 0.0)) {
        throw InvalidInputError("duration must be > 0");
    }
    if (opts.record_interval < 1) {
        throw InvalidInputError("record_interval must be >= 1");
    }
    Circuit c(netlist, dt, method);
    CosimResult result;
    SimState state;
    if (opts.initial) {
        state = *opts.initial;
    } else if (opts.dc_init) {
        try {
            DcInfo info;
            state = c.dc_operating_point(opts.dc, &info);
            result.summary.dc_iterations = info.iterations;
        } catch (const DcConvergenceError& e) {
            if (!opts.fallback_to_zero) {
                throw;
            }
            result.summary.dc_converged = false;
            result.summary.warnings.push_back(std::string("DC operating point failed, starting from zero state: ") +
                                              e.what());
            state = c.zero_state();
        }
    } else {
        state = c.zero_state();
    }

    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    result.trace = Trace(c.probe_names());
    result.trace.reserve(steps / opts.record_interval + 2);
    result.trace.append(state.time, c.probe_values(state));
    for (std::size_t k = 0; k < steps; ++k) {
        StepInfo info;
        try {
            info = c.step(state);
        } catch (const StepConvergenceError&) {
            throw;
        }
        result.summary.total_iterations += static_cast<std::size_t>(info.iterations);
        result.summary.max_iterations = std::max(result.summary.max_iterations, info.iterations);
        result.summary.max_kcl_residual = std::max(result.summary.max_kcl_residual, info.kcl_residual);
        if ((k + 1) % opts.record_interval == 0) {
            result.trace.append(state.time, c.probe_values(state));
        }
    }
    result.summary.steps = steps;
    if (c.extrapolation_events() > 0) {
        result.summary.warnings.push_back("modulator voltage left the fitted window in " +
                                          std::to_string(c.extrapolation_events()) + " optics evaluations");
    }
    result.summary.collect_stats(result.trace);
    result.final_state = std::move(state);
    return result;
}

CosimResult cosimulate(const Netlist& netlist) {
    CosimOptions opts;
    opts.record_interval = netlist.sim.record_interval;
    opts.dc_init = netlist.sim.dc_init;
    return cosimulate(netlist, netlist.sim.duration, netlist.sim.dt, netlist.sim.method, opts);
}

}  // namespace pnsim::circuit
