#include "pnsim/optics.hpp"

#include "pnsim/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pnsim::optics {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw InvalidInputError(std::string("non-finite ") + what);
    }
}

// Round-trip and half-ring propagation factors for one wavelength.
struct RingFactors {
    Complex half;   // field factor over half the circumference
    double t_in;
    double t_drop;
    double k_in;
    double k_drop;
    double loss_in;    // amplitude factor of coupler excess loss
    double loss_drop;
};

RingFactors ring_factors(const MrrParams& p, double wavelength, IndexShift dn) {
    const double beta = kTwoPi / wavelength;
    const Complex index{p.waveguide.n0 + dn.real(), p.waveguide.alpha0 + dn.imag()};
    const double half_len = 0.5 * p.waveguide.length;
    RingFactors f;
    f.half = std::exp(kI * beta * index * half_len);
    f.t_in = p.coupler_in.t();
    f.t_drop = p.coupler_drop.t();
    f.k_in = p.coupler_in.k;
    f.k_drop = p.coupler_drop.k;
    f.loss_in = std::sqrt(p.coupler_in.excess_loss);
    f.loss_drop = std::sqrt(p.coupler_drop.excess_loss);
    return f;
}

}  // namespace

OpticalField OpticalField::from_power(double power_w, double lambda, double phase) {
    if (power_w < 0.0) {
        throw InvalidInputError("optical power must be non-negative");
    }
    const double a = std::sqrt(power_w);
    return {a * std::cos(phase), a * std::sin(phase), lambda};
}

bool OpticalField::finite() const noexcept {
    return std::isfinite(e_real) && std::isfinite(e_imag) && std::isfinite(wavelength);
}

bool same_wavelength(double a, double b, double tol) noexcept { return std::abs(a - b) <= tol; }

WdmBus::WdmBus(std::initializer_list<OpticalField> fields) {
    for (const auto& f : fields) {
        add(f);
    }
}

void WdmBus::add(const OpticalField& field) {
    if (!(field.wavelength > 0.0)) {
        throw InvalidInputError("channel wavelength must be positive");
    }
    if (find(field.wavelength)) {
        throw ChannelMismatchError("duplicate channel wavelength " + std::to_string(field.wavelength));
    }
    channels_.push_back(field);
}

void WdmBus::accumulate(const OpticalField& field) {
    if (auto idx = find(field.wavelength)) {
        auto& ch = channels_[*idx];
        ch.e_real += field.e_real;
        ch.e_imag += field.e_imag;
        return;
    }
    channels_.push_back(field);
}

std::optional<std::size_t> WdmBus::find(double wavelength) const noexcept {
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (same_wavelength(channels_[i].wavelength, wavelength, tolerance_)) {
            return i;
        }
    }
    return std::nullopt;
}

double WdmBus::channel_power(double wavelength) const noexcept {
    auto idx = find(wavelength);
    return idx ? channels_[*idx].power() : 0.0;
}

double WdmBus::total_power() const noexcept {
    double p = 0.0;
    for (const auto& ch : channels_) {
        p += ch.power();
    }
    return p;
}

bool WdmBus::operator==(const WdmBus& other) const {
    if (channels_.size() != other.channels_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        const auto& a = channels_[i];
        const auto& b = other.channels_[i];
        if (a.e_real != b.e_real || a.e_imag != b.e_imag || a.wavelength != b.wavelength) {
            return false;
        }
    }
    return true;
}

void WaveguideParams::validate() const {
    require_finite(n0, "waveguide n0");
    require_finite(alpha0, "waveguide alpha0");
    require_finite(length, "waveguide length");
    if (length < 0.0) {
        throw InvalidParamsError("waveguide length must be >= 0");
    }
    if (alpha0 < 0.0) {
        throw InvalidParamsError("waveguide alpha0 must be >= 0");
    }
}

double CouplerParams::t() const noexcept { return std::sqrt(std::max(0.0, 1.0 - k * k)); }

void CouplerParams::validate() const {
    require_finite(k, "coupling coefficient");
    if (k < 0.0 || k > 1.0) {
        throw InvalidParamsError("coupling coefficient must lie in [0, 1]");
    }
    if (!(excess_loss > 0.0) || excess_loss > 1.0) {
        throw InvalidParamsError("coupler excess loss must lie in (0, 1]");
    }
}

MrrParams MrrParams::make(double radius, double k_in, double k_drop, double n0, double alpha0, ShifterKind kind) {
    MrrParams p;
    p.radius = radius;
    p.coupler_in = CouplerParams{k_in};
    p.coupler_drop = CouplerParams{k_drop};
    p.waveguide = WaveguideParams{n0, alpha0, kTwoPi * radius};
    p.shifter_kind = kind;
    return p;
}

double MrrParams::circumference() const noexcept { return kTwoPi * radius; }

void MrrParams::validate() const {
    require_finite(radius, "ring radius");
    if (!(radius > 0.0)) {
        throw InvalidParamsError("ring radius must be > 0");
    }
    coupler_in.validate();
    coupler_drop.validate();
    waveguide.validate();
    if (std::abs(waveguide.length - circumference()) > 1e-9 * circumference()) {
        throw InvalidParamsError("ring waveguide length must equal 2*pi*radius");
    }
}

double alpha_for_round_trip_loss(double db_per_round_trip, double radius, double wavelength) {
    const double amplitude = std::pow(10.0, -db_per_round_trip / 20.0);
    return -std::log(amplitude) * wavelength / (kTwoPi * kTwoPi * radius);
}

OpticalField propagate_waveguide(const OpticalField& field, const WaveguideParams& params, IndexShift delta_n) {
    if (!field.finite()) {
        throw InvalidInputError("non-finite optical field");
    }
    params.validate();
    require_finite(delta_n.real(), "index shift");
    require_finite(delta_n.imag(), "index shift");
    const double beta = kTwoPi / field.wavelength;
    const double gain = std::exp(-beta * (params.alpha0 + delta_n.imag()) * params.length);
    const double phase = std::fmod(beta * (params.n0 + delta_n.real()) * params.length, kTwoPi);
    // Polar form: scale magnitude, advance phase.
    const Complex out = field.amplitude() * std::polar(gain, phase);
    return {out, field.wavelength};
}

std::pair<OpticalField, OpticalField> couple(const OpticalField& in1, const OpticalField& in2,
                                             const CouplerParams& params) {
    if (!same_wavelength(in1.wavelength, in2.wavelength)) {
        throw ChannelMismatchError("coupler inputs carry different wavelengths");
    }
    params.validate();
    const double t = params.t();
    const double loss = std::sqrt(params.excess_loss);
    const Complex e1 = in1.amplitude();
    const Complex e2 = in2.amplitude();
    const Complex o1 = loss * (t * e1 - kI * params.k * e2);
    const Complex o2 = loss * (-kI * params.k * e1 + t * e2);
    return {OpticalField{o1, in1.wavelength}, OpticalField{o2, in1.wavelength}};
}

namespace {

// Closed-form add-drop solution. Ring fields b1 (leaving the input coupler) and b2 (leaving the
// drop coupler) satisfy b1 = -i k1 E_in + t1 h b2 and b2 = -i k2 E_add + t2 h b1, where h is the
// half-ring propagation factor.
std::pair<Complex, Complex> add_drop(Complex e_in, Complex e_add, const RingFactors& f) {
    const double l1 = f.loss_in;
    const double l2 = f.loss_drop;
    const Complex c1 = l1 * f.t_in;
    const Complex c2 = l2 * f.t_drop;
    const Complex x1 = -kI * l1 * f.k_in;
    const Complex x2 = -kI * l2 * f.k_drop;
    const Complex h = f.half;
    const Complex denom = 1.0 - c1 * c2 * h * h;
    const Complex b1 = (x1 * e_in + c1 * h * x2 * e_add) / denom;
    const Complex b2 = (x2 * e_add + c2 * h * x1 * e_in) / denom;
    const Complex thru = c1 * e_in + x1 * h * b2;
    const Complex drop = c2 * e_add + x2 * h * b1;
    return {thru, drop};
}

void check_ring_gain(const RingFactors& f) {
    const double loop = f.loss_in * f.t_in * f.loss_drop * f.t_drop * std::norm(f.half);
    if (!(loop < 1.0) || !std::isfinite(loop)) {
        throw InvalidParamsError("ring round-trip gain |t1 t2 a| >= 1; circulating field diverges");
    }
}

}  // namespace

MrrPorts mrr_transfer(const OpticalField& input, const OpticalField& add, const MrrParams& params,
                      IndexShift delta_n) {
    if (!input.finite() || !add.finite()) {
        throw InvalidInputError("non-finite optical field");
    }
    if (!same_wavelength(input.wavelength, add.wavelength)) {
        throw ChannelMismatchError("ring IN and ADD carry different wavelengths");
    }
    params.validate();
    const RingFactors f = ring_factors(params, input.wavelength, delta_n);
    check_ring_gain(f);
    const auto [thru, drop] = add_drop(input.amplitude(), add.amplitude(), f);
    return {OpticalField{thru, input.wavelength}, OpticalField{drop, input.wavelength}};
}

double round_trip_phase(const MrrParams& params, double wavelength, IndexShift delta_n) {
    return kTwoPi / wavelength * (params.waveguide.n0 + delta_n.real()) * params.waveguide.length;
}

double round_trip_amplitude(const MrrParams& params, double wavelength, IndexShift delta_n) {
    return std::exp(-kTwoPi / wavelength * (params.waveguide.alpha0 + delta_n.imag()) * params.waveguide.length);
}

double resonance_wavelength(const MrrParams& params, double near, IndexShift delta_n) {
    const double optical_length = (params.waveguide.n0 + delta_n.real()) * params.waveguide.length;
    const double order = std::round(optical_length / near);
    if (order < 1.0) {
        throw InvalidParamsError("ring too short for a resonance near the requested wavelength");
    }
    return optical_length / order;
}

double radius_for_resonance(double nominal, double n0, double wavelength, double delta_n) {
    const double n = n0 + delta_n;
    const double order = std::round(kTwoPi * nominal * n / wavelength);
    return order * wavelength / (kTwoPi * n);
}

WdmBus bus_map(const WdmBus& bus, const std::function<OpticalField(const OpticalField&)>& transform) {
    WdmBus out(bus.tolerance());
    for (const auto& ch : bus.channels()) {
        out.add(transform(ch));
    }
    return out;
}

void couple_bus_into(const WdmBus& in1, const WdmBus& in2, const CouplerParams& params, WdmBus& out1,
                     WdmBus& out2) {
    params.validate();
    out1.clear();
    out2.clear();
    const double t = params.t();
    const double loss = std::sqrt(params.excess_loss);
    auto emit = [&](Complex e1, Complex e2, double lambda) {
        out1.channels().emplace_back(loss * (t * e1 - kI * params.k * e2), lambda);
        out2.channels().emplace_back(loss * (-kI * params.k * e1 + t * e2), lambda);
    };
    for (const auto& a : in1.channels()) {
        const auto j = in2.find(a.wavelength);
        emit(a.amplitude(), j ? in2.channels()[*j].amplitude() : Complex{}, a.wavelength);
    }
    for (const auto& b : in2.channels()) {
        if (!in1.find(b.wavelength)) {
            emit(Complex{}, b.amplitude(), b.wavelength);
        }
    }
}

std::pair<WdmBus, WdmBus> couple_bus(const WdmBus& in1, const WdmBus& in2, const CouplerParams& params) {
    WdmBus o1(in1.tolerance());
    WdmBus o2(in1.tolerance());
    couple_bus_into(in1, in2, params, o1, o2);
    return {std::move(o1), std::move(o2)};
}

void mrr_bus_into(const WdmBus& input, const WdmBus& add, const MrrParams& params, IndexShift delta_n,
                  WdmBus& thru, WdmBus& drop) {
    thru.clear();
    drop.clear();
    auto emit = [&](Complex e_in, Complex e_add, double lambda) {
        const RingFactors f = ring_factors(params, lambda, delta_n);
        check_ring_gain(f);
        const auto [t, d] = add_drop(e_in, e_add, f);
        thru.channels().emplace_back(t, lambda);
        drop.channels().emplace_back(d, lambda);
    };
    for (const auto& a : input.channels()) {
        const auto j = add.empty() ? std::nullopt : add.find(a.wavelength);
        emit(a.amplitude(), j ? add.channels()[*j].amplitude() : Complex{}, a.wavelength);
    }
    for (const auto& b : add.channels()) {
        if (!input.find(b.wavelength)) {
            emit(Complex{}, b.amplitude(), b.wavelength);
        }
    }
}

MrrBusPorts mrr_bus(const WdmBus& input, const WdmBus& add, const MrrParams& params, IndexShift delta_n) {
    params.validate();
    MrrBusPorts out{WdmBus(input.tolerance()), WdmBus(input.tolerance())};
    mrr_bus_into(input, add, params, delta_n, out.thru, out.drop);
    return out;
}

void merge_into(const std::vector<const WdmBus*>& buses, WdmBus& out) {
    out.clear();
    for (const WdmBus* b : buses) {
        for (const auto& ch : b->channels()) {
            out.accumulate(ch);
        }
    }
}

WdmBus merge(const std::vector<const WdmBus*>& buses) {
    WdmBus out;
    merge_into(buses, out);
    return out;
}

}  // namespace pnsim::optics
