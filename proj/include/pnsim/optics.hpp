#pragma once

// Wavelength-multiplexed optical signals and passive component models.
//
// Fields are slowly varying envelopes in units of sqrt(W), so |E|^2 is the
// optical power of a channel. Propagation through a medium of complex index
// n + i*alpha over a length L multiplies the envelope by
// exp(i * (2*pi/lambda) * (n + i*alpha) * L); the extinction coefficient
// therefore attenuates the amplitude as exp(-(2*pi/lambda) * alpha * L).

#include <complex>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace pnsim::optics {

using Complex = std::complex<double>;

/// Channel-identity tolerance for wavelength comparisons (1 pm).
inline constexpr double kWavelengthTolerance = 1e-12;

/// Complex refractive index perturbation: real part shifts phase, imaginary part adds loss.
using IndexShift = Complex;

struct OpticalField {
    double e_real = 0.0;
    double e_imag = 0.0;
    double wavelength = 1.55e-6;

    OpticalField() = default;
    OpticalField(double re, double im, double lambda) : e_real(re), e_imag(im), wavelength(lambda) {}
    OpticalField(Complex e, double lambda) : e_real(e.real()), e_imag(e.imag()), wavelength(lambda) {}

    static OpticalField from_power(double power_w, double lambda, double phase = 0.0);

    Complex amplitude() const noexcept { return {e_real, e_imag}; }
    double power() const noexcept { return e_real * e_real + e_imag * e_imag; }
    bool finite() const noexcept;
};

bool same_wavelength(double a, double b, double tol = kWavelengthTolerance) noexcept;

/// Ordered set of channels with pairwise distinct wavelengths.
class WdmBus {
public:
    WdmBus() = default;
    explicit WdmBus(double tolerance) : tolerance_(tolerance) {}
    WdmBus(std::initializer_list<OpticalField> fields);

    /// Appends a channel; throws ChannelMismatchError if its wavelength is already present.
    void add(const OpticalField& field);
    /// Adds the field coherently to an existing channel, or appends it.
    void accumulate(const OpticalField& field);

    const std::vector<OpticalField>& channels() const noexcept { return channels_; }
    std::vector<OpticalField>& channels() noexcept { return channels_; }
    std::size_t size() const noexcept { return channels_.size(); }
    bool empty() const noexcept { return channels_.empty(); }
    void clear() noexcept { channels_.clear(); }
    double tolerance() const noexcept { return tolerance_; }

    /// Index of the channel at `wavelength`, if any.
    std::optional<std::size_t> find(double wavelength) const noexcept;
    /// Power of the channel at `wavelength` (0 if absent).
    double channel_power(double wavelength) const noexcept;
    double total_power() const noexcept;

    bool operator==(const WdmBus& other) const;

private:
    std::vector<OpticalField> channels_;
    double tolerance_ = kWavelengthTolerance;
};

struct WaveguideParams {
    double n0 = 2.4;
    double alpha0 = 0.0;
    double length = 0.0;

    void validate() const;
};

struct CouplerParams {
    double k = 0.0;
    /// Power transmission of the coupler body; 1.0 is lossless.
    double excess_loss = 1.0;

    double t() const noexcept;
    void validate() const;
};

enum class ShifterKind { Heater, PnModulator };

struct MrrParams {
    double radius = 8e-6;
    CouplerParams coupler_in{0.3};
    CouplerParams coupler_drop{0.3};
    WaveguideParams waveguide{2.4, 0.0, 0.0};
    ShifterKind shifter_kind = ShifterKind::Heater;

    /// Ring with waveguide length set to the circumference 2*pi*radius.
    static MrrParams make(double radius, double k_in, double k_drop, double n0, double alpha0,
                          ShifterKind kind = ShifterKind::Heater);

    double circumference() const noexcept;
    void validate() const;
};

/// Extinction coefficient giving `db_per_round_trip` of loss for a ring of the given radius.
double alpha_for_round_trip_loss(double db_per_round_trip, double radius, double wavelength);

/// Default ring loss (0.1 dB per round trip for an 8 um ring at 1550 nm).
inline constexpr double kDefaultRingAlpha0 = 5.65e-5;
inline constexpr double kDefaultRingCoupling = 0.3;

OpticalField propagate_waveguide(const OpticalField& field, const WaveguideParams& params,
                                 IndexShift delta_n = {});

std::pair<OpticalField, OpticalField> couple(const OpticalField& in1, const OpticalField& in2,
                                             const CouplerParams& params);

struct MrrPorts {
    OpticalField thru;
    OpticalField drop;
};

/// Steady-state add-drop response.
MrrPorts mrr_transfer(const OpticalField& input, const OpticalField& add, const MrrParams& params,
                      IndexShift delta_n = {});

/// Round-trip phase (2*pi/lambda)*(n0 + dn)*2*pi*R.
double round_trip_phase(const MrrParams& params, double wavelength, IndexShift delta_n = {});
/// Round-trip amplitude exp(-(2*pi/lambda)*(alpha0 + dalpha)*2*pi*R).
double round_trip_amplitude(const MrrParams& params, double wavelength, IndexShift delta_n = {});
/// Resonance wavelength of the ring closest to `near`.
double resonance_wavelength(const MrrParams& params, double near, IndexShift delta_n = {});
/// Radius close to `nominal` whose resonance sits exactly at `wavelength` when the index is
/// perturbed by `delta_n`.
double radius_for_resonance(double nominal, double n0, double wavelength, double delta_n = 0.0);

WdmBus bus_map(const WdmBus& bus, const std::function<OpticalField(const OpticalField&)>& transform);

/// Couples two buses channel by channel; channels missing on one side are treated as dark.
std::pair<WdmBus, WdmBus> couple_bus(const WdmBus& in1, const WdmBus& in2, const CouplerParams& params);

struct MrrBusPorts {
    WdmBus thru;
    WdmBus drop;
};

/// Applies an add-drop ring to every channel of the union of `input` and `add`.
MrrBusPorts mrr_bus(const WdmBus& input, const WdmBus& add, const MrrParams& params,
                    IndexShift delta_n = {});

/// Union of buses; fields of coincident wavelengths add coherently.
WdmBus merge(const std::vector<const WdmBus*>& buses);

// Allocation-free variants used by the transient engine. Outputs are cleared first.
void couple_bus_into(const WdmBus& in1, const WdmBus& in2, const CouplerParams& params, WdmBus& out1,
                     WdmBus& out2);
void mrr_bus_into(const WdmBus& input, const WdmBus& add, const MrrParams& params, IndexShift delta_n,
                  WdmBus& thru, WdmBus& drop);
void merge_into(const std::vector<const WdmBus*>& buses, WdmBus& out);

}  // namespace pnsim::optics
