#include "s2l/illum.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "s2l/error.hpp"
#include "s2l/refine.hpp"
#include "s2l/rng.hpp"

namespace s2l::illum {
namespace {

constexpr double kNmToM = 1e-9;
// exp() leaves the normal double range beyond roughly +-708.
constexpr double kMaxExponent = 700.0;

double checked_exp(double exponent, const char* what, int channel) {
    if (!std::isfinite(exponent) || std::abs(exponent) > kMaxExponent) {
        std::ostringstream msg;
        msg << what << " exponent " << exponent << " for channel " << channel << " is outside the representable range";
        throw NumericError(msg.str());
    }
    return std::exp(exponent);
}

double channel_exponent(double wavelength_nm, double temperature_k, const RadiationConstants& constants) {
    return -constants.k2() / (wavelength_nm * kNmToM * temperature_k);
}

double channel_spectral_term(const ChromaticityParams& p, int i) {
    const auto idx = static_cast<std::size_t>(i);
    return p.delta_amplitude[idx] * std::pow(p.wavelength_nm[idx] * kNmToM, -5.0) * p.reflectance[idx];
}

}  // namespace

void ChromaticityParams::validate(bool check_bands) const {
    for (int i = 0; i < 3; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        for (double v : {wavelength_nm[idx], reflectance[idx], delta_amplitude[idx]}) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("chromaticity parameters must be positive and finite");
        }
        if (check_bands) {
            const auto& band = kChannelBandsNm[idx];
            if (wavelength_nm[idx] < band[0] || wavelength_nm[idx] > band[1]) {
                std::ostringstream msg;
                msg << "wavelength " << wavelength_nm[idx] << " nm for channel " << i << " outside [" << band[0]
                    << ", " << band[1] << "] nm";
                throw ArgumentError(msg.str());
            }
        }
    }
    if (!(temperature_k > 0.0) || !std::isfinite(temperature_k)) throw ArgumentError("temperature must be positive");
}

Vec3 chromaticity(const ChromaticityParams& params, const RadiationConstants& constants, bool check_bands) {
    params.validate(check_bands);
    Vec3 spectral{};
    Vec3 radiance{};
    double exponent_sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        spectral[idx] = channel_spectral_term(params, i);
        const double e = channel_exponent(params.wavelength_nm[idx], params.temperature_k, constants);
        radiance[idx] = checked_exp(e, "Wien", i);
        exponent_sum += e;
    }
    const double geo_spectral = std::cbrt(spectral[0] * spectral[1] * spectral[2]);
    const double geo_radiance = checked_exp(exponent_sum / 3.0, "Wien mean", -1);
    Vec3 c{};
    for (std::size_t i = 0; i < 3; ++i) {
        c[i] = (spectral[i] * radiance[i]) / (geo_spectral * geo_radiance);
        if (!std::isfinite(c[i]) || !(c[i] > 0.0)) throw NumericError("chromaticity is not finite and positive");
    }
    return c;
}

Vec3 dependent_part(const Vec3& wavelength_nm, double temperature_k, const RadiationConstants& constants) {
    if (!(temperature_k > 0.0)) throw ArgumentError("temperature must be positive");
    Vec3 e{};
    for (std::size_t i = 0; i < 3; ++i) e[i] = channel_exponent(wavelength_nm[i], temperature_k, constants);
    const double mean = (e[0] + e[1] + e[2]) / 3.0;
    Vec3 b{};
    for (std::size_t i = 0; i < 3; ++i) b[i] = checked_exp(e[i] - mean, "Wien ratio", static_cast<int>(i));
    return b;
}

Decomposition decompose(const ChromaticityParams& params, const RadiationConstants& constants, bool check_bands) {
    params.validate(check_bands);
    // Robust factor in log space: log a_i - mean_j log a_j.
    Vec3 log_terms{};
    for (int i = 0; i < 3; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        log_terms[idx] = std::log(params.delta_amplitude[idx]) - 5.0 * std::log(params.wavelength_nm[idx] * kNmToM) +
                         std::log(params.reflectance[idx]);
    }
    const double mean_log = (log_terms[0] + log_terms[1] + log_terms[2]) / 3.0;
    Decomposition d{};
    for (std::size_t i = 0; i < 3; ++i) d.robust[i] = std::exp(log_terms[i] - mean_log);
    d.dependent = dependent_part(params.wavelength_nm, params.temperature_k, constants);
    return d;
}

void KernelInitSpec::validate() const {
    if (shape.empty()) throw ArgumentError("kernel shape is empty");
    for (auto s : shape) {
        if (s == 0) throw ArgumentError("kernel shape entries must be positive");
    }
    if (channel_axis >= shape.size() || shape[channel_axis] != 3) {
        throw ArgumentError("kernel channel axis must exist and have extent 3");
    }
    if (!(t_std_k >= 0.0) || !(t_mean_k > 0.0)) throw ArgumentError("need T_mean > 0 and T_std >= 0");
}

std::size_t channel_of(const KernelInitSpec& spec, std::size_t flat_index) {
    std::size_t inner = 1;
    for (std::size_t a = spec.channel_axis + 1; a < spec.shape.size(); ++a) inner *= spec.shape[a];
    return (flat_index / inner) % 3;
}

Kernel init_kernel(const KernelInitSpec& spec, const ChromaticityParams& base, const RadiationConstants& constants) {
    spec.validate();
    const auto robust = decompose(base, constants).robust;
    const std::size_t total = std::accumulate(spec.shape.begin(), spec.shape.end(), std::size_t{1}, std::multiplies<>());

    constexpr int kMaxRedraws = 100;
    Kernel k{spec.shape, std::vector<double>(total)};
    for (std::size_t i = 0; i < total; ++i) {
        SplitMix64 rng(stream_seed(spec.seed, i));
        double t = spec.t_mean_k;
        if (spec.t_std_k > 0.0) {
            int tries = 0;
            do {
                if (++tries > kMaxRedraws) {
                    throw NumericError("could not draw a positive temperature in " + std::to_string(kMaxRedraws) +
                                       " attempts");
                }
                t = rng.normal(spec.t_mean_k, spec.t_std_k);
            } while (!(t > 0.0));
        }
        const std::size_t ch = channel_of(spec, i);
        k.values[i] = robust[ch] * dependent_part(base.wavelength_nm, t, constants)[ch];
    }
    return k;
}

void export_kernel(const Kernel& kernel, const std::filesystem::path& path) {
    if (kernel.shape.empty()) throw ArgumentError("kernel has no shape");
    refine::FloatMatrixFile f;
    f.dim = static_cast<std::uint32_t>(kernel.shape.back());
    f.n = static_cast<std::uint32_t>(kernel.values.size() / kernel.shape.back());
    for (auto s : kernel.shape) f.shape.push_back(static_cast<std::uint32_t>(s));
    f.values.reserve(kernel.values.size());
    for (double v : kernel.values) {
        if (!std::isfinite(v)) throw NumericError("kernel contains non-finite values");
        f.values.push_back(static_cast<float>(v));
    }
    refine::write_float_matrix(path, f);
}

}  // namespace s2l::illum
