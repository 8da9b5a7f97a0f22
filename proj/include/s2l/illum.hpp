#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace s2l::illum {

using Vec3 = std::array<double, 3>;

/// Physical constants of Wien's approximation. The second radiation constant is
/// derived, never stored.
struct RadiationConstants {
    double planck_js = 6.626e-34;
    double boltzmann_jk = 1.381e-23;
    double light_speed_ms = 3e8;

    /// h * c / k_B in meter-kelvin.
    constexpr double k2() const { return planck_js * light_speed_ms / boltzmann_jk; }
};

/// Skin-color formation inputs for the R, G, B channels.
struct ChromaticityParams {
    Vec3 wavelength_nm{685.0, 532.5, 472.5};
    Vec3 reflectance{1.0, 1.0, 1.0};
    Vec3 delta_amplitude{1.0, 1.0, 1.0};
    double temperature_k = 5000.0;

    /// Throws ArgumentError unless all entries are positive and finite and (when
    /// `check_bands`) each wavelength lies in its channel's band.
    void validate(bool check_bands = true) const;
};

/// Allowed wavelength band (nm) per channel.
inline constexpr std::array<std::array<double, 2>, 3> kChannelBandsNm{{{620.0, 750.0}, {495.0, 570.0}, {450.0, 495.0}}};

struct Decomposition {
    Vec3 robust;      ///< temperature-independent factor
    Vec3 dependent;   ///< color-temperature factor
};

/// Normalized chromaticity evaluated straight from the formation equation
/// (ratio of the channel term to the geometric mean of all three).
/// Throws NumericError when an exponential term under/overflows.
Vec3 chromaticity(const ChromaticityParams& params, const RadiationConstants& constants = {},
                  bool check_bands = true);

/// Splits chromaticity into its illumination-robust and illumination-dependent factors.
Decomposition decompose(const ChromaticityParams& params, const RadiationConstants& constants = {},
                        bool check_bands = true);

/// Temperature-dependent factor alone, for a given temperature.
Vec3 dependent_part(const Vec3& wavelength_nm, double temperature_k, const RadiationConstants& constants = {});

struct KernelInitSpec {
    std::vector<std::size_t> shape{3};
    /// Axis whose index selects the R/G/B channel; its extent must be 3.
    std::size_t channel_axis = 0;
    double t_mean_k = 5000.0;
    double t_std_k = 500.0;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Dense row-major tensor.
struct Kernel {
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

/// Constant robust factor times a per-element temperature-dependent factor whose
/// temperature is drawn from a positive-truncated normal. Each element draws from
/// its own counter-derived stream, so evaluation order does not matter.
Kernel init_kernel(const KernelInitSpec& spec, const ChromaticityParams& base, const RadiationConstants& constants = {});

/// Channel (0..2) of a flat element index under the spec's layout.
std::size_t channel_of(const KernelInitSpec& spec, std::size_t flat_index);

/// Writes the kernel as a float32 tensor file (version-2 embedding header).
void export_kernel(const Kernel& kernel, const std::filesystem::path& path);

}  // namespace s2l::illum
