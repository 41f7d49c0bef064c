#include <cmath>
#include <random>

#include "unmix/experiments.hpp"

namespace unmix {

namespace {

constexpr double kFirstWavelength = 0.4;  // um
constexpr double kLastWavelength = 2.5;
constexpr double kReflectanceFloor = 0.02;

double bump(double w, double center, double width) {
    const double z = (w - center) / width;
    return std::exp(-0.5 * z * z);
}

double logistic(double w, double center, double width) {
    return 1.0 / (1.0 + std::exp(-(w - center) / width));
}

// Water absorption bands near 1.4, 1.9 and beyond 2.5 um.
double water(double w, double depth) {
    return depth * (0.6 * bump(w, 1.4, 0.05) + bump(w, 1.9, 0.06) + 0.4 * bump(w, 2.7, 0.2));
}

double wavelength(Index band, Index bands) {
    if (bands == 1) return kFirstWavelength;
    return kFirstWavelength + (kLastWavelength - kFirstWavelength) * static_cast<double>(band) /
                                  static_cast<double>(bands - 1);
}

}  // namespace

EndmemberMatrix substitute_library_spectra(Index bands) {
    if (bands < 3) throw DomainError("substitute spectra need at least 3 bands");
    Matrix m(bands, 3);
    for (Index b = 0; b < bands; ++b) {
        const double w = wavelength(b, bands);
        const double concrete = 0.23 + 0.10 * logistic(w, 0.45, 0.05) -
                                0.28 * (w - kFirstWavelength) / 2.1 - 0.3 * water(w, 0.06);
        const double grass = 0.03 + 0.05 * bump(w, 0.55, 0.03) + 0.42 * logistic(w, 0.72, 0.015) -
                             0.2 * logistic(w, 1.35, 0.05) - water(w, 0.12) -
                             0.1 * logistic(w, 1.9, 0.05);
        const double loam = 0.03 + 0.5 * (1.0 - std::exp(-(w - kFirstWavelength) / 0.7)) -
                            0.06 * bump(w, 0.9, 0.12) - water(w, 0.05);
        m(b, 0) = std::max(concrete, kReflectanceFloor);
        m(b, 1) = std::max(grass, kReflectanceFloor);
        m(b, 2) = std::max(loam, kReflectanceFloor);
    }
    return EndmemberMatrix(std::move(m));
}

std::vector<std::string> substitute_library_names() {
    return {"concrete", "grass", "loam"};
}

EndmemberMatrix smooth_random_spectra(Index bands, Index count, std::uint64_t seed) {
    if (count < 1 || bands < count) throw DomainError("need bands >= count >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix m(bands, count);
    for (Index r = 0; r < count; ++r) {
        const double base = 0.05 + 0.25 * unit(rng);
        const int bumps = 4 + static_cast<int>(unit(rng) * 5.0);
        std::vector<double> center(bumps), width(bumps), height(bumps);
        for (int k = 0; k < bumps; ++k) {
            center[k] = kFirstWavelength + (kLastWavelength - kFirstWavelength) * unit(rng);
            width[k] = 0.05 + 0.35 * unit(rng);
            height[k] = -0.1 + 0.4 * unit(rng);
        }
        for (Index b = 0; b < bands; ++b) {
            const double w = wavelength(b, bands);
            double value = base;
            for (int k = 0; k < bumps; ++k) value += height[k] * bump(w, center[k], width[k]);
            m(b, r) = std::clamp(value, 0.01, 1.0);
        }
    }
    return EndmemberMatrix(std::move(m));
}

}  // namespace unmix
