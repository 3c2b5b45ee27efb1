#pragma once

#include "headsplat/image.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace headsplat {

/// PSNR reported for identical inputs (infinite in theory).
inline constexpr double kPsnrCap = 99.0;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

template <typename T>
double mse(const ImageT<T>& a, const ImageT<T>& b);

/// 10 log10(1 / MSE) for images in [0, 1]; kPsnrCap when MSE is zero.
template <typename T>
double psnr(const ImageT<T>& a, const ImageT<T>& b);

/// Mean SSIM over all fully-covered 11x11 Gaussian windows (sigma 1.5),
/// computed per channel and averaged.
template <typename T>
double ssim(const ImageT<T>& a, const ImageT<T>& b);

template <typename T>
double dssim(const ImageT<T>& a, const ImageT<T>& b) {
    return (1.0 - ssim(a, b)) / 2.0;
}

/// SSIM together with its gradient with respect to `a`.
template <typename T>
double ssim_with_grad(const ImageT<T>& a, const ImageT<T>& b, ImageT<T>& grad_a);

/// PSNR over the pixels where mask != 0 (one entry per pixel).
template <typename T>
double region_psnr(const ImageT<T>& a, const ImageT<T>& b, std::span<const std::uint8_t> mask);

/// Normalised 1-D Gaussian taps of the SSIM window.
std::vector<double> ssim_kernel();

struct EvalEntry {
    std::size_t frame = 0;
    std::size_t view = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double region_psnr = 0.0;
    bool has_region = false;
};

struct EvalReport {
    std::vector<EvalEntry> entries;

    double mean_psnr() const;
    double mean_ssim() const;
    /// Mean over the entries that carry a region value; NaN when none do.
    double mean_region_psnr() const;

    void write_csv(const std::filesystem::path& path) const;
    void write_json(const std::filesystem::path& path) const;
};

} // namespace headsplat
