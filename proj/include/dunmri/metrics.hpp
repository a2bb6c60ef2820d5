#pragma once

#include <string>
#include <vector>

#include "dunmri/tensor.hpp"

namespace dunmri {

/// Peak signal-to-noise ratio in dB over real magnitude images, capped at
/// 99.0 dB (the cap also stands in for the MSE = 0 case).
double psnr(const Tensor& ref, const Tensor& test, double data_range);

/// Mean of the local SSIM map: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, valid-mode windows only.
double ssim(const Tensor& ref, const Tensor& test, double data_range);

/// |ref - test| / range(ref), clamped to [0,1].
Tensor error_map(const Tensor& ref, const Tensor& test);

struct MetricReport {
    std::vector<double> psnr_db;
    std::vector<double> ssim_val;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;
};

/// Per-slice metrics with a shared data range taken as the maximum over all
/// reference slices (per-volume range convention).
MetricReport evaluate_slices(const std::vector<Tensor>& refs, const std::vector<Tensor>& tests);

void save_metrics_csv(const MetricReport& r, const std::string& path);

}  // namespace dunmri
