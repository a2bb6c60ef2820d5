#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dunmri/tensor.hpp"

namespace dunmri {

enum class MaskPattern { Random, Equispaced };

MaskPattern parse_mask_pattern(const std::string& s);
std::string mask_pattern_name(MaskPattern p);

/// Cartesian 1-D phase-encode mask: a set of fully sampled columns replicated
/// down every row. Column indices live in centered-spectrum coordinates
/// (DC at width/2); col_weights() converts to the unshifted FFT layout.
struct SamplingMask {
    int width = 0;
    int acceleration = 0;
    MaskPattern pattern = MaskPattern::Random;
    uint64_t seed = 0;
    int center_count = 0;
    std::vector<int> line_set;  // sorted, centered coordinates

    std::vector<double> col_weights() const;  // length width, 0/1, FFT layout
    bool is_full() const { return static_cast<int>(line_set.size()) == width; }
    bool contains_centered(int col) const;
};

SamplingMask make_mask(int width, int acceleration, MaskPattern pattern, uint64_t seed);
void save_mask(const SamplingMask& m, const std::string& path);
SamplingMask load_mask(const std::string& path);

/// Under-sampled measurements; samples are [C,H,W] complex and exactly zero
/// on unsampled columns. C = 1 for single-coil data.
struct KSpaceData {
    Tensor samples;
    SamplingMask mask;
    int coil_count = 0;
};

// Measurement operators. These are ordinary tape-aware tensor functions, so
// they can sit inside a differentiated graph. Images are [H,W] complex,
// multi-coil k-space and sensitivity maps are [C,H,W] complex.
Tensor forward_single(const Tensor& x, const SamplingMask& m);   // M F x -> [1,H,W]
Tensor adjoint_single(const Tensor& k, const SamplingMask& m);   // F^H M k -> [H,W]
Tensor forward_multi(const Tensor& x, const Tensor& maps, const SamplingMask& m);
Tensor adjoint_multi(const Tensor& k, const Tensor& maps, const SamplingMask& m);

/// Simulate a measurement of image x (maps empty -> single coil).
KSpaceData measure(const Tensor& x, const std::optional<Tensor>& maps, const SamplingMask& m);

/// Calibration estimate: inverse transform of the center-windowed k-space per
/// coil, normalized by root-sum-of-squares. Zero outside the image support.
Tensor estimate_sensitivities(const KSpaceData& k);

/// Smooth synthetic maps for simulation, RSS-normalized everywhere.
Tensor make_synthetic_maps(int coils, int h, int w, uint64_t seed);

enum class PhantomKind { SheppLoganLike, RandomEllipses };
PhantomKind parse_phantom_kind(const std::string& s);
std::string phantom_kind_name(PhantomKind k);

Tensor make_phantom(int h, int w, PhantomKind kind, uint64_t seed, bool smooth_phase = false);

/// Additive complex Gaussian noise on sampled entries only; sigma_n is
/// relative to the mean |k| over sampled entries.
KSpaceData add_kspace_noise(const KSpaceData& k, double sigma_n, uint64_t seed);

}  // namespace dunmri
