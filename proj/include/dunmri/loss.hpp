#pragma once

#include "dunmri/mri.hpp"

namespace dunmri {

/// Rules for splitting a measurement into a child that keeps the calibration
/// center plus a rho-fraction of the remaining sampled lines.
struct PartitionSpec {
    double rho = 0.5;  // retained fraction of non-center lines, in [0.2, 0.8]
    uint64_t seed = 0;
    bool keep_center = true;
};

KSpaceData partition(const KSpaceData& parent, const PartitionSpec& spec);

struct LossWeights {
    double lambda = 10.0;  // mixing weight of the held-back reconstruction
    double eta = 1.0;      // plain data-fidelity regularization weight
    double beta = 10.0;    // k-space vs image balance in the total

    void validate() const;
};

/// mean over all entries of |a - b| for complex tensors of equal shape ({1}).
Tensor l1_kspace(const Tensor& a, const Tensor& b);

/// Differentiable SSIM between real [H,W] images: 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, valid-mode sliding window, mean map.
/// Built from taped ops so it can sit inside a loss; agrees with the plain
/// metrics implementation to roundoff.
Tensor ssim_flow(const Tensor& a, const Tensor& b, double range);

// The four loss terms. x_p is the reconstruction from the partitioned input
// (gradients flow through it); x_rec is the full-input reconstruction and
// only enters through a stop-gradient. All terms are measured against the
// parent data: the full sampled k-space and its mask.
Tensor loss_k_rev(const Tensor& x_p, const Tensor& x_rec, const KSpaceData& parent,
                  double lambda);
Tensor loss_k_reg(const Tensor& x_p, const KSpaceData& parent);
Tensor loss_img_rev(const Tensor& x_p, const Tensor& x_rec, const KSpaceData& parent,
                    double lambda);
Tensor loss_img_reg(const Tensor& x_p, const KSpaceData& parent);

struct LossBreakdown {
    Tensor total;  // L_d as a {1} tensor (on the tape when the inputs are)
    double k_rev = 0, k_reg = 0, img_rev = 0, img_reg = 0;
    double k_total = 0, img_total = 0, value = 0;
};

/// L_k = k_rev + eta*k_reg; L_img = img_rev + eta*img_reg;
/// L_d = L_img + beta*L_k.
LossBreakdown loss_total(const Tensor& x_p, const Tensor& x_rec,
                         const KSpaceData& parent, const LossWeights& w);

}  // namespace dunmri
