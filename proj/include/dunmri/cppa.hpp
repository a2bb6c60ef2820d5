#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dunmri/mri.hpp"

namespace dunmri {

/// Primal-dual solver settings. The product tau*sigma must stay below 1:
/// under the unitary FFT the masked normal operator has unit norm, and the
/// proximal reformulation is positive definite only on that side of it.
struct CppaConfig {
    double tau = 0.5;
    double sigma = 0.5;
    double theta = 1.0;
    double threshold = 0.0;  // soft-threshold level; 0 disables the prior
    double tol = 1e-8;       // relative iterate-change stop
    int max_iters = 500;

    void validate() const;
};

struct SolveTrace {
    std::vector<double> residual;  // ||F_m x_k - k~||_2 per iteration
    std::vector<double> delta;     // ||x_k - x_{k-1}||_2 per iteration
};

// One step each of the three update rules. All are tape-aware tensor maps.
Tensor update_y(const Tensor& y_k, const Tensor& z_next, const KSpaceData& k_tilde, double sigma);
Tensor extrapolate(const Tensor& x_next, const Tensor& x_k, double theta);
Tensor prox_soft(const Tensor& x_bar, double tau, double threshold);

struct SolveResult {
    Tensor image;
    SolveTrace trace;
};

/// Run the iteration from x0 (default zero image), y0 = 0.
SolveResult solve_cppa(const KSpaceData& k_tilde, const CppaConfig& cfg,
                       const std::optional<Tensor>& x0 = std::nullopt);

void save_trace_csv(const SolveTrace& trace, const std::string& path);

}  // namespace dunmri
