#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dunmri/cppa.hpp"
#include "dunmri/ops.hpp"

namespace dunmri {

namespace op = ops;

void CppaConfig::validate() const {
    if (tau <= 0.0 || sigma <= 0.0)
        throw std::invalid_argument("step sizes must be positive");
    if (tau * sigma >= 1.0)
        throw std::invalid_argument(
            "step-size certificate failed: tau*sigma = " + std::to_string(tau * sigma) +
            " must be < 1 (the masked normal operator has unit norm)");
    if (theta < 0.0) throw std::invalid_argument("theta must be >= 0");
    if (threshold < 0.0) throw std::invalid_argument("threshold must be >= 0");
    if (tol < 0.0) throw std::invalid_argument("tol must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
}

Tensor update_y(const Tensor& y_k, const Tensor& z_next, const KSpaceData& k_tilde, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("update_y: sigma must be > 0");
    Tensor fz = forward_single(z_next, k_tilde.mask);
    Tensor num = op::add(y_k, op::scale(op::sub(fz, k_tilde.samples), sigma));
    return op::scale(num, 1.0 / (1.0 + sigma));
}

Tensor extrapolate(const Tensor& x_next, const Tensor& x_k, double theta) {
    return op::add(x_next, op::scale(op::sub(x_next, x_k), theta));
}

Tensor prox_soft(const Tensor& x_bar, double tau, double threshold) {
    if (tau <= 0.0) throw std::invalid_argument("prox_soft: tau must be > 0");
    // identity sparsifying transform: the closed form shrinks magnitudes by
    // the threshold level itself
    return op::soft_threshold(x_bar, threshold);
}

namespace {

double norm2(const Tensor& t) {
    double s = 0.0;
    for (double v : t.buffer()) s += v * v;
    return std::sqrt(s);
}

}  // namespace

SolveResult solve_cppa(const KSpaceData& k_tilde, const CppaConfig& cfg,
                       const std::optional<Tensor>& x0) {
    cfg.validate();
    if (k_tilde.coil_count != 1)
        throw std::invalid_argument("classical solver handles single-coil data only, got " +
                                    std::to_string(k_tilde.coil_count) + " coils");
    int h = k_tilde.samples.shape()[1];
    int w = k_tilde.samples.shape()[2];
    Tensor x = x0 ? *x0 : Tensor::zeros({h, w}, Dtype::Complex);
    if (x.shape() != std::vector<int>{h, w} || x.dtype() != Dtype::Complex)
        throw std::invalid_argument("x0 must be a complex [H,W] image matching the data");
    Tensor y = Tensor::zeros({1, h, w}, Dtype::Complex);
    SolveTrace trace;
    for (int it = 0; it < cfg.max_iters; ++it) {
        Tensor x_bar = op::sub(x, op::scale(adjoint_single(y, k_tilde.mask), cfg.tau));
        Tensor x_next = prox_soft(x_bar, cfg.tau, cfg.threshold);
        Tensor z = extrapolate(x_next, x, cfg.theta);
        Tensor y_next = update_y(y, z, k_tilde, cfg.sigma);
        double res = norm2(op::sub(forward_single(x_next, k_tilde.mask), k_tilde.samples));
        double d = norm2(op::sub(x_next, x));
        double dy = norm2(op::sub(y_next, y));
        trace.residual.push_back(res);
        trace.delta.push_back(d);
        x = x_next;
        y = y_next;
        // the very first pass keeps x at x0 while the dual warms up, so the
        // stop test needs both increments small (it > 0 guards pathological
        // single-step stalls of the primal alone)
        if (it > 0 && d <= cfg.tol * std::max(norm2(x), 1e-30) &&
            dy <= cfg.tol * std::max(norm2(y), 1e-30))
            break;
    }
    return SolveResult{x, trace};
}

void save_trace_csv(const SolveTrace& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open trace file for writing: " + path);
    f << "iter,residual,delta\n";
    for (size_t i = 0; i < trace.residual.size(); ++i)
        f << i << ',' << trace.residual[i] << ',' << trace.delta[i] << '\n';
    if (!f) throw std::runtime_error("failed writing trace file: " + path);
}

}  // namespace dunmri
