#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dunmri/loss.hpp"
#include "dunmri/ops.hpp"
#include "dunmri/rng.hpp"

namespace dunmri {

namespace op = ops;

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

Tensor ssim_kernel() {
    double taps[kWindow];
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        double d = i - (kWindow - 1) / 2.0;
        taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += taps[i];
    }
    std::vector<double> w(kWindow * kWindow);
    for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) w[i * kWindow + j] = (taps[i] / sum) * (taps[j] / sum);
    return Tensor::from_buffer({1, 1, kWindow, kWindow}, Dtype::Real, std::move(w));
}

void require_single_coil(const KSpaceData& d, const char* who) {
    if (d.coil_count != 1 || d.samples.shape().size() != 3 || d.samples.shape()[0] != 1)
        throw std::invalid_argument(std::string(who) + ": expects single-coil data");
}

// (A x_p + lambda * A sg(x_rec)) / (1 + lambda), still [1,H,W] on the parent mask
Tensor mixed_kspace(const Tensor& x_p, const Tensor& x_rec, const KSpaceData& parent,
                    double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    Tensor axp = forward_single(x_p, parent.mask);
    Tensor axr = forward_single(op::stop_gradient(x_rec), parent.mask);
    return op::scale(op::add(axp, op::scale(axr, lambda)), 1.0 / (1.0 + lambda));
}

// |F^H k| as a real [H,W] image
Tensor kspace_image(const Tensor& k) {
    Tensor plane = op::reshape(k, {k.shape()[1], k.shape()[2]});
    return op::magnitude(op::ifft2(plane));
}

double image_range(const Tensor& img) {
    double lo = img.buffer()[0], hi = img.buffer()[0];
    for (double v : img.buffer()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

Tensor one_minus(const Tensor& s) { return op::add_const(op::scale(s, -1.0), 1.0); }

Tensor img_reference(const KSpaceData& parent) { return kspace_image(parent.samples); }

Tensor ssim_loss_against_reference(const Tensor& img, const KSpaceData& parent) {
    Tensor ref = img_reference(parent);
    double range = image_range(ref);
    if (range <= 0.0)
        throw std::invalid_argument("image loss: reference image has zero range");
    return one_minus(ssim_flow(img, ref, range));
}

}  // namespace

KSpaceData partition(const KSpaceData& parent, const PartitionSpec& spec) {
    if (spec.rho < 0.2 || spec.rho > 0.8)
        throw std::invalid_argument("partition rho must lie in [0.2, 0.8], got " +
                                    std::to_string(spec.rho));
    if (parent.mask.line_set.empty())
        throw std::invalid_argument("partition: parent mask is empty");
    int lo = parent.mask.width / 2 - parent.mask.center_count / 2;
    int hi = lo + parent.mask.center_count;  // center block [lo, hi)
    std::vector<int> kept, pool;
    for (int s : parent.mask.line_set) {
        if (spec.keep_center && s >= lo && s < hi) kept.push_back(s);
        else pool.push_back(s);
    }
    auto keep_n = static_cast<size_t>(std::lround(spec.rho * static_cast<double>(pool.size())));
    std::mt19937_64 g(mix_seed({0x706172746974ULL, spec.seed}));
    for (size_t i = 0; i < keep_n; ++i) {
        size_t j = i + g() % (pool.size() - i);
        std::swap(pool[i], pool[j]);
        kept.push_back(pool[i]);
    }
    std::sort(kept.begin(), kept.end());

    KSpaceData child;
    child.mask = parent.mask;
    child.mask.seed = spec.seed;
    child.mask.center_count = spec.keep_center ? parent.mask.center_count : 0;
    child.mask.line_set = std::move(kept);
    child.samples = op::mul_columns(parent.samples, child.mask.col_weights());
    child.coil_count = parent.coil_count;
    return child;
}

void LossWeights::validate() const {
    if (lambda < 0.0 || eta < 0.0 || beta < 0.0)
        throw std::invalid_argument("loss weights must be >= 0");
}

Tensor l1_kspace(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("l1_kspace: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    return op::mean(op::magnitude(op::sub(a, b)));
}

Tensor ssim_flow(const Tensor& a, const Tensor& b, double range) {
    if (a.dtype() != Dtype::Real || b.dtype() != Dtype::Real || a.shape().size() != 2 ||
        a.shape() != b.shape())
        throw std::invalid_argument("ssim_flow: expects two real [H,W] images of one shape");
    if (a.shape()[0] < kWindow || a.shape()[1] < kWindow)
        throw std::invalid_argument("ssim_flow: image smaller than the 11x11 window");
    if (range <= 0.0) throw std::invalid_argument("ssim_flow: range must be > 0");
    static const Tensor kernel = ssim_kernel();
    double c1 = kK1 * range * kK1 * range;
    double c2 = kK2 * range * kK2 * range;
    Tensor ra = op::reshape(a, {1, a.shape()[0], a.shape()[1]});
    Tensor rb = op::reshape(b, {1, b.shape()[0], b.shape()[1]});
    Tensor mu_a = op::conv2d(ra, kernel, std::nullopt, 0);
    Tensor mu_b = op::conv2d(rb, kernel, std::nullopt, 0);
    Tensor e_aa = op::conv2d(op::mul(ra, ra), kernel, std::nullopt, 0);
    Tensor e_bb = op::conv2d(op::mul(rb, rb), kernel, std::nullopt, 0);
    Tensor e_ab = op::conv2d(op::mul(ra, rb), kernel, std::nullopt, 0);
    Tensor mu_ab = op::mul(mu_a, mu_b);
    Tensor var_a = op::sub(e_aa, op::mul(mu_a, mu_a));
    Tensor var_b = op::sub(e_bb, op::mul(mu_b, mu_b));
    Tensor cov = op::sub(e_ab, mu_ab);
    Tensor num = op::mul(op::add_const(op::scale(mu_ab, 2.0), c1),
                         op::add_const(op::scale(cov, 2.0), c2));
    Tensor den = op::mul(op::add_const(op::add(op::mul(mu_a, mu_a), op::mul(mu_b, mu_b)), c1),
                         op::add_const(op::add(var_a, var_b), c2));
    return op::mean(op::div(num, den));
}

Tensor loss_k_rev(const Tensor& x_p, const Tensor& x_rec, const KSpaceData& parent,
                  double lambda) {
    require_single_coil(parent, "loss_k_rev");
    return l1_kspace(mixed_kspace(x_p, x_rec, parent, lambda), parent.samples);
}

Tensor loss_k_reg(const Tensor& x_p, const KSpaceData& parent) {
    require_single_coil(parent, "loss_k_reg");
    return l1_kspace(forward_single(x_p, parent.mask), parent.samples);
}

Tensor loss_img_rev(const Tensor& x_p, const Tensor& x_rec, const KSpaceData& parent,
                    double lambda) {
    require_single_coil(parent, "loss_img_rev");
    Tensor img = kspace_image(mixed_kspace(x_p, x_rec, parent, lambda));
    return ssim_loss_against_reference(img, parent);
}

Tensor loss_img_reg(const Tensor& x_p, const KSpaceData& parent) {
    require_single_coil(parent, "loss_img_reg");
    Tensor img = kspace_image(forward_single(x_p, parent.mask));
    return ssim_loss_against_reference(img, parent);
}

LossBreakdown loss_total(const Tensor& x_p, const Tensor& x_rec,
                         const KSpaceData& parent, const LossWeights& w) {
    w.validate();
    Tensor k_rev = loss_k_rev(x_p, x_rec, parent, w.lambda);
    Tensor k_reg = loss_k_reg(x_p, parent);
    Tensor img_rev = loss_img_rev(x_p, x_rec, parent, w.lambda);
    Tensor img_reg = loss_img_reg(x_p, parent);
    Tensor l_k = op::add(k_rev, op::scale(k_reg, w.eta));
    Tensor l_img = op::add(img_rev, op::scale(img_reg, w.eta));
    LossBreakdown out;
    out.total = op::add(l_img, op::scale(l_k, w.beta));
    out.k_rev = k_rev.scalar_value();
    out.k_reg = k_reg.scalar_value();
    out.img_rev = img_rev.scalar_value();
    out.img_reg = img_reg.scalar_value();
    out.k_total = l_k.scalar_value();
    out.img_total = l_img.scalar_value();
    out.value = out.total.scalar_value();
    return out;
}

}  // namespace dunmri
