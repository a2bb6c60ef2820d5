#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dunmri/metrics.hpp"

namespace dunmri {

namespace {

void require_pair(const Tensor& a, const Tensor& b, const char* who) {
    if (a.dtype() != Dtype::Real || b.dtype() != Dtype::Real)
        throw std::invalid_argument(std::string(who) + ": real magnitude images required");
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(who) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.shape().size() != 2)
        throw std::invalid_argument(std::string(who) + ": expected [H,W], got " +
                                    shape_str(a.shape()));
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::vector<double>& gauss_kernel() {
    static const std::vector<double> k = [] {
        std::vector<double> v(kWin);
        double s = 0.0;
        for (int i = 0; i < kWin; ++i) {
            double d = i - (kWin - 1) / 2.0;
            v[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            s += v[i];
        }
        for (double& x : v) x /= s;
        return v;
    }();
    return k;
}

// separable valid-mode Gaussian filtering of an H x W buffer
std::vector<double> gauss_valid(const std::vector<double>& img, int h, int w) {
    const auto& k = gauss_kernel();
    int oh = h - kWin + 1, ow = w - kWin + 1;
    std::vector<double> rows(static_cast<size_t>(h) * ow);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * img[static_cast<size_t>(r) * w + c + i];
            rows[static_cast<size_t>(r) * ow + c] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * rows[static_cast<size_t>(r + i) * ow + c];
            out[static_cast<size_t>(r) * ow + c] = acc;
        }
    return out;
}

}  // namespace

double psnr(const Tensor& ref, const Tensor& test, double data_range) {
    require_pair(ref, test, "psnr");
    if (data_range <= 0.0) throw std::invalid_argument("psnr: data_range must be > 0");
    double mse = 0.0;
    size_t n = ref.buffer_size();
    for (size_t i = 0; i < n; ++i) {
        double d = ref.buffer()[i] - test.buffer()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const Tensor& ref, const Tensor& test, double data_range) {
    require_pair(ref, test, "ssim");
    if (data_range <= 0.0) throw std::invalid_argument("ssim: data_range must be > 0");
    int h = ref.shape()[0], w = ref.shape()[1];
    if (h < kWin || w < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const auto& a = ref.buffer();
    const auto& b = test.buffer();
    size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    auto mu_a = gauss_valid(a, h, w);
    auto mu_b = gauss_valid(b, h, w);
    auto m_aa = gauss_valid(aa, h, w);
    auto m_bb = gauss_valid(bb, h, w);
    auto m_ab = gauss_valid(ab, h, w);
    double c1 = (kK1 * data_range) * (kK1 * data_range);
    double c2 = (kK2 * data_range) * (kK2 * data_range);
    double acc = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        double va = m_aa[i] - mu_a[i] * mu_a[i];
        double vb = m_bb[i] - mu_b[i] * mu_b[i];
        double cov = m_ab[i] - mu_a[i] * mu_b[i];
        acc += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    return acc / static_cast<double>(mu_a.size());
}

Tensor error_map(const Tensor& ref, const Tensor& test) {
    require_pair(ref, test, "error_map");
    double lo = ref.buffer()[0], hi = ref.buffer()[0];
    for (double v : ref.buffer()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double range = hi - lo;
    Tensor out = Tensor::zeros(ref.shape(), Dtype::Real);
    if (range == 0.0) return out;
    for (size_t i = 0; i < ref.buffer_size(); ++i)
        out.data()[i] = std::min(1.0, std::abs(ref.buffer()[i] - test.buffer()[i]) / range);
    return out;
}

MetricReport evaluate_slices(const std::vector<Tensor>& refs, const std::vector<Tensor>& tests) {
    if (refs.empty() || refs.size() != tests.size())
        throw std::invalid_argument("evaluate_slices: need equal nonempty slice lists");
    double range = 0.0;
    for (const Tensor& r : refs)
        for (double v : r.buffer()) range = std::max(range, v);
    if (range <= 0.0) throw std::invalid_argument("evaluate_slices: reference volume is empty");
    MetricReport rep;
    for (size_t i = 0; i < refs.size(); ++i) {
        rep.psnr_db.push_back(psnr(refs[i], tests[i], range));
        rep.ssim_val.push_back(ssim(refs[i], tests[i], range));
    }
    auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        sd = 0.0;
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(v.size()));
    };
    stats(rep.psnr_db, rep.psnr_mean, rep.psnr_std);
    stats(rep.ssim_val, rep.ssim_mean, rep.ssim_std);
    return rep;
}

void save_metrics_csv(const MetricReport& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open metrics file for writing: " + path);
    f.precision(10);
    f << "slice_id,psnr_db,ssim\n";
    for (size_t i = 0; i < r.psnr_db.size(); ++i)
        f << i << ',' << r.psnr_db[i] << ',' << r.ssim_val[i] << '\n';
    f << "mean," << r.psnr_mean << ',' << r.ssim_mean << '\n';
    f << "std," << r.psnr_std << ',' << r.ssim_std << '\n';
    if (!f) throw std::runtime_error("failed writing metrics file: " + path);
}

}  // namespace dunmri
