#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dunmri/ops.hpp"

namespace dunmri::ops {

namespace {

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place radix-2 transform of n interleaved complex values, scaled by 1/sqrt(n).
void fft1d(double* a, int n, bool inverse) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(a[2 * i], a[2 * j]);
            std::swap(a[2 * i + 1], a[2 * j + 1]);
        }
    }
    for (int len = 2; len <= n; len <<= 1) {
        int half = len / 2;
        double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / len;
        std::vector<double> tw(2 * half);
        for (int j = 0; j < half; ++j) {
            tw[2 * j] = std::cos(ang * j);
            tw[2 * j + 1] = std::sin(ang * j);
        }
        for (int i = 0; i < n; i += len) {
            for (int j = 0; j < half; ++j) {
                double* u = a + 2 * (i + j);
                double* v = a + 2 * (i + j + half);
                double vr = v[0] * tw[2 * j] - v[1] * tw[2 * j + 1];
                double vi = v[0] * tw[2 * j + 1] + v[1] * tw[2 * j];
                double ur = u[0], ui = u[1];
                u[0] = ur + vr;
                u[1] = ui + vi;
                v[0] = ur - vr;
                v[1] = ui - vi;
            }
        }
    }
    double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < 2 * n; ++i) a[i] *= s;
}

// Unitary 2-D transform over the trailing [h,w] plane of each batch entry.
void fft2_buffer(const double* in, double* out, size_t batch, int h, int w, bool inverse) {
    size_t plane = static_cast<size_t>(h) * static_cast<size_t>(w);
    std::vector<double> col(2 * static_cast<size_t>(h));
    for (size_t b = 0; b < batch; ++b) {
        const double* src = in + b * plane * 2;
        double* dst = out + b * plane * 2;
        for (size_t i = 0; i < plane * 2; ++i) dst[i] = src[i];
        for (int r = 0; r < h; ++r) fft1d(dst + static_cast<size_t>(r) * w * 2, w, inverse);
        for (int c = 0; c < w; ++c) {
            for (int r = 0; r < h; ++r) {
                col[2 * r] = dst[(static_cast<size_t>(r) * w + c) * 2];
                col[2 * r + 1] = dst[(static_cast<size_t>(r) * w + c) * 2 + 1];
            }
            fft1d(col.data(), h, inverse);
            for (int r = 0; r < h; ++r) {
                dst[(static_cast<size_t>(r) * w + c) * 2] = col[2 * r];
                dst[(static_cast<size_t>(r) * w + c) * 2 + 1] = col[2 * r + 1];
            }
        }
    }
}

Tensor fft2_impl(const Tensor& x, bool inverse, const char* name) {
    if (x.dtype() != Dtype::Complex)
        throw std::invalid_argument(std::string(name) + ": complex input required");
    if (x.shape().size() < 2)
        throw std::invalid_argument(std::string(name) + ": need at least 2 dims, got " +
                                    shape_str(x.shape()));
    int h = x.shape()[x.shape().size() - 2];
    int w = x.shape()[x.shape().size() - 1];
    if (!power_of_two(h) || !power_of_two(w))
        throw std::invalid_argument(std::string(name) + ": dims must be powers of two, got " +
                                    shape_str(x.shape()));
    size_t batch = x.numel() / (static_cast<size_t>(h) * static_cast<size_t>(w));
    Tensor out = Tensor::zeros(x.shape(), Dtype::Complex);
    fft2_buffer(x.data(), out.data(), batch, h, w, inverse);
    if (x.on_tape()) {
        Tape* tp = x.tape();
        int nx = x.node();
        // unitary transform: adjoint of the real-linear map is the opposite-direction transform
        tp->record(out, {nx}, [nx, batch, h, w, inverse](Tape& t, const std::vector<double>& g) {
            std::vector<double> gg(g.size());
            fft2_buffer(g.data(), gg.data(), batch, h, w, !inverse);
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < gg.size(); ++i) gx[i] += gg[i];
        });
    }
    return out;
}

}  // namespace

Tensor fft2(const Tensor& x) { return fft2_impl(x, false, "fft2"); }

Tensor ifft2(const Tensor& x) { return fft2_impl(x, true, "ifft2"); }

}  // namespace dunmri::ops
