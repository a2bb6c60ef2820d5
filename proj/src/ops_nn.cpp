#include <cmath>
#include <stdexcept>

#include "dunmri/ops.hpp"

namespace dunmri::ops {

namespace {

Tape* tracked_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tp = nullptr;
    for (const Tensor* t : ts) {
        if (t && t->on_tape()) {
            if (tp && tp != t->tape())
                throw std::invalid_argument("operands are recorded on different tapes");
            tp = t->tape();
        }
    }
    return tp;
}

void require_real(const Tensor& t, const char* op) {
    if (t.dtype() != Dtype::Real)
        throw std::invalid_argument(std::string(op) + ": real input required");
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias, int pad) {
    require_real(x, "conv2d");
    require_real(w, "conv2d");
    if (x.shape().size() != 3 || w.shape().size() != 4 || w.shape()[1] != x.shape()[0] ||
        w.shape()[2] != w.shape()[3])
        throw std::invalid_argument("conv2d: input " + shape_str(x.shape()) + " weight " +
                                    shape_str(w.shape()));
    if (pad < 0) throw std::invalid_argument("conv2d: negative padding");
    int cin = x.shape()[0], h = x.shape()[1], ww = x.shape()[2];
    int cout = w.shape()[0], k = w.shape()[2];
    int oh = h + 2 * pad - k + 1;
    int ow = ww + 2 * pad - k + 1;
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    if (bias && (bias->dtype() != Dtype::Real || bias->numel() != static_cast<size_t>(cout)))
        throw std::invalid_argument("conv2d: bias must be real [Cout]");
    Tensor out = Tensor::zeros({cout, oh, ow}, Dtype::Real);
    const double* px = x.data();
    const double* pw = w.data();
    const double* pb = bias ? bias->data() : nullptr;
    double* po = out.data();
    auto xat = [&](int c, int y, int xx) {
        return px[(static_cast<size_t>(c) * h + y) * ww + xx];
    };
    for (int co = 0; co < cout; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = pb ? pb[co] : 0.0;
                for (int ci = 0; ci < cin; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox + kx - pad;
                            if (ix < 0 || ix >= ww) continue;
                            acc += xat(ci, iy, ix) *
                                   pw[((static_cast<size_t>(co) * cin + ci) * k + ky) * k + kx];
                        }
                    }
                }
                po[(static_cast<size_t>(co) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    const Tensor* bptr = bias ? &*bias : nullptr;
    if (Tape* tp = tracked_tape({&x, &w, bptr})) {
        int nx = x.on_tape() ? x.node() : -1;
        int nw = w.on_tape() ? w.node() : -1;
        int nb = (bias && bias->on_tape()) ? bias->node() : -1;
        auto dx = x.shared_buffer();
        auto dw = w.shared_buffer();
        tp->record(out, {nx, nw, nb},
                   [nx, nw, nb, dx, dw, cin, h, ww, cout, k, oh, ow, pad](
                       Tape& t, const std::vector<double>& g) {
                       std::vector<double>* gx = nx >= 0 ? &t.grad_buf(nx) : nullptr;
                       std::vector<double>* gw = nw >= 0 ? &t.grad_buf(nw) : nullptr;
                       std::vector<double>* gb = nb >= 0 ? &t.grad_buf(nb) : nullptr;
                       for (int co = 0; co < cout; ++co) {
                           for (int oy = 0; oy < oh; ++oy) {
                               for (int ox = 0; ox < ow; ++ox) {
                                   double gv = g[(static_cast<size_t>(co) * oh + oy) * ow + ox];
                                   if (gb) (*gb)[co] += gv;
                                   if (!gx && !gw) continue;
                                   for (int ci = 0; ci < cin; ++ci) {
                                       for (int ky = 0; ky < k; ++ky) {
                                           int iy = oy + ky - pad;
                                           if (iy < 0 || iy >= h) continue;
                                           for (int kx = 0; kx < k; ++kx) {
                                               int ix = ox + kx - pad;
                                               if (ix < 0 || ix >= ww) continue;
                                               size_t xi =
                                                   (static_cast<size_t>(ci) * h + iy) * ww + ix;
                                               size_t wi =
                                                   ((static_cast<size_t>(co) * cin + ci) * k + ky) *
                                                       k +
                                                   kx;
                                               if (gx) (*gx)[xi] += gv * (*dw)[wi];
                                               if (gw) (*gw)[wi] += gv * (*dx)[xi];
                                           }
                                       }
                                   }
                               }
                           }
                       }
                   });
    }
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    require_real(x, "leaky_relu");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    size_t n = x.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : slope * px[i];
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        auto dx = x.shared_buffer();
        tp->record(out, {nx}, [nx, dx, slope](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < g.size(); ++i)
                gx[i] += ((*dx)[i] > 0.0 ? 1.0 : slope) * g[i];
        });
    }
    return out;
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_real(x, "instance_norm");
    require_real(gamma, "instance_norm");
    require_real(beta, "instance_norm");
    if (x.shape().size() != 3)
        throw std::invalid_argument("instance_norm expects [C,H,W], got " + shape_str(x.shape()));
    int c = x.shape()[0];
    size_t plane = static_cast<size_t>(x.shape()[1]) * static_cast<size_t>(x.shape()[2]);
    if (gamma.numel() != static_cast<size_t>(c) || beta.numel() != static_cast<size_t>(c))
        throw std::invalid_argument("instance_norm: affine terms must have one entry per channel");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Real);
    const double* px = x.data();
    const double* pg = gamma.data();
    const double* pbt = beta.data();
    double* po = out.data();
    std::vector<double> chan_mean(c), chan_istd(c);
    for (int ch = 0; ch < c; ++ch) {
        const double* row = px + static_cast<size_t>(ch) * plane;
        double m = 0.0;
        for (size_t i = 0; i < plane; ++i) m += row[i];
        m /= static_cast<double>(plane);
        double v = 0.0;
        for (size_t i = 0; i < plane; ++i) {
            double d = row[i] - m;
            v += d * d;
        }
        v /= static_cast<double>(plane);
        double istd = 1.0 / std::sqrt(v + eps);
        chan_mean[ch] = m;
        chan_istd[ch] = istd;
        double* orow = po + static_cast<size_t>(ch) * plane;
        for (size_t i = 0; i < plane; ++i) orow[i] = pg[ch] * (row[i] - m) * istd + pbt[ch];
    }
    if (Tape* tp = tracked_tape({&x, &gamma, &beta})) {
        int nx = x.on_tape() ? x.node() : -1;
        int ng = gamma.on_tape() ? gamma.node() : -1;
        int nb = beta.on_tape() ? beta.node() : -1;
        auto dx = x.shared_buffer();
        auto dg = gamma.shared_buffer();
        tp->record(out, {nx, ng, nb},
                   [nx, ng, nb, dx, dg, c, plane, chan_mean, chan_istd](
                       Tape& t, const std::vector<double>& g) {
                       for (int ch = 0; ch < c; ++ch) {
                           const double* row = dx->data() + static_cast<size_t>(ch) * plane;
                           const double* grow = g.data() + static_cast<size_t>(ch) * plane;
                           double m = chan_mean[ch], istd = chan_istd[ch];
                           double sum_g = 0.0, sum_gx = 0.0;
                           for (size_t i = 0; i < plane; ++i) {
                               double xh = (row[i] - m) * istd;
                               sum_g += grow[i];
                               sum_gx += grow[i] * xh;
                           }
                           if (nb >= 0) t.grad_buf(nb)[ch] += sum_g;
                           if (ng >= 0) t.grad_buf(ng)[ch] += sum_gx;
                           if (nx >= 0) {
                               auto& gx = t.grad_buf(nx);
                               double gam = (*dg)[ch];
                               double inv_n = 1.0 / static_cast<double>(plane);
                               double* gxrow = gx.data() + static_cast<size_t>(ch) * plane;
                               for (size_t i = 0; i < plane; ++i) {
                                   double xh = (row[i] - m) * istd;
                                   gxrow[i] += gam * istd *
                                               (grow[i] - sum_g * inv_n - xh * sum_gx * inv_n);
                               }
                           }
                       }
                   });
    }
    return out;
}

Tensor avg_pool2(const Tensor& x) {
    require_real(x, "avg_pool2");
    if (x.shape().size() != 3 || x.shape()[1] % 2 != 0 || x.shape()[2] % 2 != 0)
        throw std::invalid_argument("avg_pool2 expects [C,H,W] with even H, W, got " +
                                    shape_str(x.shape()));
    int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    int oh = h / 2, ow = w / 2;
    Tensor out = Tensor::zeros({c, oh, ow}, Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                size_t base = (static_cast<size_t>(ch) * h + 2 * oy) * w + 2 * ox;
                po[(static_cast<size_t>(ch) * oh + oy) * ow + ox] =
                    0.25 * (px[base] + px[base + 1] + px[base + w] + px[base + w + 1]);
            }
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, c, h, w, oh, ow](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (int ch = 0; ch < c; ++ch)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        double gv = 0.25 * g[(static_cast<size_t>(ch) * oh + oy) * ow + ox];
                        size_t base = (static_cast<size_t>(ch) * h + 2 * oy) * w + 2 * ox;
                        gx[base] += gv;
                        gx[base + 1] += gv;
                        gx[base + w] += gv;
                        gx[base + w + 1] += gv;
                    }
        });
    }
    return out;
}

Tensor transpose_conv_up2(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias) {
    require_real(x, "transpose_conv_up2");
    require_real(w, "transpose_conv_up2");
    if (x.shape().size() != 3 || w.shape().size() != 4 || w.shape()[0] != x.shape()[0] ||
        w.shape()[2] != 2 || w.shape()[3] != 2)
        throw std::invalid_argument("transpose_conv_up2: input " + shape_str(x.shape()) +
                                    " weight " + shape_str(w.shape()));
    int cin = x.shape()[0], h = x.shape()[1], ww = x.shape()[2];
    int cout = w.shape()[1];
    if (bias && (bias->dtype() != Dtype::Real || bias->numel() != static_cast<size_t>(cout)))
        throw std::invalid_argument("transpose_conv_up2: bias must be real [Cout]");
    Tensor out = Tensor::zeros({cout, 2 * h, 2 * ww}, Dtype::Real);
    const double* px = x.data();
    const double* pw = w.data();
    double* po = out.data();
    if (bias) {
        const double* pb = bias->data();
        size_t plane = static_cast<size_t>(2 * h) * static_cast<size_t>(2 * ww);
        for (int co = 0; co < cout; ++co)
            for (size_t i = 0; i < plane; ++i) po[static_cast<size_t>(co) * plane + i] = pb[co];
    }
    for (int ci = 0; ci < cin; ++ci)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < ww; ++ix) {
                double xv = px[(static_cast<size_t>(ci) * h + iy) * ww + ix];
                for (int co = 0; co < cout; ++co)
                    for (int ky = 0; ky < 2; ++ky)
                        for (int kx = 0; kx < 2; ++kx)
                            po[(static_cast<size_t>(co) * 2 * h + 2 * iy + ky) * 2 * ww + 2 * ix +
                               kx] +=
                                xv *
                                pw[((static_cast<size_t>(ci) * cout + co) * 2 + ky) * 2 + kx];
            }
    const Tensor* bptr = bias ? &*bias : nullptr;
    if (Tape* tp = tracked_tape({&x, &w, bptr})) {
        int nx = x.on_tape() ? x.node() : -1;
        int nw = w.on_tape() ? w.node() : -1;
        int nb = (bias && bias->on_tape()) ? bias->node() : -1;
        auto dx = x.shared_buffer();
        auto dw = w.shared_buffer();
        tp->record(out, {nx, nw, nb},
                   [nx, nw, nb, dx, dw, cin, h, ww, cout](Tape& t, const std::vector<double>& g) {
                       std::vector<double>* gx = nx >= 0 ? &t.grad_buf(nx) : nullptr;
                       std::vector<double>* gw = nw >= 0 ? &t.grad_buf(nw) : nullptr;
                       if (nb >= 0) {
                           auto& gb = t.grad_buf(nb);
                           size_t plane = static_cast<size_t>(2 * h) * static_cast<size_t>(2 * ww);
                           for (int co = 0; co < cout; ++co)
                               for (size_t i = 0; i < plane; ++i)
                                   gb[co] += g[static_cast<size_t>(co) * plane + i];
                       }
                       if (!gx && !gw) return;
                       for (int ci = 0; ci < cin; ++ci)
                           for (int iy = 0; iy < h; ++iy)
                               for (int ix = 0; ix < ww; ++ix) {
                                   size_t xi = (static_cast<size_t>(ci) * h + iy) * ww + ix;
                                   for (int co = 0; co < cout; ++co)
                                       for (int ky = 0; ky < 2; ++ky)
                                           for (int kx = 0; kx < 2; ++kx) {
                                               size_t oi = (static_cast<size_t>(co) * 2 * h +
                                                            2 * iy + ky) *
                                                               2 * ww +
                                                           2 * ix + kx;
                                               size_t wi =
                                                   ((static_cast<size_t>(ci) * cout + co) * 2 +
                                                    ky) *
                                                       2 +
                                                   kx;
                                               if (gx) (*gx)[xi] += g[oi] * (*dw)[wi];
                                               if (gw) (*gw)[wi] += g[oi] * (*dx)[xi];
                                           }
                               }
                   });
    }
    return out;
}

}  // namespace dunmri::ops
