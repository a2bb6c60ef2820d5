#include <cmath>
#include <stdexcept>

#include "dunmri/ops.hpp"

namespace dunmri::ops {

namespace {

Tape* tracked_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tp = nullptr;
    for (const Tensor* t : ts) {
        if (t->on_tape()) {
            if (tp && tp != t->tape())
                throw std::invalid_argument("operands are recorded on different tapes");
            tp = t->tape();
        }
    }
    return tp;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape() || a.dtype() != b.dtype())
        throw std::invalid_argument(std::string(op) + ": shape/dtype mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_dtype(const Tensor& a, Dtype dt, const char* op) {
    if (a.dtype() != dt)
        throw std::invalid_argument(std::string(op) + ": wrong dtype for " + shape_str(a.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (Tape* tp = tracked_tape({&a, &b})) {
        int na = a.on_tape() ? a.node() : -1;
        int nb = b.on_tape() ? b.node() : -1;
        tp->record(out, {na, nb}, [na, nb](Tape& t, const std::vector<double>& g) {
            if (na >= 0) {
                auto& ga = t.grad_buf(na);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (nb >= 0) {
                auto& gb = t.grad_buf(nb);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    if (Tape* tp = tracked_tape({&a, &b})) {
        int na = a.on_tape() ? a.node() : -1;
        int nb = b.on_tape() ? b.node() : -1;
        tp->record(out, {na, nb}, [na, nb](Tape& t, const std::vector<double>& g) {
            if (na >= 0) {
                auto& ga = t.grad_buf(na);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (nb >= 0) {
                auto& gb = t.grad_buf(nb);
                for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    require_dtype(a, Dtype::Real, "mul");
    Tensor out = Tensor::zeros(a.shape(), Dtype::Real);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    if (Tape* tp = tracked_tape({&a, &b})) {
        int na = a.on_tape() ? a.node() : -1;
        int nb = b.on_tape() ? b.node() : -1;
        auto da = a.shared_buffer();
        auto db = b.shared_buffer();
        tp->record(out, {na, nb}, [na, nb, da, db](Tape& t, const std::vector<double>& g) {
            if (na >= 0) {
                auto& ga = t.grad_buf(na);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*db)[i];
            }
            if (nb >= 0) {
                auto& gb = t.grad_buf(nb);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * (*da)[i];
            }
        });
    }
    return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    require_dtype(a, Dtype::Real, "div");
    Tensor out = Tensor::zeros(a.shape(), Dtype::Real);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] / pb[i];
    if (Tape* tp = tracked_tape({&a, &b})) {
        int na = a.on_tape() ? a.node() : -1;
        int nb = b.on_tape() ? b.node() : -1;
        auto da = a.shared_buffer();
        auto db = b.shared_buffer();
        tp->record(out, {na, nb}, [na, nb, da, db](Tape& t, const std::vector<double>& g) {
            if (na >= 0) {
                auto& ga = t.grad_buf(na);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (*db)[i];
            }
            if (nb >= 0) {
                auto& gb = t.grad_buf(nb);
                for (size_t i = 0; i < g.size(); ++i)
                    gb[i] -= g[i] * (*da)[i] / ((*db)[i] * (*db)[i]);
            }
        });
    }
    return out;
}

Tensor cmul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "cmul");
    require_dtype(a, Dtype::Complex, "cmul");
    Tensor out = Tensor::zeros(a.shape(), Dtype::Complex);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double br = pb[2 * i], bi = pb[2 * i + 1];
        po[2 * i] = ar * br - ai * bi;
        po[2 * i + 1] = ar * bi + ai * br;
    }
    if (Tape* tp = tracked_tape({&a, &b})) {
        int na = a.on_tape() ? a.node() : -1;
        int nb = b.on_tape() ? b.node() : -1;
        auto da = a.shared_buffer();
        auto db = b.shared_buffer();
        // real-view adjoint of complex multiplication: grad_a = g * conj(b)
        tp->record(out, {na, nb}, [na, nb, da, db, n](Tape& t, const std::vector<double>& g) {
            if (na >= 0) {
                auto& ga = t.grad_buf(na);
                for (size_t i = 0; i < n; ++i) {
                    double gr = g[2 * i], gi = g[2 * i + 1];
                    double br = (*db)[2 * i], bi = (*db)[2 * i + 1];
                    ga[2 * i] += gr * br + gi * bi;
                    ga[2 * i + 1] += gi * br - gr * bi;
                }
            }
            if (nb >= 0) {
                auto& gb = t.grad_buf(nb);
                for (size_t i = 0; i < n; ++i) {
                    double gr = g[2 * i], gi = g[2 * i + 1];
                    double ar = (*da)[2 * i], ai = (*da)[2 * i + 1];
                    gb[2 * i] += gr * ar + gi * ai;
                    gb[2 * i + 1] += gi * ar - gr * ai;
                }
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const double* px = x.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = c * px[i];
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, c](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
        });
    }
    return out;
}

Tensor add_const(const Tensor& x, double c) {
    require_dtype(x, Dtype::Real, "add_const");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = px[i] + c;
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor scale_by(const Tensor& s, const Tensor& x) {
    if (s.dtype() != Dtype::Real || s.numel() != 1)
        throw std::invalid_argument("scale_by: scale must be a real {1} tensor, got " +
                                    shape_str(s.shape()));
    double sv = s.data()[0];
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const double* px = x.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = sv * px[i];
    if (Tape* tp = tracked_tape({&s, &x})) {
        int ns = s.on_tape() ? s.node() : -1;
        int nx = x.on_tape() ? x.node() : -1;
        auto dx = x.shared_buffer();
        tp->record(out, {ns, nx}, [ns, nx, sv, dx](Tape& t, const std::vector<double>& g) {
            if (ns >= 0) {
                double acc = 0.0;
                for (size_t i = 0; i < g.size(); ++i) acc += g[i] * (*dx)[i];
                t.grad_buf(ns)[0] += acc;
            }
            if (nx >= 0) {
                auto& gx = t.grad_buf(nx);
                for (size_t i = 0; i < g.size(); ++i) gx[i] += sv * g[i];
            }
        });
    }
    return out;
}

Tensor reciprocal(const Tensor& x) {
    require_dtype(x, Dtype::Real, "reciprocal");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) po[i] = 1.0 / px[i];
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        auto dx = x.shared_buffer();
        tp->record(out, {nx}, [nx, dx](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < g.size(); ++i)
                gx[i] -= g[i] / ((*dx)[i] * (*dx)[i]);
        });
    }
    return out;
}

Tensor softplus(const Tensor& x) {
    require_dtype(x, Dtype::Real, "softplus");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    size_t n = out.buffer_size();
    for (size_t i = 0; i < n; ++i) {
        double v = px[i];
        po[i] = v > 30.0 ? v : std::log1p(std::exp(v));
    }
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        auto dx = x.shared_buffer();
        tp->record(out, {nx}, [nx, dx](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < g.size(); ++i) {
                double v = (*dx)[i];
                double sig = v > 30.0 ? 1.0 : 1.0 / (1.0 + std::exp(-v));
                gx[i] += g[i] * sig;
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    require_dtype(x, Dtype::Real, "sum");
    double acc = 0.0;
    const double* px = x.data();
    size_t n = x.buffer_size();
    for (size_t i = 0; i < n; ++i) acc += px[i];
    Tensor out = Tensor::scalar(acc);
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, n](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < n; ++i) gx[i] += g[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    require_dtype(x, Dtype::Real, "mean");
    double acc = 0.0;
    const double* px = x.data();
    size_t n = x.buffer_size();
    for (size_t i = 0; i < n; ++i) acc += px[i];
    double inv = 1.0 / static_cast<double>(n);
    Tensor out = Tensor::scalar(acc * inv);
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx, -1}, [nx, n, inv](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < n; ++i) gx[i] += g[0] * inv;
        });
    }
    return out;
}

Tensor magnitude(const Tensor& x) {
    require_dtype(x, Dtype::Complex, "magnitude");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) po[i] = std::hypot(px[2 * i], px[2 * i + 1]);
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        auto dx = x.shared_buffer();
        auto dout = out.shared_buffer();
        tp->record(out, {nx}, [nx, dx, dout, n](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < n; ++i) {
                double m = (*dout)[i];
                if (m == 0.0) continue;  // subgradient 0 at the origin
                gx[2 * i] += g[i] * (*dx)[2 * i] / m;
                gx[2 * i + 1] += g[i] * (*dx)[2 * i + 1] / m;
            }
        });
    }
    return out;
}

Tensor complex_to_channels(const Tensor& x) {
    require_dtype(x, Dtype::Complex, "complex_to_channels");
    if (x.shape().size() != 2)
        throw std::invalid_argument("complex_to_channels expects [H,W], got " + shape_str(x.shape()));
    int h = x.shape()[0], w = x.shape()[1];
    Tensor out = Tensor::zeros({2, h, w}, Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) {
        po[i] = px[2 * i];
        po[n + i] = px[2 * i + 1];
    }
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, n](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < n; ++i) {
                gx[2 * i] += g[i];
                gx[2 * i + 1] += g[n + i];
            }
        });
    }
    return out;
}

Tensor channels_to_complex(const Tensor& x) {
    require_dtype(x, Dtype::Real, "channels_to_complex");
    if (x.shape().size() != 3 || x.shape()[0] != 2)
        throw std::invalid_argument("channels_to_complex expects [2,H,W], got " + shape_str(x.shape()));
    int h = x.shape()[1], w = x.shape()[2];
    Tensor out = Tensor::zeros({h, w}, Dtype::Complex);
    const double* px = x.data();
    double* po = out.data();
    size_t n = out.numel();
    for (size_t i = 0; i < n; ++i) {
        po[2 * i] = px[i];
        po[2 * i + 1] = px[n + i];
    }
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, n](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < n; ++i) {
                gx[i] += g[2 * i];
                gx[n + i] += g[2 * i + 1];
            }
        });
    }
    return out;
}

Tensor to_complex(const Tensor& x) {
    require_dtype(x, Dtype::Real, "to_complex");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Complex);
    const double* px = x.data();
    double* po = out.data();
    size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) po[2 * i] = px[i];
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, n](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < n; ++i) gx[i] += g[2 * i];
        });
    }
    return out;
}

Tensor real_part(const Tensor& x) {
    require_dtype(x, Dtype::Complex, "real_part");
    Tensor out = Tensor::zeros(x.shape(), Dtype::Real);
    const double* px = x.data();
    double* po = out.data();
    size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) po[i] = px[2 * i];
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, n](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < n; ++i) gx[2 * i] += g[i];
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    if (shape_numel(shape) != x.numel())
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(x.shape()) +
                                    " -> " + shape_str(shape));
    Tensor out = x.with_shape(std::move(shape));
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.dtype() != b.dtype())
        throw std::invalid_argument("concat_channels: dtype mismatch");
    if (a.shape().size() != 3 || b.shape().size() != 3 || a.shape()[1] != b.shape()[1] ||
        a.shape()[2] != b.shape()[2])
        throw std::invalid_argument("concat_channels: incompatible shapes " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    int ca = a.shape()[0], cb = b.shape()[0];
    Tensor out = Tensor::zeros({ca + cb, a.shape()[1], a.shape()[2]}, a.dtype());
    size_t la = a.buffer_size(), lb = b.buffer_size();
    double* po = out.data();
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < la; ++i) po[i] = pa[i];
    for (size_t i = 0; i < lb; ++i) po[la + i] = pb[i];
    if (Tape* tp = tracked_tape({&a, &b})) {
        int na = a.on_tape() ? a.node() : -1;
        int nb = b.on_tape() ? b.node() : -1;
        tp->record(out, {na, nb}, [na, nb, la, lb](Tape& t, const std::vector<double>& g) {
            if (na >= 0) {
                auto& ga = t.grad_buf(na);
                for (size_t i = 0; i < la; ++i) ga[i] += g[i];
            }
            if (nb >= 0) {
                auto& gb = t.grad_buf(nb);
                for (size_t i = 0; i < lb; ++i) gb[i] += g[la + i];
            }
        });
    }
    return out;
}

Tensor mul_columns(const Tensor& x, std::span<const double> colmask) {
    if (x.shape().empty())
        throw std::invalid_argument("mul_columns: tensor must have at least one dim");
    int w = x.shape().back();
    if (static_cast<size_t>(w) != colmask.size())
        throw std::invalid_argument("mul_columns: mask length " + std::to_string(colmask.size()) +
                                    " does not match trailing dim of " + shape_str(x.shape()));
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const double* px = x.data();
    double* po = out.data();
    int width = dtype_width(x.dtype());
    size_t rows = x.numel() / static_cast<size_t>(w);
    std::vector<double> m(colmask.begin(), colmask.end());
    for (size_t r = 0; r < rows; ++r) {
        size_t base = r * static_cast<size_t>(w) * width;
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < width; ++k)
                po[base + static_cast<size_t>(c) * width + k] =
                    m[static_cast<size_t>(c)] * px[base + static_cast<size_t>(c) * width + k];
    }
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        tp->record(out, {nx}, [nx, m, w, width, rows](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (size_t r = 0; r < rows; ++r) {
                size_t base = r * static_cast<size_t>(w) * width;
                for (int c = 0; c < w; ++c)
                    for (int k = 0; k < width; ++k)
                        gx[base + static_cast<size_t>(c) * width + k] +=
                            m[static_cast<size_t>(c)] * g[base + static_cast<size_t>(c) * width + k];
            }
        });
    }
    return out;
}

Tensor coil_expand(const Tensor& x, const Tensor& maps) {
    require_dtype(x, Dtype::Complex, "coil_expand");
    require_dtype(maps, Dtype::Complex, "coil_expand");
    if (x.shape().size() != 2 || maps.shape().size() != 3 || maps.shape()[1] != x.shape()[0] ||
        maps.shape()[2] != x.shape()[1])
        throw std::invalid_argument("coil_expand: image " + shape_str(x.shape()) +
                                    " vs maps " + shape_str(maps.shape()));
    int coils = maps.shape()[0];
    size_t n = x.numel();
    Tensor out = Tensor::zeros(maps.shape(), Dtype::Complex);
    const double* px = x.data();
    const double* pm = maps.data();
    double* po = out.data();
    for (int c = 0; c < coils; ++c) {
        size_t off = static_cast<size_t>(c) * n * 2;
        for (size_t i = 0; i < n; ++i) {
            double xr = px[2 * i], xi = px[2 * i + 1];
            double mr = pm[off + 2 * i], mi = pm[off + 2 * i + 1];
            po[off + 2 * i] = mr * xr - mi * xi;
            po[off + 2 * i + 1] = mr * xi + mi * xr;
        }
    }
    if (Tape* tp = tracked_tape({&x})) {
        int nx = x.node();
        auto dm = maps.shared_buffer();
        tp->record(out, {nx}, [nx, dm, coils, n](Tape& t, const std::vector<double>& g) {
            auto& gx = t.grad_buf(nx);
            for (int c = 0; c < coils; ++c) {
                size_t off = static_cast<size_t>(c) * n * 2;
                for (size_t i = 0; i < n; ++i) {
                    double gr = g[off + 2 * i], gi = g[off + 2 * i + 1];
                    double mr = (*dm)[off + 2 * i], mi = (*dm)[off + 2 * i + 1];
                    gx[2 * i] += gr * mr + gi * mi;
                    gx[2 * i + 1] += gi * mr - gr * mi;
                }
            }
        });
    }
    return out;
}

Tensor coil_combine(const Tensor& z, const Tensor& maps) {
    require_dtype(z, Dtype::Complex, "coil_combine");
    require_dtype(maps, Dtype::Complex, "coil_combine");
    if (z.shape() != maps.shape() || z.shape().size() != 3)
        throw std::invalid_argument("coil_combine: k-space " + shape_str(z.shape()) +
                                    " vs maps " + shape_str(maps.shape()));
    int coils = maps.shape()[0];
    int h = maps.shape()[1], w = maps.shape()[2];
    size_t n = static_cast<size_t>(h) * static_cast<size_t>(w);
    Tensor out = Tensor::zeros({h, w}, Dtype::Complex);
    const double* pz = z.data();
    const double* pm = maps.data();
    double* po = out.data();
    for (int c = 0; c < coils; ++c) {
        size_t off = static_cast<size_t>(c) * n * 2;
        for (size_t i = 0; i < n; ++i) {
            double zr = pz[off + 2 * i], zi = pz[off + 2 * i + 1];
            double mr = pm[off + 2 * i], mi = pm[off + 2 * i + 1];
            // conj(m) * z
            po[2 * i] += mr * zr + mi * zi;
            po[2 * i + 1] += mr * zi - mi * zr;
        }
    }
    if (Tape* tp = tracked_tape({&z})) {
        int nz = z.node();
        auto dm = maps.shared_buffer();
        tp->record(out, {nz}, [nz, dm, coils, n](Tape& t, const std::vector<double>& g) {
            auto& gz = t.grad_buf(nz);
            for (int c = 0; c < coils; ++c) {
                size_t off = static_cast<size_t>(c) * n * 2;
                for (size_t i = 0; i < n; ++i) {
                    double gr = g[2 * i], gi = g[2 * i + 1];
                    double mr = (*dm)[off + 2 * i], mi = (*dm)[off + 2 * i + 1];
                    gz[off + 2 * i] += mr * gr - mi * gi;
                    gz[off + 2 * i + 1] += mr * gi + mi * gr;
                }
            }
        });
    }
    return out;
}

Tensor soft_threshold(const Tensor& x, double thr) {
    if (thr < 0.0)
        throw std::invalid_argument("soft_threshold: threshold must be >= 0, got " +
                                    std::to_string(thr));
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const double* px = x.data();
    double* po = out.data();
    if (x.dtype() == Dtype::Real) {
        size_t n = x.buffer_size();
        for (size_t i = 0; i < n; ++i) {
            double v = px[i];
            double m = std::abs(v) - thr;
            po[i] = m > 0.0 ? (v > 0.0 ? m : -m) : 0.0;
        }
        if (Tape* tp = tracked_tape({&x})) {
            int nx = x.node();
            auto dx = x.shared_buffer();
            tp->record(out, {nx}, [nx, dx, thr, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(nx);
                for (size_t i = 0; i < n; ++i)
                    if (std::abs((*dx)[i]) > thr) gx[i] += g[i];
            });
        }
    } else {
        size_t n = x.numel();
        for (size_t i = 0; i < n; ++i) {
            double re = px[2 * i], im = px[2 * i + 1];
            double m = std::hypot(re, im);
            double f = m > thr ? (m - thr) / m : 0.0;
            po[2 * i] = f * re;
            po[2 * i + 1] = f * im;
        }
        if (Tape* tp = tracked_tape({&x})) {
            int nx = x.node();
            auto dx = x.shared_buffer();
            tp->record(out, {nx}, [nx, dx, thr, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(nx);
                for (size_t i = 0; i < n; ++i) {
                    double re = (*dx)[2 * i], im = (*dx)[2 * i + 1];
                    double m = std::hypot(re, im);
                    if (m <= thr) continue;
                    double f = (m - thr) / m;
                    double c = thr / (m * m * m);
                    double gr = g[2 * i], gi = g[2 * i + 1];
                    gx[2 * i] += gr * (f + c * re * re) + gi * c * re * im;
                    gx[2 * i + 1] += gr * c * re * im + gi * (f + c * im * im);
                }
            });
        }
    }
    return out;
}

Tensor stop_gradient(const Tensor& x) {
    return x.detached();
}

}  // namespace dunmri::ops
