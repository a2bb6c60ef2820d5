#pragma once

#include <optional>
#include <span>

#include "dunmri/tensor.hpp"

namespace dunmri::ops {

// ---- elementwise arithmetic (same shape and dtype; scalars via scale/add_const) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);   // real elementwise product
Tensor div(const Tensor& a, const Tensor& b);   // real elementwise quotient
Tensor cmul(const Tensor& a, const Tensor& b);  // complex elementwise product
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);    // real only

// ---- scalar-tensor algebra (step sizes live on the tape as {1} tensors) ----
Tensor scale_by(const Tensor& s, const Tensor& x);  // s: real {1}; y = s * x
Tensor reciprocal(const Tensor& x);                 // real elementwise 1/x
Tensor softplus(const Tensor& x);                   // real elementwise ln(1+e^x)

// ---- reductions ----
Tensor sum(const Tensor& x);   // real -> {1}
Tensor mean(const Tensor& x);  // real -> {1}

// ---- complex structure ----
Tensor magnitude(const Tensor& x);            // complex -> real, |z| elementwise
Tensor complex_to_channels(const Tensor& x);  // complex [H,W] -> real [2,H,W]
Tensor channels_to_complex(const Tensor& x);  // real [2,H,W] -> complex [H,W]
Tensor to_complex(const Tensor& x);           // real -> complex, zero imaginary part
Tensor real_part(const Tensor& x);            // complex -> real

// ---- shape ----
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_channels(const Tensor& a, const Tensor& b);  // [Ca,H,W]+[Cb,H,W]

// ---- Fourier ----
// Unitary 2-D DFT over the trailing two dims (1/sqrt(HW) scaling in each
// direction); H and W must be powers of two. Leading dims are batched.
Tensor fft2(const Tensor& x);
Tensor ifft2(const Tensor& x);

// ---- sampling / coils ----
// Multiply each column of the trailing dim by colmask[w] (0/1 line masks;
// any real weights work). Linear and self-adjoint for binary masks.
Tensor mul_columns(const Tensor& x, std::span<const double> colmask);
// y_c = maps_c * x  (x complex [H,W], maps complex [C,H,W] held constant)
Tensor coil_expand(const Tensor& x, const Tensor& maps);
// y = sum_c conj(maps_c) * z_c  (adjoint of coil_expand)
Tensor coil_combine(const Tensor& z, const Tensor& maps);

// ---- proximal / gradient control ----
// S_t: shrink magnitude by t, preserve sign/phase. t >= 0.
Tensor soft_threshold(const Tensor& x, double t);
// Identity on values (shares the buffer bitwise), invisible to backward.
Tensor stop_gradient(const Tensor& x);

// ---- neural network ----
// Cross-correlation, stride 1, zero padding `pad`; x [Cin,H,W],
// w [Cout,Cin,k,k], bias [Cout] optional. Output [Cout,H',W'] with
// H' = H + 2*pad - k + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias, int pad);
Tensor leaky_relu(const Tensor& x, double slope);
// Per-channel normalization over the spatial dims with affine terms.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor avg_pool2(const Tensor& x);  // 2x2 mean, stride 2; H, W even
// 2x upsampling by transposed convolution; w [Cin,Cout,2,2], stride 2.
Tensor transpose_conv_up2(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias);

}  // namespace dunmri::ops
