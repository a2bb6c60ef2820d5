#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dunmri/container.hpp"
#include "dunmri/mri.hpp"
#include "dunmri/tensor.hpp"

namespace dunmri {

/// Geometry and initialization of the unrolled reconstruction network.
/// Spatial dims must be powers of two and at least 16: the proximal U-Net
/// halves the resolution four times.
struct ModelConfig {
    int stages = 4;          // unrolled iteration count K (0 = zero-filled debug)
    int base_channels = 4;   // channels double per encoder level
    int height = 64;
    int width = 64;
    uint64_t init_seed = 1;
    bool final_zero = true;  // zero-init the last 1x1 conv (residual start)

    void validate() const;
};

/// All learnable quantities, keyed by canonical names:
///   stage{k}.enc{l}.sp.conv.w / .sp.norm.{gamma,beta}      spatial branch
///   stage{k}.enc{l}.freq.filter                            complex global filter
///   stage{k}.enc{l}.fuse.{w,b}                             branch fusion conv
///   stage{k}.enc{l}.proj.w                                 1x1 residual projection
///   stage{k}.dec{l}.up.w / .conv.w / .norm.{gamma,beta}
/// Convolutions directly followed by a norm carry no bias (the norm would
/// cancel it, leaving a permanently zero-gradient parameter).
///   stage{k}.final.{w,b}                                   1x1 conv to 2 channels
///   stage{k}.raw_tau / raw_sigma / raw_theta               softplus-mapped steps
/// `names` preserves creation order; initialization, gradients, checkpoints
/// and the optimizer all iterate in that order.
struct Model {
    ModelConfig cfg;
    std::vector<std::string> names;
    std::unordered_map<std::string, Tensor> params;

    const Tensor& param(const std::string& name) const;
    size_t total_parameter_doubles() const;
};

/// Closed-form parameter count (in stored doubles; complex entries count 2)
/// as a function of the configuration only.
size_t expected_parameter_doubles(const ModelConfig& cfg);

Model init_model(const ModelConfig& cfg);

/// Re-bind every parameter as a leaf of `t`, in canonical order, so a later
/// backward() deposits gradients for all of them.
void attach_leaves(Model& m, Tape& t);

// Positive per-stage step sizes ({1} tensors, softplus of the raw params).
Tensor stage_tau(const Model& m, int stage);
Tensor stage_sigma(const Model& m, int stage);
Tensor stage_theta(const Model& m, int stage);

/// One spatial/frequency feature-extraction block at encoder `level`:
/// real [C_in, H>>level, W>>level] -> real [C_out, same spatial dims].
Tensor sffe_block(const Model& m, int stage, int level, const Tensor& f_in);

/// Proximal U-Net of one stage: real [2,H,W] (re/im channels) -> complex
/// [H,W] correction.
Tensor proxnet_apply(const Model& m, int stage, const Tensor& v);

struct StageStep {
    Tensor x;  // complex [H,W]
    Tensor y;  // complex [C,H,W]
};

/// One unrolled iteration:
///   x' = x + ProxNet(x - tau * A^H y)
///   z  = x' + theta * (x' - x)
///   y' = (y + sigma * (A z - samples)) / (1 + sigma)
/// `maps` absent -> single-coil operators.
StageStep stage_forward(const Model& m, int stage, const Tensor& x, const Tensor& y,
                        const KSpaceData& data, const std::optional<Tensor>& maps);

/// Full unrolled pass from x0 = A^H samples, y0 = 0. With `dc_replace` the
/// measured entries are re-imposed afterwards: x + A^H(samples - A x).
Tensor model_forward(const Model& m, const KSpaceData& data,
                     const std::optional<Tensor>& maps, bool dc_replace);

/// Checkpoint = one container holding a config record, every parameter under
/// its canonical name, and any caller records (optimizer state, counters).
void save_checkpoint(const std::string& path, const Model& m,
                     const std::vector<NamedTensor>& extra = {});
Model load_checkpoint(const std::string& path, std::vector<NamedTensor>* extra = nullptr);

}  // namespace dunmri
