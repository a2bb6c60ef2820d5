#pragma once

#include "dunmri/loss.hpp"
#include "dunmri/model.hpp"

namespace dunmri {

struct GradCheckOptions {
    LossWeights weights;
    double rho = 0.5;          // retained fraction for the partitioned branch
    uint64_t partition_seed = 1;
    int probes_per_group = 3;  // coordinates probed per parameter; 0 = all
    double step = 1e-5;        // central-difference half step
    double tol = 1e-5;         // relative error bound
    // Gradient scale below which the comparison turns absolute: the error is
    // measured against max(|analytic|, |fd|, scale_floor), so coordinates
    // smaller than the floor must agree within tol * scale_floor. Without it
    // a near-zero coordinate would be judged by finite-difference roundoff.
    double scale_floor = 1e-4;
};

struct GroupCheck {
    std::string name;
    int probes = 0;
    double max_rel_err = 0.0;
    size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
    bool zero_gradient = false;  // every probe vanished both ways
    bool passed = false;
};

struct GradCheckReport {
    std::vector<GroupCheck> groups;  // canonical parameter order
    double loss_value = 0.0;
    double worst_rel_err = 0.0;
    bool passed = false;
};

/// Compare tape gradients of the dual-domain loss against central finite
/// differences, parameter group by parameter group. The loss is evaluated the
/// same way a training step sees it: the partitioned branch carries the
/// gradient while the full-input reconstruction sits behind a stop-gradient,
/// so it is held fixed while parameters are probed.
GradCheckReport gradcheck_model(const Model& m, const KSpaceData& parent,
                                const GradCheckOptions& opt);

}  // namespace dunmri
