#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace dunmri {

/// Flat key=value run configuration. Parsing accepts `key = value` lines,
/// blank lines and `#` comments; unknown keys are rejected by name.
/// parse -> serialize -> parse is a fixed point.
struct RunConfig {
    // unfolded model
    int stages = 4;
    int base_channels = 8;
    int height = 64;
    int width = 64;
    uint64_t init_seed = 1;
    bool final_zero = true;
    bool dc_replace = true;
    // sampling
    int accel = 4;
    std::string mask_pattern = "random";  // random | equispaced
    uint64_t mask_seed = 0;
    // self-supervised training
    double lambda = 10.0;
    double eta = 1.0;
    double beta = 10.0;
    double lr = 1e-4;
    int epochs = 10;
    int batch = 2;
    double rho_min = 0.2;
    double rho_max = 0.8;
    uint64_t seed = 0;
    // classical solver
    double tau = 0.5;
    double sigma = 0.5;
    double theta = 1.0;
    double threshold = 0.0;
    double tol = 1e-8;
    int max_iters = 500;

    static RunConfig parse(std::istream& in);
    static RunConfig load(const std::string& path);
    void serialize(std::ostream& out) const;
    void save(const std::string& path) const;
};

}  // namespace dunmri
