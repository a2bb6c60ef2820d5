#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dunmri/loss.hpp"
#include "dunmri/model.hpp"

namespace dunmri {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;  // completed steps
    std::unordered_map<std::string, Tensor> m1, m2;  // per-parameter moments
};

AdamState init_adam(const Model& m);

/// One bias-corrected update over every parameter; names absent from `grads`
/// count as zero gradient (their moments still decay).
void adam_step(Model& m, AdamState& s,
               const std::unordered_map<std::string, std::vector<double>>& grads, double lr);

struct TrainOptions {
    LossWeights weights;
    double lr = 1e-4;
    int epochs = 1;       // train through epoch indices [start_epoch, epochs)
    int start_epoch = 0;
    int batch = 2;
    double rho_min = 0.2;
    double rho_max = 0.8;
    uint64_t seed = 0;
    bool dc_replace = true;   // train the same way the model is served: ON unless noisy
    std::string history_csv;  // empty = keep history in memory only
};

struct StepRecord {
    int step = 0;
    double k_rev = 0, k_reg = 0, img_rev = 0, img_reg = 0, total = 0;  // batch means
    double wall_ms = 0;
};

struct TrainResult {
    std::vector<StepRecord> history;
};

/// Self-supervised loop over single-coil measurements: per sample draw a
/// fresh retained fraction, partition, reconstruct both the partitioned and
/// the full input, and descend the dual-domain loss. Randomness is derived
/// statelessly from (seed, epoch, sample), so a run resumed from a
/// checkpoint retraces the interrupted one bit for bit.
TrainResult train(Model& m, AdamState& opt, const std::vector<KSpaceData>& dataset,
                  const TrainOptions& cfg);

void save_history_csv(const std::vector<StepRecord>& history, const std::string& path);

/// Model + optimizer moments + the next epoch index, in one container file.
void save_training_state(const std::string& path, const Model& m, const AdamState& s,
                         int next_epoch);
/// Restores optimizer state when present; a plain model checkpoint loads
/// with a fresh optimizer and next_epoch = 0.
Model load_training_state(const std::string& path, AdamState& s, int& next_epoch);

}  // namespace dunmri
