#pragma once

#include <string>
#include <vector>

#include "dunmri/config.hpp"
#include "dunmri/mri.hpp"

namespace dunmri {

/// One [H,W] image per file: a container with a single "image" record.
void save_image(const std::string& path, const Tensor& img);
Tensor load_image(const std::string& path);

/// Measurements travel as three records: "samples" ([C,H,W] complex),
/// "mask.lines" (centered column indices) and "mask.meta"
/// ([width, accel, pattern, center_count, seed_lo, seed_hi]). The loader
/// re-checks that samples vanish off the mask.
void save_kspace(const std::string& path, const KSpaceData& k);
KSpaceData load_kspace(const std::string& path);

struct ManifestEntry {
    std::string file;  // relative to the dataset directory
    uint64_t seed = 0;
};

/// `<dir>/manifest.txt`, one "file seed" pair per line.
void write_manifest(const std::string& dir, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& dir);

/// Write `count` phantom images plus the manifest into `dir` (created if
/// missing); image i uses seed base_seed + i.
std::vector<ManifestEntry> generate_phantom_dataset(const std::string& dir, int count, int size,
                                                    PhantomKind kind, uint64_t base_seed);

/// Load every manifest image and measure it under the config's sampling keys,
/// drawing a fresh mask per sample (seed mask_seed + index).
std::vector<KSpaceData> load_training_set(const std::string& dir, const RunConfig& cfg);

}  // namespace dunmri
