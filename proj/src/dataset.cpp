#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dunmri/container.hpp"
#include "dunmri/dataset.hpp"

namespace dunmri {

namespace {

double meta_at(const Tensor& meta, size_t i) { return meta.buffer()[i]; }

int meta_int(const Tensor& meta, size_t i, const char* what) {
    double v = meta_at(meta, i);
    if (v != std::floor(v)) throw std::runtime_error(std::string("mask.meta: bad ") + what);
    return static_cast<int>(v);
}

}  // namespace

void save_image(const std::string& path, const Tensor& img) {
    if (img.shape().size() != 2)
        throw std::invalid_argument("save_image: expects an [H,W] image, got " +
                                    shape_str(img.shape()));
    save_container({{"image", img}}, path);
}

Tensor load_image(const std::string& path) {
    std::vector<NamedTensor> records = load_container(path);
    const Tensor& img = find_record(records, "image");
    if (img.shape().size() != 2)
        throw std::runtime_error("image record in " + path + " is not 2-dimensional");
    return img;
}

void save_kspace(const std::string& path, const KSpaceData& k) {
    const auto& sh = k.samples.shape();
    if (sh.size() != 3 || k.samples.dtype() != Dtype::Complex)
        throw std::invalid_argument("save_kspace: samples must be complex [C,H,W]");
    if (sh[0] != k.coil_count)
        throw std::invalid_argument("save_kspace: coil_count disagrees with samples");
    std::vector<double> lines(k.mask.line_set.begin(), k.mask.line_set.end());
    const int line_count = static_cast<int>(lines.size());
    std::vector<double> meta = {static_cast<double>(k.mask.width),
                                static_cast<double>(k.mask.acceleration),
                                k.mask.pattern == MaskPattern::Equispaced ? 1.0 : 0.0,
                                static_cast<double>(k.mask.center_count),
                                static_cast<double>(k.mask.seed & 0xffffffffULL),
                                static_cast<double>(k.mask.seed >> 32)};
    save_container({{"samples", k.samples},
                    {"mask.lines", Tensor::from_buffer({line_count}, Dtype::Real, std::move(lines))},
                    {"mask.meta", Tensor::from_buffer({6}, Dtype::Real, std::move(meta))}},
                   path);
}

KSpaceData load_kspace(const std::string& path) {
    std::vector<NamedTensor> records = load_container(path);
    KSpaceData k;
    k.samples = find_record(records, "samples");
    const Tensor& lines = find_record(records, "mask.lines");
    const Tensor& meta = find_record(records, "mask.meta");
    if (meta.numel() != 6) throw std::runtime_error("mask.meta in " + path + " must hold 6 values");
    k.mask.width = meta_int(meta, 0, "width");
    k.mask.acceleration = meta_int(meta, 1, "acceleration");
    k.mask.pattern = meta_at(meta, 2) == 1.0 ? MaskPattern::Equispaced : MaskPattern::Random;
    k.mask.center_count = meta_int(meta, 3, "center_count");
    k.mask.seed = static_cast<uint64_t>(meta_at(meta, 4)) |
                  (static_cast<uint64_t>(meta_at(meta, 5)) << 32);

    const auto& sh = k.samples.shape();
    if (sh.size() != 3 || k.samples.dtype() != Dtype::Complex)
        throw std::runtime_error("samples record in " + path + " is not complex [C,H,W]");
    k.coil_count = sh[0];
    if (k.mask.width != sh[2])
        throw std::runtime_error("mask width disagrees with samples in " + path);
    int prev = -1;
    for (size_t i = 0; i < lines.buffer().size(); ++i) {
        int col = meta_int(lines, i, "line index");
        if (col <= prev || col >= k.mask.width)
            throw std::runtime_error("mask lines in " + path +
                                     " must be strictly increasing within the width");
        k.mask.line_set.push_back(col);
        prev = col;
    }
    if (k.mask.line_set.empty()) throw std::runtime_error("empty mask line set in " + path);

    // measurement invariant: nothing outside the sampled columns
    std::vector<double> w = k.mask.col_weights();
    int h = sh[1], wd = sh[2];
    for (int c = 0; c < k.coil_count; ++c)
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < wd; ++col) {
                if (w[col] != 0.0) continue;
                size_t base = ((static_cast<size_t>(c) * h + r) * wd + col) * 2;
                if (k.samples.buffer()[base] != 0.0 || k.samples.buffer()[base + 1] != 0.0)
                    throw std::runtime_error("unsampled entries in " + path + " are not zero");
            }
    return k;
}

void write_manifest(const std::string& dir, const std::vector<ManifestEntry>& entries) {
    std::string path = dir + "/manifest.txt";
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest for writing: " + path);
    for (const auto& e : entries) f << e.file << ' ' << e.seed << '\n';
    if (!f) throw std::runtime_error("failed writing manifest: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& dir) {
    std::string path = dir + "/manifest.txt";
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        if (!(ls >> e.file >> e.seed))
            throw std::runtime_error("bad manifest line '" + line + "' in " + path);
        out.push_back(std::move(e));
    }
    if (out.empty()) throw std::runtime_error("empty manifest: " + path);
    return out;
}

std::vector<ManifestEntry> generate_phantom_dataset(const std::string& dir, int count, int size,
                                                    PhantomKind kind, uint64_t base_seed) {
    if (count < 1) throw std::invalid_argument("phantom dataset needs count >= 1");
    std::filesystem::create_directories(dir);
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "phantom_%03d.dunt", i);
        uint64_t seed = base_seed + static_cast<uint64_t>(i);
        save_image(dir + "/" + name, make_phantom(size, size, kind, seed));
        entries.push_back({name, seed});
    }
    write_manifest(dir, entries);
    return entries;
}

std::vector<KSpaceData> load_training_set(const std::string& dir, const RunConfig& cfg) {
    std::vector<ManifestEntry> entries = read_manifest(dir);
    MaskPattern pattern = parse_mask_pattern(cfg.mask_pattern);
    std::vector<KSpaceData> out;
    for (size_t i = 0; i < entries.size(); ++i) {
        Tensor img = load_image(dir + "/" + entries[i].file);
        if (img.shape() != std::vector<int>{cfg.height, cfg.width})
            throw std::runtime_error("image " + entries[i].file + " is " +
                                     shape_str(img.shape()) + ", config wants [" +
                                     std::to_string(cfg.height) + "," +
                                     std::to_string(cfg.width) + "]");
        SamplingMask mask = make_mask(cfg.width, cfg.accel, pattern, cfg.mask_seed + i);
        out.push_back(measure(img, std::nullopt, mask));
    }
    return out;
}

}  // namespace dunmri
