#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dunmri/mri.hpp"
#include "dunmri/ops.hpp"
#include "dunmri/rng.hpp"

namespace dunmri {

namespace op = ops;

namespace {

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void require_image(const Tensor& x, const SamplingMask& m, const char* who) {
    if (x.dtype() != Dtype::Complex || x.shape().size() != 2)
        throw std::invalid_argument(std::string(who) + ": complex [H,W] image required, got " +
                                    shape_str(x.shape()));
    if (x.shape()[1] != m.width)
        throw std::invalid_argument(std::string(who) + ": image width " +
                                    std::to_string(x.shape()[1]) + " does not match mask width " +
                                    std::to_string(m.width));
}

void require_kspace(const Tensor& k, const SamplingMask& m, const char* who) {
    if (k.dtype() != Dtype::Complex || k.shape().size() != 3)
        throw std::invalid_argument(std::string(who) + ": complex [C,H,W] k-space required, got " +
                                    shape_str(k.shape()));
    if (k.shape()[2] != m.width)
        throw std::invalid_argument(std::string(who) + ": k-space width " +
                                    std::to_string(k.shape()[2]) + " does not match mask width " +
                                    std::to_string(m.width));
}

// 32% of the line budget goes to the fully sampled center; the block is
// forced even so it sits symmetrically about DC.
int center_allocation(int budget) {
    int c = static_cast<int>(std::lround(0.32 * budget));
    if (c % 2 != 0) ++c;
    return std::max(c, 2);
}

std::vector<double> center_weights(const SamplingMask& m) {
    std::vector<double> w(m.width, 0.0);
    int lo = m.width / 2 - m.center_count / 2;
    for (int s = lo; s < lo + m.center_count; ++s) w[(s + m.width / 2) % m.width] = 1.0;
    return w;
}

}  // namespace

MaskPattern parse_mask_pattern(const std::string& s) {
    if (s == "random") return MaskPattern::Random;
    if (s == "equispaced") return MaskPattern::Equispaced;
    throw std::invalid_argument("unknown mask pattern '" + s + "' (random|equispaced)");
}

std::string mask_pattern_name(MaskPattern p) {
    return p == MaskPattern::Random ? "random" : "equispaced";
}

std::vector<double> SamplingMask::col_weights() const {
    std::vector<double> w(width, 0.0);
    for (int s : line_set) w[(s + width / 2) % width] = 1.0;
    return w;
}

bool SamplingMask::contains_centered(int col) const {
    return std::binary_search(line_set.begin(), line_set.end(), col);
}

SamplingMask make_mask(int width, int acceleration, MaskPattern pattern, uint64_t seed) {
    if (!power_of_two(width) || width < 4)
        throw std::invalid_argument("mask width must be a power of two >= 4, got " +
                                    std::to_string(width));
    if (acceleration != 1 && acceleration != 4 && acceleration != 8 && acceleration != 12)
        throw std::invalid_argument("acceleration must be one of 1 (debug), 4, 8, 12");
    SamplingMask m;
    m.width = width;
    m.acceleration = acceleration;
    m.pattern = pattern;
    m.seed = seed;
    if (acceleration == 1) {
        m.center_count = width;
        m.line_set.resize(width);
        for (int i = 0; i < width; ++i) m.line_set[i] = i;
        return m;
    }
    int budget = static_cast<int>(std::lround(static_cast<double>(width) / acceleration));
    int center = center_allocation(budget);
    if (center > budget)
        throw std::invalid_argument("line budget " + std::to_string(budget) +
                                    " smaller than center allocation " + std::to_string(center));
    m.center_count = center;
    int lo = width / 2 - center / 2;
    for (int s = lo; s < lo + center; ++s) m.line_set.push_back(s);
    std::vector<int> pool;
    for (int s = 0; s < width; ++s)
        if (s < lo || s >= lo + center) pool.push_back(s);
    int extra = budget - center;
    if (extra > static_cast<int>(pool.size()))
        throw std::invalid_argument("line budget exceeds available columns");
    if (pattern == MaskPattern::Random) {
        std::mt19937_64 rng(seed);
        for (int j = 0; j < extra; ++j) {
            size_t pick = j + rng() % (pool.size() - j);
            std::swap(pool[j], pool[pick]);
            m.line_set.push_back(pool[j]);
        }
    } else {
        for (int j = 0; j < extra; ++j)
            m.line_set.push_back(pool[static_cast<size_t>(j) * pool.size() / extra]);
    }
    std::sort(m.line_set.begin(), m.line_set.end());
    return m;
}

void save_mask(const SamplingMask& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open mask file for writing: " + path);
    f << m.width << ' ' << m.acceleration << ' ' << mask_pattern_name(m.pattern) << ' ' << m.seed
      << '\n';
    for (size_t i = 0; i < m.line_set.size(); ++i) f << (i ? "," : "") << m.line_set[i];
    f << '\n';
    if (!f) throw std::runtime_error("failed writing mask file: " + path);
}

SamplingMask load_mask(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open mask file: " + path);
    std::string header, lines;
    if (!std::getline(f, header) || !std::getline(f, lines))
        throw std::runtime_error("truncated mask file: " + path);
    std::istringstream hs(header);
    SamplingMask m;
    std::string pat;
    if (!(hs >> m.width >> m.acceleration >> pat >> m.seed))
        throw std::runtime_error("bad mask header in " + path);
    m.pattern = parse_mask_pattern(pat);
    std::istringstream ls(lines);
    std::string tok;
    while (std::getline(ls, tok, ','))
        if (!tok.empty()) m.line_set.push_back(std::stoi(tok));
    if (m.line_set.empty()) throw std::runtime_error("empty line set in " + path);
    std::sort(m.line_set.begin(), m.line_set.end());
    if (static_cast<int>(m.line_set.size()) == m.width) {
        m.center_count = m.width;
    } else {
        m.center_count = center_allocation(static_cast<int>(m.line_set.size()));
        int lo = m.width / 2 - m.center_count / 2;
        for (int s = lo; s < lo + m.center_count; ++s)
            if (!m.contains_centered(s))
                throw std::runtime_error("mask file " + path +
                                         " is missing part of its center block");
    }
    return m;
}

Tensor forward_single(const Tensor& x, const SamplingMask& m) {
    require_image(x, m, "forward_single");
    Tensor k = op::mul_columns(op::fft2(x), m.col_weights());
    return op::reshape(k, {1, x.shape()[0], x.shape()[1]});
}

Tensor adjoint_single(const Tensor& k, const SamplingMask& m) {
    require_kspace(k, m, "adjoint_single");
    if (k.shape()[0] != 1)
        throw std::invalid_argument("adjoint_single: expected a single coil, got " +
                                    shape_str(k.shape()));
    Tensor plane = op::reshape(k, {k.shape()[1], k.shape()[2]});
    return op::ifft2(op::mul_columns(plane, m.col_weights()));
}

Tensor forward_multi(const Tensor& x, const Tensor& maps, const SamplingMask& m) {
    require_image(x, m, "forward_multi");
    return op::mul_columns(op::fft2(op::coil_expand(x, maps)), m.col_weights());
}

Tensor adjoint_multi(const Tensor& k, const Tensor& maps, const SamplingMask& m) {
    require_kspace(k, m, "adjoint_multi");
    if (maps.shape() != k.shape())
        throw std::invalid_argument("adjoint_multi: maps " + shape_str(maps.shape()) +
                                    " vs k-space " + shape_str(k.shape()));
    return op::coil_combine(op::ifft2(op::mul_columns(k, m.col_weights())), maps);
}

KSpaceData measure(const Tensor& x, const std::optional<Tensor>& maps, const SamplingMask& m) {
    Tensor k = maps ? forward_multi(x, *maps, m) : forward_single(x, m);
    return KSpaceData{k, m, k.shape()[0]};
}

Tensor estimate_sensitivities(const KSpaceData& k) {
    if (k.mask.center_count < 4)
        throw std::invalid_argument("sensitivity calibration needs center_count >= 4, mask has " +
                                    std::to_string(k.mask.center_count));
    Tensor lowres = op::ifft2(op::mul_columns(k.samples.detached(), center_weights(k.mask)));
    int coils = lowres.shape()[0];
    size_t plane = static_cast<size_t>(lowres.shape()[1]) * lowres.shape()[2];
    std::vector<double> rss(plane, 0.0);
    const double* pl = lowres.data();
    for (int c = 0; c < coils; ++c)
        for (size_t i = 0; i < plane; ++i) {
            double re = pl[(static_cast<size_t>(c) * plane + i) * 2];
            double im = pl[(static_cast<size_t>(c) * plane + i) * 2 + 1];
            rss[i] += re * re + im * im;
        }
    double peak = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        rss[i] = std::sqrt(rss[i]);
        peak = std::max(peak, rss[i]);
    }
    if (peak == 0.0) throw std::invalid_argument("all-zero calibration region");
    double floor = 0.05 * peak;
    Tensor maps = Tensor::zeros(lowres.shape(), Dtype::Complex);
    double* pm = maps.data();
    for (int c = 0; c < coils; ++c)
        for (size_t i = 0; i < plane; ++i) {
            if (rss[i] < floor) continue;
            pm[(static_cast<size_t>(c) * plane + i) * 2] =
                pl[(static_cast<size_t>(c) * plane + i) * 2] / rss[i];
            pm[(static_cast<size_t>(c) * plane + i) * 2 + 1] =
                pl[(static_cast<size_t>(c) * plane + i) * 2 + 1] / rss[i];
        }
    return maps;
}

Tensor make_synthetic_maps(int coils, int h, int w, uint64_t seed) {
    if (coils < 1 || h < 1 || w < 1)
        throw std::invalid_argument("make_synthetic_maps: bad dimensions");
    std::mt19937_64 rng(mix_seed({0x6d617073ULL, seed}));
    Tensor maps = Tensor::zeros({coils, h, w}, Dtype::Complex);
    double* pm = maps.data();
    size_t plane = static_cast<size_t>(h) * w;
    std::vector<double> mag(static_cast<size_t>(coils) * plane);
    for (int c = 0; c < coils; ++c) {
        // one broad Gaussian lobe per coil, centered on a ring around the image
        double ang = 2.0 * std::numbers::pi * (c + uniform(rng, -0.15, 0.15)) / coils;
        double cy = h / 2.0 + 0.38 * h * std::sin(ang);
        double cx = w / 2.0 + 0.38 * w * std::cos(ang);
        double sy = uniform(rng, 0.45, 0.8) * h;
        double sx = uniform(rng, 0.45, 0.8) * w;
        double pr = uniform(rng, -1.5, 1.5) / h;   // gentle linear phase ramp
        double pc = uniform(rng, -1.5, 1.5) / w;
        double p0 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col) {
                double dy = (r - cy) / sy, dx = (col - cx) / sx;
                double g = std::exp(-0.5 * (dy * dy + dx * dx)) + 0.05;
                double ph = p0 + 2.0 * std::numbers::pi * (pr * r + pc * col);
                size_t i = static_cast<size_t>(c) * plane + static_cast<size_t>(r) * w + col;
                mag[i] = g;
                pm[2 * i] = g * std::cos(ph);
                pm[2 * i + 1] = g * std::sin(ph);
            }
    }
    for (size_t i = 0; i < plane; ++i) {
        double s = 0.0;
        for (int c = 0; c < coils; ++c) {
            double m = mag[static_cast<size_t>(c) * plane + i];
            s += m * m;
        }
        s = std::sqrt(s);
        for (int c = 0; c < coils; ++c) {
            pm[(static_cast<size_t>(c) * plane + i) * 2] /= s;
            pm[(static_cast<size_t>(c) * plane + i) * 2 + 1] /= s;
        }
    }
    return maps;
}

PhantomKind parse_phantom_kind(const std::string& s) {
    if (s == "shepp-logan-like") return PhantomKind::SheppLoganLike;
    if (s == "random-ellipses") return PhantomKind::RandomEllipses;
    throw std::invalid_argument("unknown phantom kind '" + s +
                                "' (shepp-logan-like|random-ellipses)");
}

std::string phantom_kind_name(PhantomKind k) {
    return k == PhantomKind::SheppLoganLike ? "shepp-logan-like" : "random-ellipses";
}

namespace {

struct Ellipse {
    double cy, cx, ry, rx, theta, value;  // centers/radii in [0,1] image units
};

void paint(std::vector<double>& img, int h, int w, const Ellipse& e) {
    double ct = std::cos(e.theta), st = std::sin(e.theta);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double dy = (r + 0.5) / h - e.cy;
            double dx = (c + 0.5) / w - e.cx;
            double u = dx * ct + dy * st;
            double v = -dx * st + dy * ct;
            if ((u / e.rx) * (u / e.rx) + (v / e.ry) * (v / e.ry) <= 1.0)
                img[static_cast<size_t>(r) * w + c] += e.value;
        }
}

}  // namespace

Tensor make_phantom(int h, int w, PhantomKind kind, uint64_t seed, bool smooth_phase) {
    if (!power_of_two(h) || !power_of_two(w))
        throw std::invalid_argument("phantom dims must be powers of two, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
    std::mt19937_64 rng(mix_seed({0x7068616eULL, seed}));
    std::vector<double> img(static_cast<size_t>(h) * w, 0.0);
    if (kind == PhantomKind::SheppLoganLike) {
        const Ellipse parts[] = {
            {0.5, 0.5, 0.44, 0.33, 0.0, 0.85},    // head outline
            {0.5, 0.5, 0.40, 0.29, 0.0, 0.10},    // brain matter
            {0.46, 0.40, 0.14, 0.05, -0.3, -0.35},  // left ventricle
            {0.46, 0.60, 0.14, 0.05, 0.3, -0.35},   // right ventricle
            {0.72, 0.5, 0.05, 0.06, 0.0, -0.25},
            {0.34, 0.5, 0.03, 0.03, 0.0, 0.15},
            {0.60, 0.5, 0.023, 0.023, 0.0, 0.15},
        };
        for (const Ellipse& e : parts) paint(img, h, w, e);
    } else {
        int n = 5 + static_cast<int>(rng() % 8);
        Ellipse base{uniform(rng, 0.42, 0.58), uniform(rng, 0.42, 0.58), uniform(rng, 0.24, 0.38),
                     uniform(rng, 0.24, 0.38), uniform(rng, 0.0, std::numbers::pi),
                     uniform(rng, 0.45, 0.8)};
        paint(img, h, w, base);
        for (int i = 1; i < n; ++i) {
            Ellipse e{uniform(rng, 0.2, 0.8),   uniform(rng, 0.2, 0.8),
                      uniform(rng, 0.04, 0.18), uniform(rng, 0.04, 0.18),
                      uniform(rng, 0.0, std::numbers::pi),
                      uniform01(rng) < 0.35 ? uniform(rng, -0.4, -0.1) : uniform(rng, 0.1, 0.5)};
            paint(img, h, w, e);
        }
    }
    for (double& v : img) v = std::clamp(v, 0.0, 1.0);
    Tensor out = Tensor::zeros({h, w}, Dtype::Complex);
    double* po = out.data();
    if (smooth_phase) {
        double a1 = uniform(rng, -0.6, 0.6), a2 = uniform(rng, -0.6, 0.6);
        double p1 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        double p2 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                size_t i = static_cast<size_t>(r) * w + c;
                double ph = a1 * std::sin(2.0 * std::numbers::pi * r / h + p1) +
                            a2 * std::sin(2.0 * std::numbers::pi * c / w + p2);
                po[2 * i] = img[i] * std::cos(ph);
                po[2 * i + 1] = img[i] * std::sin(ph);
            }
    } else {
        for (size_t i = 0; i < img.size(); ++i) po[2 * i] = img[i];
    }
    return out;
}

KSpaceData add_kspace_noise(const KSpaceData& k, double sigma_n, uint64_t seed) {
    if (sigma_n < 0.0) throw std::invalid_argument("sigma_n must be >= 0");
    if (sigma_n == 0.0) return k;
    std::vector<double> wts = k.mask.col_weights();
    int coils = k.samples.shape()[0], h = k.samples.shape()[1], w = k.samples.shape()[2];
    const double* pk = k.samples.data();
    double mean_mag = 0.0;
    size_t count = 0;
    for (int c = 0; c < coils; ++c)
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col) {
                if (wts[col] == 0.0) continue;
                size_t i = (static_cast<size_t>(c) * h + r) * static_cast<size_t>(w) + col;
                mean_mag += std::hypot(pk[2 * i], pk[2 * i + 1]);
                ++count;
            }
    mean_mag /= static_cast<double>(count);
    double per_comp = sigma_n * mean_mag / std::sqrt(2.0);
    std::mt19937_64 rng(mix_seed({0x6e6f6973ULL, seed}));
    Tensor noisy = Tensor::from_buffer(k.samples.shape(), Dtype::Complex, k.samples.buffer());
    double* pn = noisy.data();
    for (int c = 0; c < coils; ++c)
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col) {
                if (wts[col] == 0.0) continue;
                size_t i = (static_cast<size_t>(c) * h + r) * static_cast<size_t>(w) + col;
                pn[2 * i] += per_comp * gaussian(rng);
                pn[2 * i + 1] += per_comp * gaussian(rng);
            }
    return KSpaceData{noisy, k.mask, k.coil_count};
}

}  // namespace dunmri
