#include <cmath>
#include <stdexcept>

#include "dunmri/model.hpp"
#include "dunmri/ops.hpp"
#include "dunmri/rng.hpp"

namespace dunmri {

namespace op = ops;

namespace {

constexpr int kLevels = 4;
constexpr double kNormEps = 1e-5;
constexpr double kLeakSlope = 0.2;

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int enc_in(const ModelConfig& c, int l) { return l == 0 ? 2 : c.base_channels << (l - 1); }
int enc_out(const ModelConfig& c, int l) { return c.base_channels << l; }
int dec_up(const ModelConfig& c, int l) { return enc_out(c, l); }
int dec_out(const ModelConfig& c, int l) { return l == 0 ? c.base_channels : enc_out(c, l - 1); }

std::string pname(int stage, const std::string& suffix) {
    return "stage" + std::to_string(stage) + "." + suffix;
}

std::string ename(int stage, int level, const std::string& suffix) {
    return pname(stage, "enc" + std::to_string(level) + "." + suffix);
}

std::string dname(int stage, int level, const std::string& suffix) {
    return pname(stage, "dec" + std::to_string(level) + "." + suffix);
}

double softplus_inverse(double v) { return std::log(std::expm1(v)); }

Tensor he_conv(std::mt19937_64& g, int cout, int cin, int k) {
    std::vector<double> buf(static_cast<size_t>(cout) * cin * k * k);
    double s = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    for (double& v : buf) v = s * gaussian(g);
    return Tensor::from_buffer({cout, cin, k, k}, Dtype::Real, std::move(buf));
}

void push(Model& m, const std::string& name, Tensor value) {
    m.names.push_back(name);
    m.params.emplace(name, std::move(value));
}

}  // namespace

void ModelConfig::validate() const {
    if (stages < 0) throw std::invalid_argument("stages must be >= 0");
    if (base_channels < 1) throw std::invalid_argument("base_channels must be >= 1");
    if (!power_of_two(height) || !power_of_two(width))
        throw std::invalid_argument("model dims must be powers of two, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    int min_dim = 1 << kLevels;
    if (height < min_dim || width < min_dim)
        throw std::invalid_argument("model dims must be at least " + std::to_string(min_dim) +
                                    " for " + std::to_string(kLevels) + " pooling levels");
}

const Tensor& Model::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

size_t Model::total_parameter_doubles() const {
    size_t n = 0;
    for (const auto& name : names) n += param(name).buffer_size();
    return n;
}

size_t expected_parameter_doubles(const ModelConfig& cfg) {
    size_t per_stage = 0;
    for (int l = 0; l < kLevels; ++l) {
        size_t i = enc_in(cfg, l), o = enc_out(cfg, l);
        size_t h = static_cast<size_t>(cfg.height) >> l, w = static_cast<size_t>(cfg.width) >> l;
        per_stage += o * i * 9;          // spatial conv (no bias: norm follows)
        per_stage += 2 * o;              // norm affine
        per_stage += 2 * i * h * w;      // complex global filter
        per_stage += o * (o + i) * 9 + o;  // fusion conv
        per_stage += o * i;              // 1x1 projection
    }
    for (int l = 0; l < kLevels; ++l) {
        size_t u = dec_up(cfg, l), o = dec_out(cfg, l);
        per_stage += u * u * 4;          // upsampling weights
        per_stage += o * 2 * u * 9;      // post-concat conv (no bias: norm follows)
        per_stage += 2 * o;              // norm affine
    }
    per_stage += 2 * static_cast<size_t>(cfg.base_channels) + 2;  // final 1x1
    per_stage += 3;                                               // raw tau/sigma/theta
    return per_stage * static_cast<size_t>(cfg.stages);
}

Model init_model(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    std::mt19937_64 g(mix_seed({cfg.init_seed, 0x696e6974ULL}));
    for (int k = 0; k < cfg.stages; ++k) {
        for (int l = 0; l < kLevels; ++l) {
            int i = enc_in(cfg, l), o = enc_out(cfg, l);
            int h = cfg.height >> l, w = cfg.width >> l;
            push(m, ename(k, l, "sp.conv.w"), he_conv(g, o, i, 3));
            push(m, ename(k, l, "sp.norm.gamma"), Tensor::full({o}, 1.0));
            push(m, ename(k, l, "sp.norm.beta"), Tensor::zeros({o}));
            // identity start for the frequency branch: filter = 1 + 0i
            Tensor filt = Tensor::zeros({i, h, w}, Dtype::Complex);
            for (size_t t = 0; t < filt.buffer_size(); t += 2) filt.data()[t] = 1.0;
            push(m, ename(k, l, "freq.filter"), filt);
            push(m, ename(k, l, "fuse.w"), he_conv(g, o, o + i, 3));
            push(m, ename(k, l, "fuse.b"), Tensor::zeros({o}));
            push(m, ename(k, l, "proj.w"), he_conv(g, o, i, 1));
        }
        for (int l = kLevels - 1; l >= 0; --l) {
            int u = dec_up(cfg, l), o = dec_out(cfg, l);
            // nearest-neighbour start: each channel copies itself into its block
            Tensor up = Tensor::zeros({u, u, 2, 2});
            for (int ch = 0; ch < u; ++ch)
                for (int t = 0; t < 4; ++t)
                    up.data()[(static_cast<size_t>(ch) * u + ch) * 4 + t] = 1.0;
            push(m, dname(k, l, "up.w"), up);
            push(m, dname(k, l, "conv.w"), he_conv(g, o, 2 * u, 3));
            push(m, dname(k, l, "norm.gamma"), Tensor::full({o}, 1.0));
            push(m, dname(k, l, "norm.beta"), Tensor::zeros({o}));
        }
        if (cfg.final_zero) {
            push(m, pname(k, "final.w"), Tensor::zeros({2, cfg.base_channels, 1, 1}));
        } else {
            // damped he scale: starts near the classical iterate while every
            // group still carries gradient (an exact zero would freeze the
            // optimizer moments of everything upstream)
            Tensor fw = he_conv(g, 2, cfg.base_channels, 1);
            for (size_t t = 0; t < fw.buffer_size(); ++t) fw.data()[t] *= 0.01;
            push(m, pname(k, "final.w"), fw);
        }
        push(m, pname(k, "final.b"), Tensor::zeros({2}));
        push(m, pname(k, "raw_tau"), Tensor::scalar(softplus_inverse(0.5)));
        push(m, pname(k, "raw_sigma"), Tensor::scalar(softplus_inverse(0.5)));
        push(m, pname(k, "raw_theta"), Tensor::scalar(softplus_inverse(1.0)));
    }
    if (m.total_parameter_doubles() != expected_parameter_doubles(cfg))
        throw std::logic_error("parameter registry does not match the size table");
    return m;
}

void attach_leaves(Model& m, Tape& t) {
    for (const auto& name : m.names) m.params[name] = t.leaf(m.params[name]);
}

Tensor stage_tau(const Model& m, int stage) {
    return op::softplus(m.param(pname(stage, "raw_tau")));
}
Tensor stage_sigma(const Model& m, int stage) {
    return op::softplus(m.param(pname(stage, "raw_sigma")));
}
Tensor stage_theta(const Model& m, int stage) {
    return op::softplus(m.param(pname(stage, "raw_theta")));
}

Tensor sffe_block(const Model& m, int stage, int level, const Tensor& f_in) {
    if (stage < 0 || stage >= m.cfg.stages)
        throw std::invalid_argument("sffe_block: stage " + std::to_string(stage) +
                                    " out of range");
    if (level < 0 || level >= kLevels)
        throw std::invalid_argument("sffe_block: level " + std::to_string(level) +
                                    " out of range");
    int i = enc_in(m.cfg, level);
    int h = m.cfg.height >> level, w = m.cfg.width >> level;
    if (f_in.dtype() != Dtype::Real || f_in.shape() != std::vector<int>{i, h, w})
        throw std::invalid_argument("sffe_block: expected real [" + std::to_string(i) + "," +
                                    std::to_string(h) + "," + std::to_string(w) + "], got " +
                                    shape_str(f_in.shape()));
    Tensor sp = op::conv2d(f_in, m.param(ename(stage, level, "sp.conv.w")), std::nullopt, 1);
    sp = op::instance_norm(sp, m.param(ename(stage, level, "sp.norm.gamma")),
                           m.param(ename(stage, level, "sp.norm.beta")), kNormEps);
    sp = op::leaky_relu(sp, kLeakSlope);
    Tensor fr = op::fft2(op::to_complex(f_in));
    fr = op::cmul(fr, m.param(ename(stage, level, "freq.filter")));
    fr = op::real_part(op::ifft2(fr));
    Tensor fused = op::conv2d(op::concat_channels(sp, fr),
                              m.param(ename(stage, level, "fuse.w")),
                              m.param(ename(stage, level, "fuse.b")), 1);
    Tensor res = op::conv2d(f_in, m.param(ename(stage, level, "proj.w")), std::nullopt, 0);
    return op::add(fused, res);
}

Tensor proxnet_apply(const Model& m, int stage, const Tensor& v) {
    if (v.dtype() != Dtype::Real ||
        v.shape() != std::vector<int>{2, m.cfg.height, m.cfg.width})
        throw std::invalid_argument("proxnet_apply: expected real [2," +
                                    std::to_string(m.cfg.height) + "," +
                                    std::to_string(m.cfg.width) + "], got " +
                                    shape_str(v.shape()));
    Tensor skips[kLevels];
    Tensor cur = v;
    for (int l = 0; l < kLevels; ++l) {
        skips[l] = sffe_block(m, stage, l, cur);
        cur = op::avg_pool2(skips[l]);
    }
    for (int l = kLevels - 1; l >= 0; --l) {
        cur = op::transpose_conv_up2(cur, m.param(dname(stage, l, "up.w")), std::nullopt);
        cur = op::concat_channels(cur, skips[l]);
        cur = op::conv2d(cur, m.param(dname(stage, l, "conv.w")), std::nullopt, 1);
        cur = op::instance_norm(cur, m.param(dname(stage, l, "norm.gamma")),
                                m.param(dname(stage, l, "norm.beta")), kNormEps);
        cur = op::leaky_relu(cur, kLeakSlope);
    }
    Tensor out = op::conv2d(cur, m.param(pname(stage, "final.w")),
                            m.param(pname(stage, "final.b")), 0);
    return op::channels_to_complex(out);
}

namespace {

Tensor apply_forward(const Tensor& x, const KSpaceData& data,
                     const std::optional<Tensor>& maps) {
    return maps ? forward_multi(x, *maps, data.mask) : forward_single(x, data.mask);
}

Tensor apply_adjoint(const Tensor& k, const KSpaceData& data,
                     const std::optional<Tensor>& maps) {
    return maps ? adjoint_multi(k, *maps, data.mask) : adjoint_single(k, data.mask);
}

}  // namespace

StageStep stage_forward(const Model& m, int stage, const Tensor& x, const Tensor& y,
                        const KSpaceData& data, const std::optional<Tensor>& maps) {
    Tensor grad = apply_adjoint(y, data, maps);
    Tensor xbar = op::sub(x, op::scale_by(stage_tau(m, stage), grad));
    Tensor corr = proxnet_apply(m, stage, op::complex_to_channels(xbar));
    Tensor x_next = op::add(x, corr);
    Tensor z = op::add(x_next, op::scale_by(stage_theta(m, stage), op::sub(x_next, x)));
    Tensor sigma = stage_sigma(m, stage);
    Tensor num = op::add(y, op::scale_by(sigma, op::sub(apply_forward(z, data, maps),
                                                        data.samples)));
    Tensor y_next = op::scale_by(op::reciprocal(op::add_const(sigma, 1.0)), num);
    return {x_next, y_next};
}

Tensor model_forward(const Model& m, const KSpaceData& data,
                     const std::optional<Tensor>& maps, bool dc_replace) {
    const auto& s = data.samples.shape();
    if (s.size() != 3 || s[1] != m.cfg.height || s[2] != m.cfg.width)
        throw std::invalid_argument("model_forward: k-space " + shape_str(s) +
                                    " does not match the model dims");
    if (!maps && data.coil_count != 1)
        throw std::invalid_argument("model_forward: multi-coil data needs sensitivity maps");
    if (maps && maps->shape() != s)
        throw std::invalid_argument("model_forward: maps " + shape_str(maps->shape()) +
                                    " vs k-space " + shape_str(s));
    Tensor x = apply_adjoint(data.samples, data, maps);
    Tensor y = Tensor::zeros(s, Dtype::Complex);
    for (int k = 0; k < m.cfg.stages; ++k) {
        StageStep next = stage_forward(m, k, x, y, data, maps);
        x = next.x;
        y = next.y;
    }
    if (dc_replace)
        x = op::add(x, apply_adjoint(op::sub(data.samples, apply_forward(x, data, maps)),
                                     data, maps));
    return x;
}

void save_checkpoint(const std::string& path, const Model& m,
                     const std::vector<NamedTensor>& extra) {
    std::vector<NamedTensor> recs;
    recs.reserve(m.names.size() + extra.size() + 1);
    Tensor cfg = Tensor::from_buffer(
        {7}, Dtype::Real,
        {static_cast<double>(m.cfg.stages), static_cast<double>(m.cfg.base_channels),
         static_cast<double>(m.cfg.height), static_cast<double>(m.cfg.width),
         static_cast<double>(m.cfg.init_seed & 0xffffffffULL),
         static_cast<double>(m.cfg.init_seed >> 32), m.cfg.final_zero ? 1.0 : 0.0});
    recs.push_back({"model.config", cfg});
    for (const auto& name : m.names) recs.push_back({name, m.param(name).detached()});
    for (const auto& r : extra) recs.push_back(r);
    save_container(recs, path);
}

Model load_checkpoint(const std::string& path, std::vector<NamedTensor>* extra) {
    auto recs = load_container(path);
    if (!has_record(recs, "model.config"))
        throw std::runtime_error("not a model checkpoint: " + path);
    const Tensor& c = find_record(recs, "model.config");
    if (c.dtype() != Dtype::Real || c.buffer_size() != 7)
        throw std::runtime_error("malformed model.config record in " + path);
    ModelConfig cfg;
    cfg.stages = static_cast<int>(c.buffer()[0]);
    cfg.base_channels = static_cast<int>(c.buffer()[1]);
    cfg.height = static_cast<int>(c.buffer()[2]);
    cfg.width = static_cast<int>(c.buffer()[3]);
    cfg.init_seed = static_cast<uint64_t>(c.buffer()[4]) |
                    (static_cast<uint64_t>(c.buffer()[5]) << 32);
    cfg.final_zero = c.buffer()[6] != 0.0;
    Model m = init_model(cfg);
    for (const auto& name : m.names) {
        const Tensor& stored = find_record(recs, name);
        const Tensor& proto = m.param(name);
        if (stored.shape() != proto.shape() || stored.dtype() != proto.dtype())
            throw std::runtime_error("checkpoint parameter '" + name +
                                     "' has the wrong shape in " + path);
        m.params[name] = stored;
    }
    if (extra) {
        extra->clear();
        for (auto& r : recs)
            if (r.name != "model.config" && !m.params.count(r.name)) extra->push_back(r);
    }
    return m;
}

}  // namespace dunmri
