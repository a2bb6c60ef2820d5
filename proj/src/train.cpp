#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "dunmri/ops.hpp"
#include "dunmri/rng.hpp"
#include "dunmri/train.hpp"

namespace dunmri {

namespace op = ops;

AdamState init_adam(const Model& m) {
    AdamState s;
    for (const auto& name : m.names) {
        const Tensor& p = m.param(name);
        s.m1.emplace(name, Tensor::zeros(p.shape(), p.dtype()));
        s.m2.emplace(name, Tensor::zeros(p.shape(), p.dtype()));
    }
    return s;
}

void adam_step(Model& m, AdamState& s,
               const std::unordered_map<std::string, std::vector<double>>& grads, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be > 0");
    s.t += 1;
    double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    for (const auto& name : m.names) {
        const Tensor& p = m.param(name);
        size_t n = p.buffer_size();
        auto git = grads.find(name);
        if (git != grads.end() && git->second.size() != n)
            throw std::invalid_argument("adam_step: gradient size mismatch for " + name);
        Tensor& mom1 = s.m1.at(name);
        Tensor& mom2 = s.m2.at(name);
        if (mom1.buffer_size() != n)
            throw std::invalid_argument("adam_step: state size mismatch for " + name);
        std::vector<double> next(p.buffer());
        for (size_t i = 0; i < n; ++i) {
            double g = git != grads.end() ? git->second[i] : 0.0;
            double a = mom1.data()[i] = s.beta1 * mom1.data()[i] + (1.0 - s.beta1) * g;
            double b = mom2.data()[i] = s.beta2 * mom2.data()[i] + (1.0 - s.beta2) * g * g;
            next[i] -= lr * (a / bc1) / (std::sqrt(b / bc2) + s.eps);
        }
        m.params[name] = Tensor::from_buffer(p.shape(), p.dtype(), std::move(next));
    }
}

namespace {

void validate_train_inputs(const Model& m, const std::vector<KSpaceData>& dataset,
                           const TrainOptions& cfg) {
    cfg.weights.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    if (cfg.lr <= 0.0) throw std::invalid_argument("train: lr must be > 0");
    if (cfg.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    if (cfg.start_epoch < 0 || cfg.epochs < cfg.start_epoch)
        throw std::invalid_argument("train: need 0 <= start_epoch <= epochs");
    if (cfg.rho_min < 0.2 || cfg.rho_max > 0.8 || cfg.rho_min > cfg.rho_max)
        throw std::invalid_argument("train: need 0.2 <= rho_min <= rho_max <= 0.8");
    for (const auto& d : dataset) {
        if (d.coil_count != 1)
            throw std::invalid_argument("train: only single-coil measurements are supported");
        const auto& sh = d.samples.shape();
        if (sh.size() != 3 || sh[1] != m.cfg.height || sh[2] != m.cfg.width)
            throw std::invalid_argument("train: sample " + shape_str(sh) +
                                        " does not match the model dims");
    }
}

}  // namespace

TrainResult train(Model& m, AdamState& opt, const std::vector<KSpaceData>& dataset,
                  const TrainOptions& cfg) {
    validate_train_inputs(m, dataset, cfg);
    TrainResult result;
    int n = static_cast<int>(dataset.size());
    int steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
    for (int epoch = cfg.start_epoch; epoch < cfg.epochs; ++epoch) {
        for (int i0 = 0; i0 < n; i0 += cfg.batch) {
            auto t_start = std::chrono::steady_clock::now();
            int bn = std::min(cfg.batch, n - i0);

            // full-input branch first, off the tape: its value enters the
            // loss through a stop-gradient only
            std::vector<Tensor> x_rec(bn);
            for (int b = 0; b < bn; ++b)
                x_rec[b] = model_forward(m, dataset[i0 + b], std::nullopt, cfg.dc_replace);

            Tape tape;
            Model mt = m;
            attach_leaves(mt, tape);
            Tensor batch_loss;
            StepRecord rec;
            for (int b = 0; b < bn; ++b) {
                int idx = i0 + b;
                std::mt19937_64 rg(mix_seed({cfg.seed, 0x72686fULL,
                                             static_cast<uint64_t>(epoch),
                                             static_cast<uint64_t>(idx)}));
                PartitionSpec pspec;
                pspec.rho = uniform(rg, cfg.rho_min, cfg.rho_max);
                pspec.seed = mix_seed({cfg.seed, 0x70617274ULL, static_cast<uint64_t>(epoch),
                                       static_cast<uint64_t>(idx)});
                KSpaceData child = partition(dataset[idx], pspec);
                Tensor x_p = model_forward(mt, child, std::nullopt, cfg.dc_replace);
                LossBreakdown lb = loss_total(x_p, x_rec[b], dataset[idx], cfg.weights);
                batch_loss = b == 0 ? lb.total : op::add(batch_loss, lb.total);
                rec.k_rev += lb.k_rev / bn;
                rec.k_reg += lb.k_reg / bn;
                rec.img_rev += lb.img_rev / bn;
                rec.img_reg += lb.img_reg / bn;
                rec.total += lb.value / bn;
            }
            tape.backward(op::scale(batch_loss, 1.0 / bn));

            std::unordered_map<std::string, std::vector<double>> grads;
            for (const auto& name : m.names)
                grads.emplace(name, tape.grad_or_zero(mt.param(name)));
            adam_step(m, opt, grads, cfg.lr);

            rec.step = epoch * steps_per_epoch + i0 / cfg.batch;
            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t_start)
                              .count();
            result.history.push_back(rec);
        }
    }
    if (!cfg.history_csv.empty()) save_history_csv(result.history, cfg.history_csv);
    return result;
}

void save_history_csv(const std::vector<StepRecord>& history, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open history CSV for writing: " + path);
    f << "step,L_k_rev,L_k_reg,L_img_rev,L_img_reg,L_d,wall_ms\n";
    f << std::setprecision(10);
    for (const auto& r : history)
        f << r.step << ',' << r.k_rev << ',' << r.k_reg << ',' << r.img_rev << ','
          << r.img_reg << ',' << r.total << ',' << r.wall_ms << '\n';
    if (!f) throw std::runtime_error("failed writing history CSV: " + path);
}

void save_training_state(const std::string& path, const Model& m, const AdamState& s,
                         int next_epoch) {
    std::vector<NamedTensor> extra;
    for (const auto& name : m.names) {
        extra.push_back({"adam.m." + name, s.m1.at(name)});
        extra.push_back({"adam.v." + name, s.m2.at(name)});
    }
    extra.push_back({"opt.t", Tensor::scalar(static_cast<double>(s.t))});
    extra.push_back({"train.next_epoch", Tensor::scalar(static_cast<double>(next_epoch))});
    save_checkpoint(path, m, extra);
}

Model load_training_state(const std::string& path, AdamState& s, int& next_epoch) {
    std::vector<NamedTensor> extra;
    Model m = load_checkpoint(path, &extra);
    s = init_adam(m);
    next_epoch = 0;
    if (!has_record(extra, "opt.t")) return m;  // plain model checkpoint
    s.t = static_cast<int64_t>(find_record(extra, "opt.t").scalar_value());
    next_epoch = static_cast<int>(find_record(extra, "train.next_epoch").scalar_value());
    for (const auto& name : m.names) {
        const Tensor& m1 = find_record(extra, "adam.m." + name);
        const Tensor& m2 = find_record(extra, "adam.v." + name);
        const Tensor& p = m.param(name);
        if (m1.shape() != p.shape() || m2.shape() != p.shape())
            throw std::runtime_error("optimizer state for '" + name +
                                     "' has the wrong shape in " + path);
        s.m1[name] = m1;
        s.m2[name] = m2;
    }
    return m;
}

}  // namespace dunmri
