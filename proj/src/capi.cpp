#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "dunmri.h"
#include "dunmri/cppa.hpp"
#include "dunmri/dataset.hpp"
#include "dunmri/gradcheck.hpp"
#include "dunmri/image_io.hpp"
#include "dunmri/metrics.hpp"
#include "dunmri/ops.hpp"
#include "dunmri/train.hpp"

struct dunmri_image {
    dunmri::Tensor t;
};
struct dunmri_kspace {
    dunmri::KSpaceData k;
};
struct dunmri_model {
    dunmri::Model m;
};

namespace {

namespace op = dunmri::ops;

thread_local std::string g_last_error;

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return DUNMRI_OK;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return DUNMRI_ERR_INVALID;
    } catch (const std::runtime_error& e) {
        g_last_error = e.what();
        return DUNMRI_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DUNMRI_ERR_INTERNAL;
    }
}

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

dunmri::ModelConfig model_config_from(const dunmri::RunConfig& cfg) {
    dunmri::ModelConfig mc;
    mc.stages = cfg.stages;
    mc.base_channels = cfg.base_channels;
    mc.height = cfg.height;
    mc.width = cfg.width;
    mc.init_seed = cfg.init_seed;
    mc.final_zero = cfg.final_zero;
    return mc;
}

dunmri::LossWeights weights_from(const dunmri::RunConfig& cfg) {
    dunmri::LossWeights w;
    w.lambda = cfg.lambda;
    w.eta = cfg.eta;
    w.beta = cfg.beta;
    return w;
}

dunmri::Tensor magnitude_of(const dunmri::Tensor& t) {
    if (t.dtype() == dunmri::Dtype::Complex) return op::magnitude(t);
    std::vector<double> buf = t.buffer();
    for (double& v : buf) v = std::abs(v);
    return dunmri::Tensor::from_buffer(t.shape(), t.dtype(), std::move(buf));
}

// magnitude images; the metrics share the reference-peak data range
std::pair<dunmri::Tensor, dunmri::Tensor> magnitude_pair(const dunmri::Tensor& ref,
                                                         const dunmri::Tensor& test) {
    require(ref.shape() == test.shape(), "image shapes differ");
    return {magnitude_of(ref), magnitude_of(test)};
}

}  // namespace

extern "C" {

const char* dunmri_last_error(void) { return g_last_error.c_str(); }

const char* dunmri_version(void) { return "0.1.0"; }

int dunmri_image_phantom(int height, int width, const char* kind, uint64_t seed,
                         dunmri_image** out) {
    return guarded([&] {
        require(kind && out, "null argument");
        dunmri::Tensor t =
            dunmri::make_phantom(height, width, dunmri::parse_phantom_kind(kind), seed);
        *out = new dunmri_image{std::move(t)};
    });
}

int dunmri_image_load(const char* path, dunmri_image** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new dunmri_image{dunmri::load_image(path)};
    });
}

int dunmri_image_save(const dunmri_image* img, const char* path) {
    return guarded([&] {
        require(img && path, "null argument");
        dunmri::save_image(path, img->t);
    });
}

int dunmri_image_dims(const dunmri_image* img, int* height, int* width) {
    return guarded([&] {
        require(img && height && width, "null argument");
        *height = img->t.shape()[0];
        *width = img->t.shape()[1];
    });
}

int dunmri_image_export_pgm(const dunmri_image* img, const char* path) {
    return guarded([&] {
        require(img && path, "null argument");
        dunmri::export_pgm(path, magnitude_of(img->t));
    });
}

int dunmri_image_compare(const dunmri_image* ref, const dunmri_image* test, double* psnr_db,
                         double* ssim) {
    return guarded([&] {
        require(ref && test && psnr_db && ssim, "null argument");
        auto [mr, mt] = magnitude_pair(ref->t, test->t);
        double range = 0.0;
        for (double v : mr.buffer()) range = std::max(range, v);
        *psnr_db = dunmri::psnr(mr, mt, range);
        *ssim = dunmri::ssim(mr, mt, range);
    });
}

void dunmri_image_free(dunmri_image* img) { delete img; }

int dunmri_mask_create(const char* path, int width, int accel, const char* pattern,
                       uint64_t seed, int* total_lines, int* center_lines) {
    return guarded([&] {
        require(path && pattern, "null argument");
        dunmri::SamplingMask m =
            dunmri::make_mask(width, accel, dunmri::parse_mask_pattern(pattern), seed);
        dunmri::save_mask(m, path);
        if (total_lines) *total_lines = static_cast<int>(m.line_set.size());
        if (center_lines) *center_lines = m.center_count;
    });
}

int dunmri_kspace_measure(const dunmri_image* img, int accel, const char* pattern,
                          uint64_t mask_seed, dunmri_kspace** out) {
    return guarded([&] {
        require(img && pattern && out, "null argument");
        dunmri::SamplingMask m = dunmri::make_mask(
            img->t.shape()[1], accel, dunmri::parse_mask_pattern(pattern), mask_seed);
        *out = new dunmri_kspace{dunmri::measure(img->t, std::nullopt, m)};
    });
}

int dunmri_kspace_load(const char* path, dunmri_kspace** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new dunmri_kspace{dunmri::load_kspace(path)};
    });
}

int dunmri_kspace_save(const dunmri_kspace* k, const char* path) {
    return guarded([&] {
        require(k && path, "null argument");
        dunmri::save_kspace(path, k->k);
    });
}

int dunmri_kspace_add_noise(const dunmri_kspace* k, double sigma, uint64_t seed,
                            dunmri_kspace** out) {
    return guarded([&] {
        require(k && out, "null argument");
        *out = new dunmri_kspace{dunmri::add_kspace_noise(k->k, sigma, seed)};
    });
}

int dunmri_kspace_info(const dunmri_kspace* k, int* height, int* width, int* coils,
                       int* total_lines, int* center_lines) {
    return guarded([&] {
        require(k, "null argument");
        if (height) *height = k->k.samples.shape()[1];
        if (width) *width = k->k.samples.shape()[2];
        if (coils) *coils = k->k.coil_count;
        if (total_lines) *total_lines = static_cast<int>(k->k.mask.line_set.size());
        if (center_lines) *center_lines = k->k.mask.center_count;
    });
}

int dunmri_kspace_zero_filled(const dunmri_kspace* k, dunmri_image** out) {
    return guarded([&] {
        require(k && out, "null argument");
        require(k->k.coil_count == 1, "zero-filled transform expects single-coil data");
        *out = new dunmri_image{dunmri::adjoint_single(k->k.samples, k->k.mask)};
    });
}

void dunmri_kspace_free(dunmri_kspace* k) { delete k; }

int dunmri_model_load(const char* checkpoint, dunmri_model** out) {
    return guarded([&] {
        require(checkpoint && out, "null argument");
        *out = new dunmri_model{dunmri::load_checkpoint(checkpoint)};
    });
}

int dunmri_model_info(const dunmri_model* m, int* stages, int* base_channels, int* height,
                      int* width) {
    return guarded([&] {
        require(m, "null argument");
        if (stages) *stages = m->m.cfg.stages;
        if (base_channels) *base_channels = m->m.cfg.base_channels;
        if (height) *height = m->m.cfg.height;
        if (width) *width = m->m.cfg.width;
    });
}

int dunmri_model_reconstruct(const dunmri_model* m, const dunmri_kspace* k, int dc_replace,
                             dunmri_image** out) {
    return guarded([&] {
        require(m && k && out, "null argument");
        dunmri::Tensor rec =
            dunmri::model_forward(m->m, k->k, std::nullopt, dc_replace != 0);
        *out = new dunmri_image{std::move(rec)};
    });
}

void dunmri_model_free(dunmri_model* m) { delete m; }

int dunmri_phantom_dataset(const char* dir, int count, int size, const char* kind,
                           uint64_t base_seed, int* files_written) {
    return guarded([&] {
        require(dir && kind, "null argument");
        auto entries = dunmri::generate_phantom_dataset(
            dir, count, size, dunmri::parse_phantom_kind(kind), base_seed);
        if (files_written) *files_written = static_cast<int>(entries.size());
    });
}

int dunmri_train_run(const char* config_path, const char* data_dir,
                     const char* resume_checkpoint, const char* out_checkpoint,
                     const char* history_csv, double* first_loss, double* last_loss,
                     int* steps) {
    return guarded([&] {
        require(config_path && data_dir && out_checkpoint, "null argument");
        dunmri::RunConfig cfg = dunmri::RunConfig::load(config_path);
        std::vector<dunmri::KSpaceData> dataset = dunmri::load_training_set(data_dir, cfg);

        dunmri::Model model;
        dunmri::AdamState opt;
        int start_epoch = 0;
        if (resume_checkpoint) {
            model = dunmri::load_training_state(resume_checkpoint, opt, start_epoch);
            dunmri::ModelConfig want = model_config_from(cfg);
            require(model.cfg.stages == want.stages &&
                        model.cfg.base_channels == want.base_channels &&
                        model.cfg.height == want.height && model.cfg.width == want.width,
                    "resume checkpoint disagrees with the config's model geometry");
        } else {
            model = dunmri::init_model(model_config_from(cfg));
            opt = dunmri::init_adam(model);
        }

        dunmri::TrainOptions to;
        to.weights = weights_from(cfg);
        to.lr = cfg.lr;
        to.epochs = cfg.epochs;
        to.start_epoch = start_epoch;
        to.batch = cfg.batch;
        to.rho_min = cfg.rho_min;
        to.rho_max = cfg.rho_max;
        to.seed = cfg.seed;
        if (history_csv) to.history_csv = history_csv;
        dunmri::TrainResult result = dunmri::train(model, opt, dataset, to);
        dunmri::save_training_state(out_checkpoint, model, opt, cfg.epochs);

        if (first_loss) *first_loss = result.history.empty() ? 0.0 : result.history.front().total;
        if (last_loss) *last_loss = result.history.empty() ? 0.0 : result.history.back().total;
        if (steps) *steps = static_cast<int>(result.history.size());
    });
}

int dunmri_gradcheck_run(const char* config_path, int* passed, double* max_rel_err,
                         double* loss_value) {
    return guarded([&] {
        require(config_path, "null argument");
        dunmri::RunConfig cfg = dunmri::RunConfig::load(config_path);
        dunmri::Model model = dunmri::init_model(model_config_from(cfg));
        dunmri::SamplingMask mask =
            dunmri::make_mask(cfg.width, cfg.accel, dunmri::parse_mask_pattern(cfg.mask_pattern),
                              cfg.mask_seed);
        dunmri::Tensor img = dunmri::make_phantom(cfg.height, cfg.width,
                                                  dunmri::PhantomKind::RandomEllipses, cfg.seed);
        dunmri::KSpaceData parent = dunmri::measure(img, std::nullopt, mask);
        dunmri::GradCheckOptions opt;
        opt.weights = weights_from(cfg);
        dunmri::GradCheckReport rep = dunmri::gradcheck_model(model, parent, opt);
        if (passed) *passed = rep.passed ? 1 : 0;
        if (max_rel_err) *max_rel_err = rep.worst_rel_err;
        if (loss_value) *loss_value = rep.loss_value;
    });
}

int dunmri_classical_run(const dunmri_kspace* k, double tau, double sigma, double theta,
                         double threshold, int max_iters, double tol, const char* trace_csv,
                         dunmri_image** out, int* iterations, double* final_residual) {
    return guarded([&] {
        require(k && out, "null argument");
        dunmri::CppaConfig cfg;
        cfg.tau = tau;
        cfg.sigma = sigma;
        cfg.theta = theta;
        cfg.threshold = threshold;
        cfg.tol = tol;
        cfg.max_iters = max_iters;
        dunmri::SolveResult res = dunmri::solve_cppa(k->k, cfg);
        if (trace_csv) dunmri::save_trace_csv(res.trace, trace_csv);
        if (iterations) *iterations = static_cast<int>(res.trace.residual.size());
        if (final_residual)
            *final_residual = res.trace.residual.empty() ? 0.0 : res.trace.residual.back();
        *out = new dunmri_image{std::move(res.image)};
    });
}

int dunmri_eval_images(const char* ref_path, const char* test_path, const char* out_csv,
                       double* psnr_db, double* ssim) {
    return guarded([&] {
        require(ref_path && test_path, "null argument");
        auto [mr, mt] = magnitude_pair(dunmri::load_image(ref_path),
                                       dunmri::load_image(test_path));
        dunmri::MetricReport report = dunmri::evaluate_slices({mr}, {mt});
        if (out_csv) dunmri::save_metrics_csv(report, out_csv);
        if (psnr_db) *psnr_db = report.psnr_db[0];
        if (ssim) *ssim = report.ssim_val[0];
    });
}

}  // extern "C"
