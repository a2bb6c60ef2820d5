// Command-line front end. Everything goes through the shared-library C API,
// so this file is also a living example of driving the toolkit from C.
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <dunmri.h>

namespace {

int fail_from_api() {
    std::fprintf(stderr, "error: %s\n", dunmri_last_error());
    return 1;
}

// unique_ptr wrappers so error paths cannot leak handles
using ImagePtr = std::unique_ptr<dunmri_image, decltype(&dunmri_image_free)>;
using KSpacePtr = std::unique_ptr<dunmri_kspace, decltype(&dunmri_kspace_free)>;
using ModelPtr = std::unique_ptr<dunmri_model, decltype(&dunmri_model_free)>;

ImagePtr wrap(dunmri_image* p) { return {p, &dunmri_image_free}; }
KSpacePtr wrap(dunmri_kspace* p) { return {p, &dunmri_kspace_free}; }
ModelPtr wrap(dunmri_model* p) { return {p, &dunmri_model_free}; }

int cmd_phantom(int count, int size, const std::string& kind, uint64_t seed,
                const std::string& out) {
    int written = 0;
    if (dunmri_phantom_dataset(out.c_str(), count, size, kind.c_str(), seed, &written) !=
        DUNMRI_OK)
        return fail_from_api();
    std::printf("wrote %d phantoms (%dx%d, %s) to %s\n", written, size, size, kind.c_str(),
                out.c_str());
    return 0;
}

int cmd_mask(int width, int accel, const std::string& pattern, uint64_t seed,
             const std::string& out) {
    int total = 0, center = 0;
    if (dunmri_mask_create(out.c_str(), width, accel, pattern.c_str(), seed, &total,
                           &center) != DUNMRI_OK)
        return fail_from_api();
    std::printf("wrote mask: width %d, %d lines (%d center) to %s\n", width, total, center,
                out.c_str());
    return 0;
}

int cmd_undersample(const std::string& image, int accel, const std::string& pattern,
                    uint64_t mask_seed, double noise, uint64_t noise_seed,
                    const std::string& out) {
    dunmri_image* img_raw = nullptr;
    if (dunmri_image_load(image.c_str(), &img_raw) != DUNMRI_OK) return fail_from_api();
    ImagePtr img = wrap(img_raw);

    dunmri_kspace* k_raw = nullptr;
    if (dunmri_kspace_measure(img.get(), accel, pattern.c_str(), mask_seed, &k_raw) !=
        DUNMRI_OK)
        return fail_from_api();
    KSpacePtr k = wrap(k_raw);
    if (noise > 0.0) {
        dunmri_kspace* noisy_raw = nullptr;
        if (dunmri_kspace_add_noise(k.get(), noise, noise_seed, &noisy_raw) != DUNMRI_OK)
            return fail_from_api();
        k = wrap(noisy_raw);
    }
    if (dunmri_kspace_save(k.get(), out.c_str()) != DUNMRI_OK) return fail_from_api();

    int h = 0, w = 0, coils = 0, total = 0, center = 0;
    dunmri_kspace_info(k.get(), &h, &w, &coils, &total, &center);
    std::printf("wrote k-space %dx%d, %d of %d lines sampled, to %s\n", h, w, total, w,
                out.c_str());
    return 0;
}

int cmd_train(const std::string& config, const std::string& data, const std::string& resume,
              const std::string& out_ckpt, const std::string& history) {
    double first = 0.0, last = 0.0;
    int steps = 0;
    if (dunmri_train_run(config.c_str(), data.c_str(),
                         resume.empty() ? nullptr : resume.c_str(), out_ckpt.c_str(),
                         history.empty() ? nullptr : history.c_str(), &first, &last,
                         &steps) != DUNMRI_OK)
        return fail_from_api();
    if (steps == 0)
        std::printf("schedule already complete, checkpoint copied to %s\n", out_ckpt.c_str());
    else
        std::printf("ran %d steps, loss %.6f -> %.6f, checkpoint %s\n", steps, first, last,
                    out_ckpt.c_str());
    return 0;
}

int cmd_reconstruct(const std::string& checkpoint, const std::string& kspace,
                    const std::string& out_image, bool no_dc, const std::string& pgm) {
    dunmri_model* m_raw = nullptr;
    if (dunmri_model_load(checkpoint.c_str(), &m_raw) != DUNMRI_OK) return fail_from_api();
    ModelPtr m = wrap(m_raw);

    dunmri_kspace* k_raw = nullptr;
    if (dunmri_kspace_load(kspace.c_str(), &k_raw) != DUNMRI_OK) return fail_from_api();
    KSpacePtr k = wrap(k_raw);

    dunmri_image* rec_raw = nullptr;
    if (dunmri_model_reconstruct(m.get(), k.get(), no_dc ? 0 : 1, &rec_raw) != DUNMRI_OK)
        return fail_from_api();
    ImagePtr rec = wrap(rec_raw);
    if (dunmri_image_save(rec.get(), out_image.c_str()) != DUNMRI_OK) return fail_from_api();
    if (!pgm.empty() && dunmri_image_export_pgm(rec.get(), pgm.c_str()) != DUNMRI_OK)
        return fail_from_api();
    std::printf("reconstructed %s -> %s\n", kspace.c_str(), out_image.c_str());
    return 0;
}

int cmd_eval(const std::string& ref, const std::string& test, const std::string& out_csv) {
    double psnr = 0.0, ssim = 0.0;
    if (dunmri_eval_images(ref.c_str(), test.c_str(), out_csv.c_str(), &psnr, &ssim) !=
        DUNMRI_OK)
        return fail_from_api();
    std::printf("psnr %.4f dB, ssim %.6f, csv %s\n", psnr, ssim, out_csv.c_str());
    return 0;
}

int cmd_gradcheck(const std::string& config) {
    int passed = 0;
    double worst = 0.0, loss = 0.0;
    if (dunmri_gradcheck_run(config.c_str(), &passed, &worst, &loss) != DUNMRI_OK)
        return fail_from_api();
    if (passed) {
        std::printf("PASS, max rel err < 1e-5 (measured %.3e, loss %.6f)\n", worst, loss);
        return 0;
    }
    std::printf("FAIL, max rel err %.3e >= 1e-5\n", worst);
    return 1;
}

int cmd_classical(const std::string& kspace, double tau, double sigma, double theta,
                  double threshold, int iters, double tol, const std::string& trace,
                  const std::string& out, const std::string& pgm) {
    dunmri_kspace* k_raw = nullptr;
    if (dunmri_kspace_load(kspace.c_str(), &k_raw) != DUNMRI_OK) return fail_from_api();
    KSpacePtr k = wrap(k_raw);

    dunmri_image* rec_raw = nullptr;
    int ran = 0;
    double residual = 0.0;
    if (dunmri_classical_run(k.get(), tau, sigma, theta, threshold, iters, tol,
                             trace.empty() ? nullptr : trace.c_str(), &rec_raw, &ran,
                             &residual) != DUNMRI_OK)
        return fail_from_api();
    ImagePtr rec = wrap(rec_raw);
    if (dunmri_image_save(rec.get(), out.c_str()) != DUNMRI_OK) return fail_from_api();
    if (!pgm.empty() && dunmri_image_export_pgm(rec.get(), pgm.c_str()) != DUNMRI_OK)
        return fail_from_api();
    std::printf("%d iterations, final residual %.3e, image %s\n", ran, residual, out.c_str());
    return 0;
}

int cmd_export(const std::string& in, const std::string& out) {
    dunmri_image* img_raw = nullptr;
    if (dunmri_image_load(in.c_str(), &img_raw) != DUNMRI_OK) return fail_from_api();
    ImagePtr img = wrap(img_raw);
    if (dunmri_image_export_pgm(img.get(), out.c_str()) != DUNMRI_OK) return fail_from_api();
    std::printf("exported %s -> %s\n", in.c_str(), out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"undersampled MRI reconstruction toolkit"};
    app.require_subcommand(1);

    int count = 8, size = 64;
    std::string kind = "random-ellipses";
    uint64_t seed = 0;
    std::string out;
    auto* phantom = app.add_subcommand("phantom", "generate a phantom image dataset");
    phantom->add_option("--count", count, "number of images")->capture_default_str();
    phantom->add_option("--size", size, "image side length")->capture_default_str();
    phantom->add_option("--kind", kind, "shepp-logan-like|random-ellipses")
        ->capture_default_str();
    phantom->add_option("--seed", seed, "base seed; image i uses seed+i")
        ->capture_default_str();
    phantom->add_option("--out", out, "output directory")->required();

    int width = 256, accel = 4;
    std::string pattern = "random";
    auto* mask = app.add_subcommand("mask", "draw a 1d undersampling mask");
    mask->add_option("--width", width, "k-space width")->capture_default_str();
    mask->add_option("--accel", accel, "acceleration factor (1 debug, 4, 8, 12)")
        ->capture_default_str();
    mask->add_option("--pattern", pattern, "random|equispaced")->capture_default_str();
    mask->add_option("--seed", seed, "sampling seed")->capture_default_str();
    mask->add_option("--out", out, "output mask file")->required();

    std::string image;
    double noise = 0.0;
    uint64_t mask_seed = 0, noise_seed = 0;
    auto* under = app.add_subcommand("undersample", "measure an image into k-space");
    under->add_option("--image", image, "input image container")->required();
    under->add_option("--accel", accel, "acceleration factor")->capture_default_str();
    under->add_option("--pattern", pattern, "random|equispaced")->capture_default_str();
    under->add_option("--mask-seed", mask_seed, "sampling seed")->capture_default_str();
    under->add_option("--noise", noise, "complex noise sigma, 0 disables")
        ->capture_default_str();
    under->add_option("--noise-seed", noise_seed, "noise seed")->capture_default_str();
    under->add_option("--out", out, "output k-space container")->required();

    std::string config, data, resume, history, ckpt;
    auto* train = app.add_subcommand("train", "self-supervised training run");
    train->add_option("--config", config, "run configuration file")->required();
    train->add_option("--data", data, "dataset directory with manifest")->required();
    train->add_option("--resume", resume, "checkpoint to continue from");
    train->add_option("--history", history, "per-step loss CSV");
    train->add_option("--out-checkpoint", ckpt, "output checkpoint")->required();

    std::string kspace, out_image, pgm;
    bool no_dc = false;
    auto* rec = app.add_subcommand("reconstruct", "run a trained model on k-space");
    rec->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    rec->add_option("--kspace", kspace, "input k-space container")->required();
    rec->add_option("--out-image", out_image, "output image container")->required();
    rec->add_option("--pgm", pgm, "also export a 16-bit PGM");
    rec->add_flag("--no-dc", no_dc, "skip the data-consistency replacement");

    std::string ref, test, out_csv;
    auto* eval = app.add_subcommand("eval", "psnr/ssim between two image files");
    eval->add_option("--ref", ref, "reference image container")->required();
    eval->add_option("--test", test, "image under test")->required();
    eval->add_option("--out-csv", out_csv, "metrics CSV")->required();

    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    grad->add_option("--config", config, "model/loss configuration")->required();

    double tau = 0.5, sigma = 0.5, theta = 1.0, threshold = 0.0, tol = 1e-8;
    int iters = 500;
    std::string trace;
    auto* classical = app.add_subcommand("classical", "primal-dual solve without learning");
    classical->add_option("--kspace", kspace, "input k-space container")->required();
    classical->add_option("--tau", tau, "primal step")->capture_default_str();
    classical->add_option("--sigma", sigma, "dual step")->capture_default_str();
    classical->add_option("--theta", theta, "extrapolation weight")->capture_default_str();
    classical->add_option("--threshold", threshold, "soft-threshold level")
        ->capture_default_str();
    classical->add_option("--iters", iters, "iteration cap")->capture_default_str();
    classical->add_option("--tol", tol, "residual stop")->capture_default_str();
    classical->add_option("--trace", trace, "per-iteration residual CSV");
    classical->add_option("--out", out, "output image container")->required();
    classical->add_option("--pgm", pgm, "also export a 16-bit PGM");

    std::string in;
    auto* exp = app.add_subcommand("export", "image container to 16-bit PGM");
    exp->add_option("--in", in, "input image container")->required();
    exp->add_option("--out", out, "output PGM")->required();

    CLI11_PARSE(app, argc, argv);

    if (phantom->parsed()) return cmd_phantom(count, size, kind, seed, out);
    if (mask->parsed()) return cmd_mask(width, accel, pattern, seed, out);
    if (under->parsed())
        return cmd_undersample(image, accel, pattern, mask_seed, noise, noise_seed, out);
    if (train->parsed()) return cmd_train(config, data, resume, ckpt, history);
    if (rec->parsed()) return cmd_reconstruct(ckpt, kspace, out_image, no_dc, pgm);
    if (eval->parsed()) return cmd_eval(ref, test, out_csv);
    if (grad->parsed()) return cmd_gradcheck(config);
    if (classical->parsed())
        return cmd_classical(kspace, tau, sigma, theta, threshold, iters, tol, trace, out, pgm);
    if (exp->parsed()) return cmd_export(in, out);
    return 1;
}
