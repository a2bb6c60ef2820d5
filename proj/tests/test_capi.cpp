#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include <dunmri.h>

namespace {

std::string tmp_path(const char* stem) {
    return std::string("/tmp/dunmri_capi_") + stem;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    REQUIRE(f.good());
    f << text;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("version and error reporting") {
    CHECK(dunmri_version() != nullptr);
    CHECK(std::string(dunmri_version()) == "0.1.0");

    dunmri_image* img = nullptr;
    CHECK(dunmri_image_load("/no/such/file.dunt", &img) == DUNMRI_ERR_IO);
    CHECK(img == nullptr);
    CHECK(std::string(dunmri_last_error()).find("/no/such/file.dunt") != std::string::npos);

    CHECK(dunmri_image_phantom(32, 32, "checkerboard", 1, &img) == DUNMRI_ERR_INVALID);
    CHECK(std::string(dunmri_last_error()).find("checkerboard") != std::string::npos);

    CHECK(dunmri_image_phantom(32, 32, "random-ellipses", 1, nullptr) == DUNMRI_ERR_INVALID);

    // a success wipes the message
    CHECK(dunmri_image_phantom(32, 32, "random-ellipses", 1, &img) == DUNMRI_OK);
    CHECK(std::string(dunmri_last_error()).empty());
    dunmri_image_free(img);
    dunmri_image_free(nullptr);  // must be a no-op
}

TEST_CASE("image round trip, export, and comparison") {
    dunmri_image* a = nullptr;
    dunmri_image* b = nullptr;
    REQUIRE(dunmri_image_phantom(32, 32, "shepp-logan-like", 9, &a) == DUNMRI_OK);
    int h = 0, w = 0;
    REQUIRE(dunmri_image_dims(a, &h, &w) == DUNMRI_OK);
    CHECK(h == 32);
    CHECK(w == 32);

    const std::string path = tmp_path("image.dunt");
    REQUIRE(dunmri_image_save(a, path.c_str()) == DUNMRI_OK);
    REQUIRE(dunmri_image_load(path.c_str(), &b) == DUNMRI_OK);

    double psnr = 0.0, ssim = 0.0;
    REQUIRE(dunmri_image_compare(a, b, &psnr, &ssim) == DUNMRI_OK);
    CHECK(psnr == 99.0);  // identical images hit the cap
    CHECK(ssim == 1.0);
    dunmri_image_free(b);

    // same seed reproduces the phantom; another seed does not
    dunmri_image* c = nullptr;
    REQUIRE(dunmri_image_phantom(32, 32, "random-ellipses", 9, &b) == DUNMRI_OK);
    REQUIRE(dunmri_image_phantom(32, 32, "random-ellipses", 9, &c) == DUNMRI_OK);
    REQUIRE(dunmri_image_compare(b, c, &psnr, &ssim) == DUNMRI_OK);
    CHECK(psnr == 99.0);
    dunmri_image_free(c);
    REQUIRE(dunmri_image_phantom(32, 32, "random-ellipses", 10, &c) == DUNMRI_OK);
    REQUIRE(dunmri_image_compare(b, c, &psnr, &ssim) == DUNMRI_OK);
    CHECK(psnr < 99.0);
    dunmri_image_free(c);
    dunmri_image_free(b);

    const std::string pgm = tmp_path("image.pgm");
    REQUIRE(dunmri_image_export_pgm(a, pgm.c_str()) == DUNMRI_OK);
    CHECK(read_text(pgm).substr(0, 2) == "P5");
    dunmri_image_free(a);
}

TEST_CASE("mask files and measurement round trips") {
    const std::string path = tmp_path("mask.txt");
    int total = 0, center = 0;
    REQUIRE(dunmri_mask_create(path.c_str(), 256, 4, "random", 3, &total, &center) == DUNMRI_OK);
    CHECK(total == 64);
    CHECK(center == 20);
    CHECK(dunmri_mask_create(path.c_str(), 256, 4, "spiral", 3, &total, &center) ==
          DUNMRI_ERR_INVALID);

    dunmri_image* img = nullptr;
    REQUIRE(dunmri_image_phantom(32, 32, "random-ellipses", 4, &img) == DUNMRI_OK);
    dunmri_kspace* k = nullptr;
    REQUIRE(dunmri_kspace_measure(img, 4, "random", 11, &k) == DUNMRI_OK);
    int h = 0, w = 0, coils = 0;
    REQUIRE(dunmri_kspace_info(k, &h, &w, &coils, &total, &center) == DUNMRI_OK);
    CHECK(h == 32);
    CHECK(w == 32);
    CHECK(coils == 1);
    CHECK(total == 8);  // 32 columns at 4x
    CHECK(center >= 2);

    const std::string kpath = tmp_path("meas.dunt");
    REQUIRE(dunmri_kspace_save(k, kpath.c_str()) == DUNMRI_OK);
    dunmri_kspace* back = nullptr;
    REQUIRE(dunmri_kspace_load(kpath.c_str(), &back) == DUNMRI_OK);
    int h2 = 0, w2 = 0, coils2 = 0, total2 = 0, center2 = 0;
    REQUIRE(dunmri_kspace_info(back, &h2, &w2, &coils2, &total2, &center2) == DUNMRI_OK);
    CHECK(h2 == h);
    CHECK(w2 == w);
    CHECK(coils2 == coils);
    CHECK(total2 == total);
    CHECK(center2 == center);

    dunmri_image* zf1 = nullptr;
    dunmri_image* zf2 = nullptr;
    REQUIRE(dunmri_kspace_zero_filled(k, &zf1) == DUNMRI_OK);
    REQUIRE(dunmri_kspace_zero_filled(back, &zf2) == DUNMRI_OK);
    double psnr = 0.0, ssim = 0.0;
    REQUIRE(dunmri_image_compare(zf1, zf2, &psnr, &ssim) == DUNMRI_OK);
    CHECK(psnr == 99.0);  // the file carried the measurement bit for bit

    // noiseless "noise" is the identity; real noise is not
    dunmri_kspace* same = nullptr;
    REQUIRE(dunmri_kspace_add_noise(k, 0.0, 7, &same) == DUNMRI_OK);
    dunmri_image* zf3 = nullptr;
    REQUIRE(dunmri_kspace_zero_filled(same, &zf3) == DUNMRI_OK);
    REQUIRE(dunmri_image_compare(zf1, zf3, &psnr, &ssim) == DUNMRI_OK);
    CHECK(psnr == 99.0);
    dunmri_kspace_free(same);
    dunmri_image_free(zf3);
    REQUIRE(dunmri_kspace_add_noise(k, 0.05, 7, &same) == DUNMRI_OK);
    REQUIRE(dunmri_kspace_zero_filled(same, &zf3) == DUNMRI_OK);
    REQUIRE(dunmri_image_compare(zf1, zf3, &psnr, &ssim) == DUNMRI_OK);
    CHECK(psnr < 99.0);

    dunmri_kspace_free(same);
    dunmri_image_free(zf3);
    dunmri_image_free(zf1);
    dunmri_image_free(zf2);
    dunmri_kspace_free(back);
    dunmri_kspace_free(k);
    dunmri_image_free(img);
}

TEST_CASE("classical solve through the c surface") {
    dunmri_image* truth = nullptr;
    REQUIRE(dunmri_image_phantom(32, 32, "shepp-logan-like", 6, &truth) == DUNMRI_OK);
    dunmri_kspace* k = nullptr;
    REQUIRE(dunmri_kspace_measure(truth, 1, "random", 0, &k) == DUNMRI_OK);

    dunmri_image* rec = nullptr;
    int iters = 0;
    double residual = 1.0;
    const std::string trace = tmp_path("trace.csv");
    REQUIRE(dunmri_classical_run(k, 0.5, 0.5, 1.0, 0.0, 200, 1e-10, trace.c_str(), &rec,
                                 &iters, &residual) == DUNMRI_OK);
    CHECK(iters <= 200);
    CHECK(residual < 1e-8);
    double psnr = 0.0, ssim = 0.0;
    REQUIRE(dunmri_image_compare(truth, rec, &psnr, &ssim) == DUNMRI_OK);
    CHECK(psnr > 80.0);
    CHECK(read_text(trace).substr(0, 4) == "iter");

    // step sizes breaking the tau*sigma < 1 certificate are rejected
    dunmri_image* bad = nullptr;
    CHECK(dunmri_classical_run(k, 2.0, 0.5, 1.0, 0.0, 200, 1e-10, nullptr, &bad, nullptr,
                               nullptr) == DUNMRI_ERR_INVALID);
    CHECK(bad == nullptr);

    dunmri_image_free(rec);
    dunmri_kspace_free(k);
    dunmri_image_free(truth);
}

TEST_CASE("phantom dataset, training, reconstruction, and eval") {
    const std::string dir = tmp_path("data");
    int written = 0;
    REQUIRE(dunmri_phantom_dataset(dir.c_str(), 4, 16, "random-ellipses", 5, &written) ==
            DUNMRI_OK);
    CHECK(written == 4);
    std::string manifest = read_text(dir + "/manifest.txt");
    CHECK(manifest.find("phantom_000.dunt 5") != std::string::npos);
    CHECK(manifest.find("phantom_003.dunt 8") != std::string::npos);

    const std::string cfg = tmp_path("train.cfg");
    write_text(cfg,
               "stages = 1\nbase_channels = 4\nheight = 16\nwidth = 16\n"
               "init_seed = 7\naccel = 4\nmask_seed = 3\nlr = 0.001\n"
               "epochs = 1\nbatch = 2\nseed = 11\n");
    const std::string ckpt = tmp_path("model.dunt");
    const std::string hist = tmp_path("history.csv");
    double first = 0.0, last = 0.0;
    int steps = 0;
    REQUIRE(dunmri_train_run(cfg.c_str(), dir.c_str(), nullptr, ckpt.c_str(), hist.c_str(),
                             &first, &last, &steps) == DUNMRI_OK);
    CHECK(steps == 2);  // 4 samples, batch 2, one epoch
    CHECK(first > 0.0);
    CHECK(read_text(hist).substr(0, 5) == "step,");

    // resuming a finished schedule is a completed no-op
    const std::string ckpt2 = tmp_path("model2.dunt");
    REQUIRE(dunmri_train_run(cfg.c_str(), dir.c_str(), ckpt.c_str(), ckpt2.c_str(), nullptr,
                             &first, &last, &steps) == DUNMRI_OK);
    CHECK(steps == 0);

    // resuming under different model geometry is refused
    const std::string cfg2 = tmp_path("train2.cfg");
    write_text(cfg2,
               "stages = 2\nbase_channels = 4\nheight = 16\nwidth = 16\n"
               "accel = 4\nepochs = 2\n");
    CHECK(dunmri_train_run(cfg2.c_str(), dir.c_str(), ckpt.c_str(), ckpt2.c_str(), nullptr,
                           nullptr, nullptr, nullptr) == DUNMRI_ERR_INVALID);

    dunmri_model* model = nullptr;
    REQUIRE(dunmri_model_load(ckpt.c_str(), &model) == DUNMRI_OK);
    int stages = 0, channels = 0, h = 0, w = 0;
    REQUIRE(dunmri_model_info(model, &stages, &channels, &h, &w) == DUNMRI_OK);
    CHECK(stages == 1);
    CHECK(channels == 4);
    CHECK(h == 16);
    CHECK(w == 16);

    dunmri_image* truth = nullptr;
    REQUIRE(dunmri_image_phantom(16, 16, "random-ellipses", 21, &truth) == DUNMRI_OK);
    dunmri_kspace* k = nullptr;
    REQUIRE(dunmri_kspace_measure(truth, 4, "random", 13, &k) == DUNMRI_OK);
    dunmri_image* rec = nullptr;
    REQUIRE(dunmri_model_reconstruct(model, k, 1, &rec) == DUNMRI_OK);
    int rh = 0, rw = 0;
    REQUIRE(dunmri_image_dims(rec, &rh, &rw) == DUNMRI_OK);
    CHECK(rh == 16);
    CHECK(rw == 16);

    const std::string ref_path = tmp_path("ref.dunt");
    const std::string rec_path = tmp_path("rec.dunt");
    REQUIRE(dunmri_image_save(truth, ref_path.c_str()) == DUNMRI_OK);
    REQUIRE(dunmri_image_save(rec, rec_path.c_str()) == DUNMRI_OK);
    const std::string csv = tmp_path("eval.csv");
    double psnr = 0.0, ssim = 0.0;
    REQUIRE(dunmri_eval_images(ref_path.c_str(), rec_path.c_str(), csv.c_str(), &psnr,
                               &ssim) == DUNMRI_OK);
    CHECK(psnr > 0.0);
    CHECK(ssim > 0.0);
    CHECK(read_text(csv).substr(0, 8) == "slice_id");
    REQUIRE(dunmri_eval_images(ref_path.c_str(), ref_path.c_str(), nullptr, &psnr, &ssim) ==
            DUNMRI_OK);
    CHECK(psnr == 99.0);
    CHECK(ssim == 1.0);

    dunmri_image_free(rec);
    dunmri_kspace_free(k);
    dunmri_image_free(truth);
    dunmri_model_free(model);
}

TEST_CASE("gradient audit through the c surface") {
    const std::string cfg = tmp_path("gradcheck.cfg");
    write_text(cfg,
               "stages = 2\nbase_channels = 4\nheight = 16\nwidth = 16\n"
               "init_seed = 7\nfinal_zero = false\naccel = 4\nmask_seed = 9\nseed = 9\n");
    int passed = 0;
    double worst = 1.0, loss = 0.0;
    REQUIRE(dunmri_gradcheck_run(cfg.c_str(), &passed, &worst, &loss) == DUNMRI_OK);
    CHECK(passed == 1);
    CHECK(worst < 1e-5);
    CHECK(loss > 0.0);
}
