#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "dunmri/metrics.hpp"
#include "dunmri/rng.hpp"
#include "test_util.hpp"

using namespace dunmri;
using namespace testutil;

namespace {

double psnr_oracle(const Tensor& a, const Tensor& b, double range) {
    double mse = 0.0;
    for (size_t i = 0; i < a.buffer_size(); ++i) {
        double d = a.buffer()[i] - b.buffer()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.buffer_size());
    if (mse == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(range * range / mse));
}

// direct 2-D sliding window with two-pass central moments; independent of the
// separable expectation-form implementation under test
double ssim_oracle(const Tensor& a, const Tensor& b, double range) {
    int h = a.shape()[0], w = a.shape()[1];
    double k1d[11], sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        double d = i - 5.0;
        k1d[i] = std::exp(-d * d / 4.5);
        sum += k1d[i];
    }
    for (double& v : k1d) v /= sum;
    double c1 = 0.01 * range * 0.01 * range;
    double c2 = 0.03 * range * 0.03 * range;
    double acc = 0.0;
    int cnt = 0;
    for (int r = 0; r + 11 <= h; ++r)
        for (int c = 0; c + 11 <= w; ++c) {
            double mua = 0.0, mub = 0.0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    double kw = k1d[i] * k1d[j];
                    mua += kw * a.buffer()[(r + i) * w + c + j];
                    mub += kw * b.buffer()[(r + i) * w + c + j];
                }
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    double kw = k1d[i] * k1d[j];
                    double da = a.buffer()[(r + i) * w + c + j] - mua;
                    double db = b.buffer()[(r + i) * w + c + j] - mub;
                    va += kw * da * da;
                    vb += kw * db * db;
                    cov += kw * da * db;
                }
            acc += ((2.0 * mua * mub + c1) * (2.0 * cov + c2)) /
                   ((mua * mua + mub * mub + c1) * (va + vb + c2));
            ++cnt;
        }
    return acc / cnt;
}

}  // namespace

TEST_CASE("psnr basics") {
    std::mt19937_64 rng(501);
    Tensor a = random_tensor({16, 16}, Dtype::Real, rng, 0.0, 1.0);
    CHECK(psnr(a, a, 1.0) == 99.0);
    std::vector<double> shifted = a.buffer();
    for (double& v : shifted) v += 0.1;  // MSE = 0.01
    Tensor b = Tensor::from_buffer({16, 16}, Dtype::Real, std::move(shifted));
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK_THROWS_AS(psnr(a, Tensor::zeros({8, 8}), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(psnr(a, a, 0.0), std::invalid_argument);
}

TEST_CASE("psnr and ssim match the naive oracles") {
    std::mt19937_64 rng(503);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({32, 32}, Dtype::Real, rng, 0.0, 1.0);
        Tensor b = random_tensor({32, 32}, Dtype::Real, rng, 0.0, 1.0);
        CHECK(psnr(a, b, 1.0) == doctest::Approx(psnr_oracle(a, b, 1.0)).epsilon(1e-12));
        CHECK(ssim(a, b, 1.0) == doctest::Approx(ssim_oracle(a, b, 1.0)).epsilon(1e-10));
    }
}

TEST_CASE("ssim properties") {
    std::mt19937_64 rng(505);
    Tensor a = random_tensor({32, 32}, Dtype::Real, rng, 0.0, 1.0);
    Tensor b = random_tensor({32, 32}, Dtype::Real, rng, 0.0, 1.0);
    CHECK(ssim(a, a, 1.0) == 1.0);  // exact
    CHECK(ssim(a, b, 1.0) == doctest::Approx(ssim(b, a, 1.0)).epsilon(1e-12));
    double s = ssim(a, b, 1.0);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);

    // binary image vs its inverse is highly dissimilar
    std::vector<double> bin(64 * 64);
    for (double& v : bin) v = (rng() & 1) ? 1.0 : 0.0;
    std::vector<double> inv(64 * 64);
    for (size_t i = 0; i < bin.size(); ++i) inv[i] = 1.0 - bin[i];
    Tensor x = Tensor::from_buffer({64, 64}, Dtype::Real, std::move(bin));
    Tensor y = Tensor::from_buffer({64, 64}, Dtype::Real, std::move(inv));
    CHECK(ssim(x, y, 1.0) < 0.1);

    CHECK_THROWS_AS(ssim(Tensor::zeros({8, 8}), Tensor::zeros({8, 8}), 1.0),
                    std::invalid_argument);
}

TEST_CASE("psnr decreases with noise amplitude") {
    std::mt19937_64 rng(507);
    Tensor ref = random_tensor({32, 32}, Dtype::Real, rng, 0.2, 0.8);
    double prev = 1e9;
    for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
        std::vector<double> noisy = ref.buffer();
        std::mt19937_64 nrng(11);
        for (double& v : noisy) v += amp * gaussian(nrng);
        double p = psnr(ref, Tensor::from_buffer({32, 32}, Dtype::Real, std::move(noisy)), 1.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("error map") {
    std::mt19937_64 rng(509);
    Tensor a = random_tensor({16, 16}, Dtype::Real, rng, 0.0, 1.0);
    Tensor same = error_map(a, a);
    CHECK(max_abs(same.buffer()) == 0.0);
    std::vector<double> one = a.buffer();
    one[37] += 0.4;
    Tensor b = Tensor::from_buffer({16, 16}, Dtype::Real, std::move(one));
    Tensor em = error_map(a, b);
    int nonzero = 0;
    for (double v : em.buffer())
        if (v != 0.0) ++nonzero;
    CHECK(nonzero == 1);
    CHECK(max_abs(em.buffer()) <= 1.0);
    std::vector<double> wild = a.buffer();
    for (double& v : wild) v += 10.0;
    Tensor far = Tensor::from_buffer({16, 16}, Dtype::Real, std::move(wild));
    CHECK(max_abs(error_map(a, far).buffer()) <= 1.0);
}

TEST_CASE("slice report and CSV") {
    std::mt19937_64 rng(511);
    std::vector<Tensor> refs, tests;
    for (int i = 0; i < 3; ++i) {
        refs.push_back(random_tensor({16, 16}, Dtype::Real, rng, 0.0, 1.0));
        std::vector<double> t = refs.back().buffer();
        for (double& v : t) v += 0.01 * gaussian(rng);
        tests.push_back(Tensor::from_buffer({16, 16}, Dtype::Real, std::move(t)));
    }
    MetricReport rep = evaluate_slices(refs, tests);
    CHECK(rep.psnr_db.size() == 3);
    double m = (rep.psnr_db[0] + rep.psnr_db[1] + rep.psnr_db[2]) / 3.0;
    CHECK(rep.psnr_mean == doctest::Approx(m).epsilon(1e-12));
    double var = 0.0;
    for (double v : rep.ssim_val) var += (v - rep.ssim_mean) * (v - rep.ssim_mean);
    CHECK(rep.ssim_std == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-12));

    std::string path = "metrics_tmp.csv";
    save_metrics_csv(rep, path);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "slice_id,psnr_db,ssim");
    int rows = 0;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 5);  // 3 slices + mean + std
    f.close();
    std::remove(path.c_str());
}
