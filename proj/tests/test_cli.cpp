#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// DUNMRI_CLI_PATH and DUNMRI_TOY_CONFIG come from the build system
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

RunResult run_cli(const std::string& args) {
    const std::string out = "/tmp/dunmri_cli_stdout.txt";
    const std::string err = "/tmp/dunmri_cli_stderr.txt";
    std::string cmd = std::string(DUNMRI_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
    int rc = std::system(cmd.c_str());
    return {rc == -1 ? -1 : WEXITSTATUS(rc), slurp(out), slurp(err)};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* stem) : path(fs::path("/tmp") / stem) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const char* name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    REQUIRE(f.good());
    f << text;
}

}  // namespace

TEST_CASE("bad invocations exit nonzero") {
    CHECK(run_cli("").exit_code != 0);
    CHECK(run_cli("transmogrify").exit_code != 0);
    CHECK(run_cli("mask --width 256").exit_code != 0);  // --out is required
}

TEST_CASE("phantom datasets are seed-reproducible") {
    TempDir dir("dunmri_cli_phantom");
    RunResult r = run_cli("phantom --count 3 --size 32 --seed 5 --out " + (dir / "a"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("wrote 3 phantoms") != std::string::npos);
    std::string manifest = slurp(dir / "a" + "/manifest.txt");
    CHECK(manifest.find("phantom_000.dunt 5") != std::string::npos);
    CHECK(manifest.find("phantom_002.dunt 7") != std::string::npos);

    REQUIRE(run_cli("phantom --count 3 --size 32 --seed 5 --out " + (dir / "b")).exit_code == 0);
    CHECK(slurp(dir / "a" + "/phantom_001.dunt") == slurp(dir / "b" + "/phantom_001.dunt"));
}

TEST_CASE("mask command reports the line budget") {
    TempDir dir("dunmri_cli_mask");
    RunResult r = run_cli("mask --width 256 --accel 4 --pattern random --seed 3 --out " +
                          (dir / "m.txt"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("64 lines (20 center)") != std::string::npos);

    r = run_cli("mask --width 256 --accel 3 --out " + (dir / "m.txt"));
    CHECK(r.exit_code != 0);
    CHECK(r.err.substr(0, 6) == "error:");
    CHECK(r.err.find('\n') == r.err.size() - 1);  // a single diagnostic line
}

TEST_CASE("classical pipeline recovers a fully sampled image") {
    TempDir dir("dunmri_cli_classical");
    REQUIRE(run_cli("phantom --count 1 --size 32 --seed 9 --out " + (dir / "set")).exit_code ==
            0);
    std::string img = dir / "set" + "/phantom_000.dunt";
    REQUIRE(run_cli("undersample --image " + img + " --accel 1 --mask-seed 2 --out " +
                    (dir / "full.dunt"))
                .exit_code == 0);
    RunResult r = run_cli("classical --kspace " + (dir / "full.dunt") +
                          " --threshold 0 --iters 200 --tol 1e-10 --out " + (dir / "rec.dunt"));
    REQUIRE(r.exit_code == 0);

    r = run_cli("eval --ref " + img + " --test " + (dir / "rec.dunt") + " --out-csv " +
                (dir / "eval.csv"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("psnr 99.0000") != std::string::npos);
    CHECK(r.out.find("ssim 1.000000") != std::string::npos);

    // the tau*sigma certificate reaches the exit code
    r = run_cli("classical --kspace " + (dir / "full.dunt") + " --tau 2 --sigma 0.5 --out " +
                (dir / "rec.dunt"));
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("tau*sigma") != std::string::npos);
}

TEST_CASE("eval of identical images writes the capped metrics") {
    TempDir dir("dunmri_cli_eval");
    REQUIRE(run_cli("phantom --count 1 --size 32 --seed 1 --out " + (dir / "set")).exit_code ==
            0);
    std::string img = dir / "set" + "/phantom_000.dunt";
    RunResult r = run_cli("eval --ref " + img + " --test " + img + " --out-csv " +
                          (dir / "eval.csv"));
    REQUIRE(r.exit_code == 0);
    std::string csv = slurp(dir / "eval.csv");
    CHECK(csv.find("slice_id,psnr_db,ssim") != std::string::npos);
    CHECK(csv.find("0,99,1") != std::string::npos);
}

TEST_CASE("gradcheck passes on the shipped toy config") {
    RunResult r = run_cli(std::string("gradcheck --config ") + DUNMRI_TOY_CONFIG);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("PASS, max rel err < 1e-5") != std::string::npos);
}

TEST_CASE("train, resume, and reconstruct round trip") {
    TempDir dir("dunmri_cli_train");
    REQUIRE(run_cli("phantom --count 4 --size 16 --seed 30 --out " + (dir / "set")).exit_code ==
            0);
    const std::string base_cfg =
        "stages = 1\nbase_channels = 4\nheight = 16\nwidth = 16\ninit_seed = 7\n"
        "accel = 4\nmask_seed = 3\nlr = 0.001\nbatch = 2\nseed = 11\n";
    write_text(dir / "one.cfg", base_cfg + "epochs = 1\n");
    write_text(dir / "two.cfg", base_cfg + "epochs = 2\n");

    RunResult r = run_cli("train --config " + (dir / "one.cfg") + " --data " + (dir / "set") +
                          " --history " + (dir / "hist1.csv") + " --out-checkpoint " +
                          (dir / "e1.dunt"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("ran 2 steps") != std::string::npos);
    CHECK(slurp(dir / "hist1.csv").substr(0, 5) == "step,");

    // one uninterrupted 2-epoch run...
    REQUIRE(run_cli("train --config " + (dir / "two.cfg") + " --data " + (dir / "set") +
                    " --out-checkpoint " + (dir / "full.dunt"))
                .exit_code == 0);
    // ...and the same schedule resumed after epoch 1 give identical checkpoints
    // up to the stored resume position, so the reconstructions must agree
    REQUIRE(run_cli("train --config " + (dir / "two.cfg") + " --data " + (dir / "set") +
                    " --resume " + (dir / "e1.dunt") + " --out-checkpoint " +
                    (dir / "resumed.dunt"))
                .exit_code == 0);

    std::string img = dir / "set" + "/phantom_000.dunt";
    REQUIRE(run_cli("undersample --image " + img + " --accel 4 --mask-seed 8 --out " +
                    (dir / "meas.dunt"))
                .exit_code == 0);
    REQUIRE(run_cli("reconstruct --checkpoint " + (dir / "full.dunt") + " --kspace " +
                    (dir / "meas.dunt") + " --out-image " + (dir / "rec_full.dunt"))
                .exit_code == 0);
    REQUIRE(run_cli("reconstruct --checkpoint " + (dir / "resumed.dunt") + " --kspace " +
                    (dir / "meas.dunt") + " --out-image " + (dir / "rec_resumed.dunt"))
                .exit_code == 0);
    CHECK(slurp(dir / "rec_full.dunt") == slurp(dir / "rec_resumed.dunt"));

    // reconstruction itself is deterministic
    REQUIRE(run_cli("reconstruct --checkpoint " + (dir / "full.dunt") + " --kspace " +
                    (dir / "meas.dunt") + " --out-image " + (dir / "rec_again.dunt") +
                    " --pgm " + (dir / "rec.pgm"))
                .exit_code == 0);
    CHECK(slurp(dir / "rec_full.dunt") == slurp(dir / "rec_again.dunt"));
    CHECK(slurp(dir / "rec.pgm").substr(0, 2) == "P5");
}
