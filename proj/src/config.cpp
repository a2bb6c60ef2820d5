#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "dunmri/config.hpp"

namespace dunmri {

namespace {

void fail(const std::string& key, const std::string& constraint) {
    throw std::invalid_argument("config key '" + key + "': " + constraint);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) fail(key, "not an integer: '" + v + "'");
        return r;
    } catch (const std::invalid_argument&) {
        fail(key, "not an integer: '" + v + "'");
    } catch (const std::out_of_range&) {
        fail(key, "integer out of range: '" + v + "'");
    }
    return 0;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) fail(key, "not an unsigned integer: '" + v + "'");
        return r;
    } catch (const std::exception&) {
        fail(key, "not an unsigned integer: '" + v + "'");
    }
    return 0;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) fail(key, "not a number: '" + v + "'");
        return r;
    } catch (const std::exception&) {
        fail(key, "not a number: '" + v + "'");
    }
    return 0.0;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(key, "must be true or false, got '" + v + "'");
    return false;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in) {
    RunConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key == "stages") c.stages = to_int(key, val);
        else if (key == "base_channels") c.base_channels = to_int(key, val);
        else if (key == "height") c.height = to_int(key, val);
        else if (key == "width") c.width = to_int(key, val);
        else if (key == "init_seed") c.init_seed = to_u64(key, val);
        else if (key == "final_zero") c.final_zero = to_bool(key, val);
        else if (key == "dc_replace") c.dc_replace = to_bool(key, val);
        else if (key == "accel") c.accel = to_int(key, val);
        else if (key == "mask_pattern") c.mask_pattern = val;
        else if (key == "mask_seed") c.mask_seed = to_u64(key, val);
        else if (key == "lambda") c.lambda = to_double(key, val);
        else if (key == "eta") c.eta = to_double(key, val);
        else if (key == "beta") c.beta = to_double(key, val);
        else if (key == "lr") c.lr = to_double(key, val);
        else if (key == "epochs") c.epochs = to_int(key, val);
        else if (key == "batch") c.batch = to_int(key, val);
        else if (key == "rho_min") c.rho_min = to_double(key, val);
        else if (key == "rho_max") c.rho_max = to_double(key, val);
        else if (key == "seed") c.seed = to_u64(key, val);
        else if (key == "tau") c.tau = to_double(key, val);
        else if (key == "sigma") c.sigma = to_double(key, val);
        else if (key == "theta") c.theta = to_double(key, val);
        else if (key == "threshold") c.threshold = to_double(key, val);
        else if (key == "tol") c.tol = to_double(key, val);
        else if (key == "max_iters") c.max_iters = to_int(key, val);
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }
    if (c.stages < 0) fail("stages", "must be >= 0");
    if (c.base_channels < 1) fail("base_channels", "must be >= 1");
    if (c.height < 1 || c.width < 1) fail("height/width", "must be >= 1");
    if (c.accel < 1) fail("accel", "must be >= 1");
    if (c.mask_pattern != "random" && c.mask_pattern != "equispaced")
        fail("mask_pattern", "must be random or equispaced, got '" + c.mask_pattern + "'");
    if (c.lambda < 0.0) fail("lambda", "must be >= 0");
    if (c.eta < 0.0) fail("eta", "must be >= 0");
    if (c.beta < 0.0) fail("beta", "must be >= 0");
    if (c.lr <= 0.0) fail("lr", "must be > 0");
    if (c.epochs < 0) fail("epochs", "must be >= 0");
    if (c.batch < 1) fail("batch", "must be >= 1");
    if (c.rho_min < 0.2 || c.rho_max > 0.8 || c.rho_min > c.rho_max)
        fail("rho_min/rho_max", "need 0.2 <= rho_min <= rho_max <= 0.8");
    if (c.max_iters < 1) fail("max_iters", "must be >= 1");
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    return parse(f);
}

void RunConfig::serialize(std::ostream& out) const {
    out << std::setprecision(17);
    out << "stages = " << stages << '\n';
    out << "base_channels = " << base_channels << '\n';
    out << "height = " << height << '\n';
    out << "width = " << width << '\n';
    out << "init_seed = " << init_seed << '\n';
    out << "final_zero = " << (final_zero ? "true" : "false") << '\n';
    out << "dc_replace = " << (dc_replace ? "true" : "false") << '\n';
    out << "accel = " << accel << '\n';
    out << "mask_pattern = " << mask_pattern << '\n';
    out << "mask_seed = " << mask_seed << '\n';
    out << "lambda = " << lambda << '\n';
    out << "eta = " << eta << '\n';
    out << "beta = " << beta << '\n';
    out << "lr = " << lr << '\n';
    out << "epochs = " << epochs << '\n';
    out << "batch = " << batch << '\n';
    out << "rho_min = " << rho_min << '\n';
    out << "rho_max = " << rho_max << '\n';
    out << "seed = " << seed << '\n';
    out << "tau = " << tau << '\n';
    out << "sigma = " << sigma << '\n';
    out << "theta = " << theta << '\n';
    out << "threshold = " << threshold << '\n';
    out << "tol = " << tol << '\n';
    out << "max_iters = " << max_iters << '\n';
}

void RunConfig::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open config for writing: " + path);
    serialize(f);
    if (!f) throw std::runtime_error("failed writing config: " + path);
}

}  // namespace dunmri
