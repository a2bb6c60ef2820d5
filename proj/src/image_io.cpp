#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "dunmri/image_io.hpp"

namespace dunmri {

void export_pgm(const std::string& path, const Tensor& image) {
    if (image.dtype() != Dtype::Real || image.shape().size() != 2)
        throw std::invalid_argument("export_pgm expects a real [H,W] tensor, got " +
                                    shape_str(image.shape()));
    int h = image.shape()[0];
    int w = image.shape()[1];
    const auto& buf = image.buffer();
    double peak = 0.0;
    for (double v : buf) {
        if (!std::isfinite(v))
            throw std::invalid_argument("export_pgm: image contains a non-finite value");
        if (v > peak) peak = v;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open image for writing: " + path);
    f << "P5\n" << w << " " << h << "\n65535\n";
    std::vector<unsigned char> payload(static_cast<size_t>(h) * w * 2);
    double scale = peak > 0.0 ? 65535.0 / peak : 0.0;
    for (size_t i = 0; i < buf.size(); ++i) {
        double v = buf[i] * scale;
        if (v < 0.0) v = 0.0;
        if (v > 65535.0) v = 65535.0;
        auto q = static_cast<uint16_t>(std::lround(v));
        payload[2 * i] = static_cast<unsigned char>(q >> 8);
        payload[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    }
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (!f) throw std::runtime_error("failed writing image: " + path);
}

namespace {

// Reads the next whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

Tensor load_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open image: " + path);
    if (next_token(f) != "P5") throw std::runtime_error("not a binary PGM: " + path);
    int w = std::stoi(next_token(f));
    int h = std::stoi(next_token(f));
    int maxval = std::stoi(next_token(f));
    if (w < 1 || h < 1) throw std::runtime_error("bad PGM dimensions in " + path);
    if (maxval != 65535) throw std::runtime_error("expected 16-bit PGM (maxval 65535) in " + path);
    // next_token consumed exactly one whitespace byte after the maxval
    std::vector<unsigned char> payload(static_cast<size_t>(h) * w * 2);
    f.read(reinterpret_cast<char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));
    if (static_cast<size_t>(f.gcount()) != payload.size())
        throw std::runtime_error("truncated PGM payload in " + path);
    std::vector<double> buf(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < buf.size(); ++i) {
        uint16_t q = static_cast<uint16_t>((payload[2 * i] << 8) | payload[2 * i + 1]);
        buf[i] = static_cast<double>(q) / 65535.0;
    }
    return Tensor::from_buffer({h, w}, Dtype::Real, std::move(buf));
}

}  // namespace dunmri
