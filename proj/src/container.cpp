#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "dunmri/container.hpp"

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace dunmri {

namespace {

constexpr uint16_t kVersion = 1;

template <class T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& f, const std::string& path) {
    T v{};
    if (!f.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw std::runtime_error("truncated container: " + path);
    return v;
}

}  // namespace

void save_container(const std::vector<NamedTensor>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open container for writing: " + path);
    f.write("DUNT", 4);
    put<uint16_t>(f, kVersion);
    put<uint32_t>(f, static_cast<uint32_t>(records.size()));
    for (const NamedTensor& r : records) {
        if (!r.value.defined())
            throw std::invalid_argument("record '" + r.name + "' holds an undefined tensor");
        put<uint32_t>(f, static_cast<uint32_t>(r.name.size()));
        f.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        put<uint8_t>(f, r.value.is_complex() ? 1 : 0);
        put<uint8_t>(f, static_cast<uint8_t>(r.value.shape().size()));
        for (int d : r.value.shape()) put<uint32_t>(f, static_cast<uint32_t>(d));
        f.write(reinterpret_cast<const char*>(r.value.data()),
                static_cast<std::streamsize>(r.value.buffer_size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("failed writing container: " + path);
}

std::vector<NamedTensor> load_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open container: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::string(magic, 4) != "DUNT")
        throw std::runtime_error("not a tensor container: " + path);
    uint16_t ver = get<uint16_t>(f, path);
    if (ver != kVersion)
        throw std::runtime_error("unsupported container version " + std::to_string(ver) + " in " +
                                 path);
    uint32_t count = get<uint32_t>(f, path);
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nlen = get<uint32_t>(f, path);
        std::string name(nlen, '\0');
        if (!f.read(name.data(), nlen)) throw std::runtime_error("truncated container: " + path);
        uint8_t dtcode = get<uint8_t>(f, path);
        if (dtcode > 1) throw std::runtime_error("bad dtype code in " + path);
        Dtype dt = dtcode == 1 ? Dtype::Complex : Dtype::Real;
        uint8_t ndim = get<uint8_t>(f, path);
        std::vector<int> shape(ndim);
        for (uint8_t d = 0; d < ndim; ++d)
            shape[d] = static_cast<int>(get<uint32_t>(f, path));
        size_t n = shape_numel(shape) * dtype_width(dt);
        std::vector<double> buf(n);
        if (!f.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(n * sizeof(double))))
            throw std::runtime_error("truncated container: " + path);
        out.push_back({std::move(name), Tensor::from_buffer(std::move(shape), dt, std::move(buf))});
    }
    return out;
}

const Tensor& find_record(const std::vector<NamedTensor>& records, const std::string& name) {
    for (const NamedTensor& r : records)
        if (r.name == name) return r.value;
    throw std::runtime_error("container record not found: " + name);
}

bool has_record(const std::vector<NamedTensor>& records, const std::string& name) {
    for (const NamedTensor& r : records)
        if (r.name == name) return true;
    return false;
}

}  // namespace dunmri
