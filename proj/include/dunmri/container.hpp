#pragma once

#include <string>
#include <vector>

#include "dunmri/tensor.hpp"

namespace dunmri {

/// Binary tensor container. Byte layout (all integers little-endian):
///   magic "DUNT" | u16 version (=1) | u32 record_count
///   per record: u32 name_len | name bytes | u8 dtype (0 real, 1 complex)
///               | u8 ndim | u32 dims[ndim] | f64 payload
/// Complex payloads are interleaved re/im pairs, 16 bytes per element.
struct NamedTensor {
    std::string name;
    Tensor value;
};

void save_container(const std::vector<NamedTensor>& records, const std::string& path);
std::vector<NamedTensor> load_container(const std::string& path);

/// Lookup helper; throws if the record is absent.
const Tensor& find_record(const std::vector<NamedTensor>& records, const std::string& name);
bool has_record(const std::vector<NamedTensor>& records, const std::string& name);

}  // namespace dunmri
