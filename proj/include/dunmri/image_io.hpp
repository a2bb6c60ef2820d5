#pragma once

#include <string>

#include "dunmri/tensor.hpp"

namespace dunmri {

// Writes a real [H,W] tensor as a binary (P5) PGM with maxval 65535.
// Values are mapped linearly from [0, max(x)] to [0, 65535]; a constant-zero
// image produces an all-zero payload. Sample bytes are big-endian per the
// format. Non-finite values are rejected.
void export_pgm(const std::string& path, const Tensor& image);

// Reads a 16-bit binary PGM back as a real [H,W] tensor with values in
// [0, 1] (sample / 65535). Only maxval 65535 is accepted.
Tensor load_pgm(const std::string& path);

}  // namespace dunmri
