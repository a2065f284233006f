#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mlcsc/linop.hpp"
#include "mlcsc/solver.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc::io {

/// Shortest round-trip decimal rendering of a double (locale-free).
std::string format_double(double v);
double parse_double(const std::string& s);

// ---- MLCT binary tensor container ----
// magic "MLCT", little-endian u32 ndim, ndim u32 extents, row-major f64.
std::vector<char> encode_tensor(const TensorD& t);
TensorD decode_tensor(const char* data, std::size_t size);
void write_tensor(const std::filesystem::path& path, const TensorD& t);
TensorD read_tensor(const std::filesystem::path& path);

// ---- Operator container ----
// Same MLCT magic with the reserved ndim = 0 marker, then a u64-length JSON
// header describing kind and payload offsets, then embedded tensor blobs /
// nested operator containers. See docs/formats.md.
std::vector<char> encode_operator(const LinearOperator<double>& op);
LinearOperator<double> decode_operator(const char* data, std::size_t size);
void write_operator(const std::filesystem::path& path, const LinearOperator<double>& op);
LinearOperator<double> read_operator(const std::filesystem::path& path);

// ---- PNM images ----
// Binary 8-bit P6 (RGB, (3,H,W) tensors) and P5 (gray, (H,W)); the internal
// domain is [0,1] doubles with the exact value/255 mapping on read.
void write_ppm(const std::filesystem::path& path, const TensorD& rgb);
TensorD read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const TensorD& gray);
TensorD read_pgm(const std::filesystem::path& path);

// ---- Model checkpoints ----
// A directory holding manifest.txt (layer scalars) plus one MLCT tensor per
// dictionary and bias. The measurement operator is per-problem and not part
// of a checkpoint.
void save_model(const std::filesystem::path& dir, const ModelParams<double>& params);
ModelParams<double> load_model(const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mlcsc::io
