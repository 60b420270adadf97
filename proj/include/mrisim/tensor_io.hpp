#pragma once

#include <string>

#include "mrisim/tensor.hpp"

namespace mrisim {

// TNSR binary format (little-endian, no padding):
//   magic "TNSR", u32 version = 1, u8 dtype (1 = real64, 2 = complex128),
//   u8 ndim = 2, u64 rows, u64 cols, row-major payload.
void save_tensor(const std::string& path, const RealTensor2& t);
void save_tensor(const std::string& path, const ComplexTensor2& t);

RealTensor2 load_real_tensor(const std::string& path);
ComplexTensor2 load_complex_tensor(const std::string& path);

}  // namespace mrisim
