#pragma once

#include "mrisim/tensor.hpp"

namespace mrisim {

// Unitary 2-D DFT: each 1-D pass is scaled by 1/sqrt(N) so the operator
// is orthonormal and Parseval holds exactly. Dimensions must be powers
// of two (radix-2).
ComplexTensor2 fft2(const ComplexTensor2& t);
ComplexTensor2 fft2(const RealTensor2& t);
ComplexTensor2 ifft2(const ComplexTensor2& t);

bool is_power_of_two(std::size_t n);

}  // namespace mrisim
