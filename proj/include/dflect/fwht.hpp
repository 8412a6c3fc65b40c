#pragma once

#include <cstddef>
#include <vector>

namespace dflect {

// In-place orthonormal fast Walsh-Hadamard transform in Sylvester (natural)
// order. Entries of the implied matrix are +-1/sqrt(N); the transform is its
// own inverse. Length must be a power of two (N >= 1).
void fwht_inplace(std::vector<double>& x);

// Convenience copy version.
std::vector<double> fwht(std::vector<double> x);

// Signed row i of the unnormalized N x N Sylvester-ordered Hadamard matrix:
// entry j is (-1)^popcount(i AND j), in {-1, +1}.
std::vector<int> hadamard_row(size_t n, size_t i);

}  // namespace dflect
