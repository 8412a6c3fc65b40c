#include "dflect/fwht.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace dflect {

void fwht_inplace(std::vector<double>& x) {
    size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fwht: length must be a power of two");
    for (size_t half = 1; half < n; half *= 2) {
        for (size_t block = 0; block < n; block += 2 * half) {
            for (size_t i = block; i < block + half; ++i) {
                double a = x[i];
                double b = x[i + half];
                x[i] = a + b;
                x[i + half] = a - b;
            }
        }
    }
    double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : x) v *= s;
}

std::vector<double> fwht(std::vector<double> x) {
    fwht_inplace(x);
    return x;
}

std::vector<int> hadamard_row(size_t n, size_t i) {
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("hadamard_row: order must be a power of two");
    if (i >= n)
        throw std::invalid_argument("hadamard_row: row index out of range");
    std::vector<int> row(n);
    for (size_t j = 0; j < n; ++j)
        row[j] = (std::popcount(i & j) & 1) ? -1 : 1;
    return row;
}

}  // namespace dflect
