#pragma once

#include <cstdint>

#include "dflect/common.hpp"
#include "dflect/sensing.hpp"

namespace dflect {

// Separable 2-D biorthogonal 9/7 wavelet transform, lifting implementation,
// whole-sample symmetric boundary extension, Mallat quadrant layout
// (approximation in the top-left corner after each level).
//
// Scaling convention: the analysis lowpass has DC gain sqrt(2), so the
// transform is near-unitary and a constant grid gains a factor 2 per 2-D
// level in the approximation band. Both grid dimensions must be divisible
// by 2^levels. levels == 0 is the identity.
void dwt97_forward(SpectrumGrid& grid, int levels);
void dwt97_inverse(SpectrumGrid& grid, int levels);

// Adjoint of the synthesis operator S = dwt97_inverse (natural domain in,
// coefficient domain out). S is not orthogonal, so S^T differs from the
// forward analysis; it is needed wherever gradients flow through S.
void dwt97_synthesis_adjoint(SpectrumGrid& grid, int levels);

// Largest singular value of A = Phi * S, estimated by power iteration on
// A^T A (iters applications). plan.order must equal width * height.
double operator_norm_estimate(const SensingPlan& plan, int width, int height,
                              int levels, int iters, uint64_t seed = 0x6e6f726dULL);

}  // namespace dflect
