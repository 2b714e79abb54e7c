#pragma once

#include <vector>

#include "ganattr/tensor.hpp"

namespace ganattr {

// Orthonormal type-II DCT basis [n,n]; row k holds the k-th cosine.
Tensor dct_matrix(int n);

// 2D transform of a [H,W] plane (or [1,H,W]): coeffs = C_h * plane * C_w^T.
Tensor dct2(const Tensor& plane);
Tensor idct2(const Tensor& coeffs);

// log(|x| + 1e-12), the dynamic-range compression applied to spectra.
Tensor log_scale(const Tensor& coeffs);

// Per-coefficient location and scale collected from a reference set of
// log-scaled spectra; the scale is floored at 1e-8 so constant coefficients
// stay usable.
struct SpectrumStats {
    Tensor mean;
    Tensor stddev;
    std::int64_t samples = 0;

    bool empty() const { return samples == 0; }
};

SpectrumStats compute_spectrum_stats(const std::vector<Tensor>& spectra);
Tensor normalize_spectrum(const Tensor& log_spectrum, const SpectrumStats& stats);

}  // namespace ganattr
