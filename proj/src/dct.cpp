#include "ganattr/dct.hpp"

#include <cmath>

#include "ganattr/errors.hpp"

namespace ganattr {

namespace {

constexpr real kLogFloor = 1e-12;
constexpr real kStdFloor = 1e-8;

// Accepts [H,W] or a single-channel [1,H,W]; returns (H, W, data offset 0).
std::pair<int, int> plane_dims(const Tensor& t, const char* who) {
    if (t.ndim() == 2) return {t.dim(0), t.dim(1)};
    if (t.ndim() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2)};
    throw ShapeError(std::string(who) + ": expected a [H,W] or [1,H,W] plane");
}

// out[H,W] = A[H,H] * X * B'[W,W] where B' is b transposed when bt is set.
Tensor sandwich(const Tensor& a, const Tensor& x, const Tensor& b, bool bt,
                const std::vector<int>& out_shape, int H, int W) {
    // tmp = A * X
    std::vector<real> tmp(static_cast<std::size_t>(H) * W, 0.0);
    for (int i = 0; i < H; ++i)
        for (int k = 0; k < H; ++k) {
            const real aik = a.data[static_cast<std::size_t>(i) * H + k];
            const real* xrow = x.data.data() + static_cast<std::size_t>(k) * W;
            real* trow = tmp.data() + static_cast<std::size_t>(i) * W;
            for (int j = 0; j < W; ++j) trow[j] += aik * xrow[j];
        }
    Tensor out(out_shape);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            real s = 0.0;
            const real* trow = tmp.data() + static_cast<std::size_t>(i) * W;
            for (int k = 0; k < W; ++k)
                s += trow[k] * (bt ? b.data[static_cast<std::size_t>(j) * W + k]
                                   : b.data[static_cast<std::size_t>(k) * W + j]);
            out.data[static_cast<std::size_t>(i) * W + j] = s;
        }
    return out;
}

}  // namespace

Tensor dct_matrix(int n) {
    if (n < 1) throw ValueError("dct_matrix: size must be positive");
    Tensor c({n, n});
    const real norm0 = std::sqrt(1.0 / n);
    const real norm = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            c.at({k, i}) = (k == 0 ? norm0 : norm) *
                           std::cos(M_PI * (2.0 * i + 1.0) * k / (2.0 * n));
    return c;
}

Tensor dct2(const Tensor& plane) {
    const auto [H, W] = plane_dims(plane, "dct2");
    const Tensor ch = dct_matrix(H);
    const Tensor cw = (W == H) ? ch : dct_matrix(W);
    // coeffs = C_h * X * C_w^T; the W-side matrix is indexed transposed.
    Tensor x2 = (plane.ndim() == 2) ? plane : Tensor({H, W}, plane.data);
    return sandwich(ch, x2, cw, true, plane.shape, H, W);
}

Tensor idct2(const Tensor& coeffs) {
    const auto [H, W] = plane_dims(coeffs, "idct2");
    const Tensor ch = dct_matrix(H);
    const Tensor cw = (W == H) ? ch : dct_matrix(W);
    // X = C_h^T * coeffs * C_w; transposing the H side means swapping the
    // index roles, handled by reusing sandwich with a transposed A.
    Tensor cht({H, H});
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < H; ++j) cht.at({i, j}) = ch.at({j, i});
    Tensor y2 = (coeffs.ndim() == 2) ? coeffs : Tensor({H, W}, coeffs.data);
    return sandwich(cht, y2, cw, false, coeffs.shape, H, W);
}

Tensor log_scale(const Tensor& coeffs) {
    Tensor out(coeffs.shape);
    for (std::size_t i = 0; i < coeffs.data.size(); ++i)
        out.data[i] = std::log(std::abs(coeffs.data[i]) + kLogFloor);
    return out;
}

SpectrumStats compute_spectrum_stats(const std::vector<Tensor>& spectra) {
    if (spectra.size() < 2)
        throw DataError("compute_spectrum_stats: at least 2 reference spectra required, got " +
                        std::to_string(spectra.size()));
    const auto& shape = spectra.front().shape;
    for (const auto& s : spectra)
        if (s.shape != shape)
            throw ShapeError("compute_spectrum_stats: spectra differ in shape");

    SpectrumStats st;
    st.mean = Tensor(shape);
    st.stddev = Tensor(shape);
    st.samples = static_cast<std::int64_t>(spectra.size());
    const real inv_n = 1.0 / static_cast<real>(spectra.size());
    for (const auto& s : spectra)
        for (std::size_t i = 0; i < s.data.size(); ++i) st.mean.data[i] += s.data[i];
    for (auto& v : st.mean.data) v *= inv_n;
    for (const auto& s : spectra)
        for (std::size_t i = 0; i < s.data.size(); ++i) {
            const real d = s.data[i] - st.mean.data[i];
            st.stddev.data[i] += d * d;
        }
    for (auto& v : st.stddev.data) v = std::max(std::sqrt(v * inv_n), kStdFloor);
    return st;
}

Tensor normalize_spectrum(const Tensor& log_spectrum, const SpectrumStats& stats) {
    if (stats.empty()) throw StateError("normalize_spectrum: reference statistics are missing");
    if (log_spectrum.shape != stats.mean.shape)
        throw ShapeError("normalize_spectrum: spectrum shape does not match the statistics");
    Tensor out(log_spectrum.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (log_spectrum.data[i] - stats.mean.data[i]) / stats.stddev.data[i];
    return out;
}

}  // namespace ganattr
