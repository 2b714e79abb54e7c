#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganattr/image.hpp"
#include "ganattr/manifest.hpp"
#include "ganattr/rng.hpp"
#include "ganattr/tensor.hpp"

namespace ganattr {

// A synthetic generator identity: a zero-mean, unit-RMS spatial pattern that
// gets added to base images at a fixed amplitude.
struct FingerprintSpec {
    std::string source;
    Tensor pattern;  // [size, size]
    real amplitude = 8.0;
};

struct FixtureConfig {
    int size = 64;
    int sources = 3;       // fake generators gm1..gmK
    int per_source = 200;  // fake images per generator
    real amplitude = 8.0;
    int real_parts = 2;  // real:fake balance, default 2:3
    int fake_parts = 3;
    real train_frac = 0.7;
    real val_frac = 0.1;
    real test_frac = 0.2;
    bool with_external = true;  // extra source "gmx", held out entirely
    int external_count = 0;     // 0 means per_source
    bool sibling_pair = false;  // gm2 pattern correlates with gm1
    real sibling_corr = 0.5;
    std::uint64_t seed = 0;
};

// Pearson correlation between two equally shaped patterns after mean removal.
real pattern_correlation(const Tensor& a, const Tensor& b);

// One random fingerprint: frequency support restricted to radial indices
// above size/4, so smooth image content does not mask it and heavy blurring
// destroys it.
Tensor band_fingerprint(int size, Rng& rng);

// Deterministic per-source fingerprints for a config. Pairwise correlations
// stay below 0.1 by regeneration, except a deliberate sibling pair when
// configured. Same config always returns the same patterns, so callers can
// re-derive what gen_dataset stamped.
std::vector<FingerprintSpec> make_fingerprints(const FixtureConfig& cfg);

// Smooth random content: a bilinear corner ramp plus a few Gaussian blobs,
// clamped to [32, 223] so default-amplitude stamping rarely clips.
ImageU8 gen_base_image(Rng& rng, int size);

// Adds amplitude * pattern to every channel, rounds once, clamps to [0, 255].
ImageU8 stamp_fingerprint(const ImageU8& image, const FingerprintSpec& spec);

// Writes PNGs under out_dir/images/<source>/ and a manifest at
// out_dir/manifest.tsv, then returns the manifest. Reals and per-generator
// fakes are split train/val/test by seeded shuffle; the external source goes
// entirely to the "external" split.
DatasetManifest gen_dataset(const FixtureConfig& cfg, const std::string& out_dir);

}  // namespace ganattr
