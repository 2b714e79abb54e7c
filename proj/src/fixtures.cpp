#include "ganattr/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ganattr/dct.hpp"
#include "ganattr/errors.hpp"

namespace fs = std::filesystem;

namespace ganattr {

namespace {

constexpr int kMinSize = 16;
constexpr real kMaxPairCorrelation = 0.1;
constexpr int kMaxRegenerations = 64;

std::string zero_padded(int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*d", width, value);
    return buf;
}

void subtract_mean(Tensor& t) {
    real mean = 0.0;
    for (real v : t.data) mean += v;
    mean /= static_cast<real>(t.data.size());
    for (real& v : t.data) v -= mean;
}

void scale_to_unit_rms(Tensor& t) {
    real ss = 0.0;
    for (real v : t.data) ss += v * v;
    real rms = std::sqrt(ss / static_cast<real>(t.data.size()));
    if (rms <= 0.0) throw ComputeError("degenerate fingerprint with zero energy");
    for (real& v : t.data) v /= rms;
}

// gm2 = corr * gm1 + sqrt(1 - corr^2) * (component of fresh orthogonal to gm1),
// which lands the pairwise correlation exactly on the requested value.
Tensor correlated_sibling(const Tensor& base, const Tensor& fresh, real corr) {
    real dot_bf = 0.0;
    real dot_bb = 0.0;
    for (std::size_t i = 0; i < base.data.size(); ++i) {
        dot_bf += base.data[i] * fresh.data[i];
        dot_bb += base.data[i] * base.data[i];
    }
    Tensor orth = fresh;
    for (std::size_t i = 0; i < orth.data.size(); ++i)
        orth.data[i] -= (dot_bf / dot_bb) * base.data[i];
    subtract_mean(orth);
    scale_to_unit_rms(orth);

    Tensor out = base;
    real w = std::sqrt(1.0 - corr * corr);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = corr * base.data[i] + w * orth.data[i];
    subtract_mean(out);
    scale_to_unit_rms(out);
    return out;
}

void check_config(const FixtureConfig& cfg) {
    if (cfg.size < kMinSize)
        throw ValueError("fixture size must be at least " + std::to_string(kMinSize));
    if (cfg.sources < 2) throw ValueError("need at least two fake sources");
    if (cfg.per_source < 1) throw ValueError("per_source must be positive");
    if (cfg.amplitude < 0.0) throw ValueError("fingerprint amplitude must be non-negative");
    if (cfg.real_parts < 1 || cfg.fake_parts < 1)
        throw ValueError("balance parts must be positive");
    real frac_sum = cfg.train_frac + cfg.val_frac + cfg.test_frac;
    if (cfg.train_frac <= 0.0 || cfg.val_frac <= 0.0 || cfg.test_frac <= 0.0 ||
        std::abs(frac_sum - 1.0) > 1e-9)
        throw ValueError("split fractions must be positive and sum to 1");
    if (cfg.sibling_corr <= -1.0 || cfg.sibling_corr >= 1.0)
        throw ValueError("sibling correlation must lie in (-1, 1)");
}

}  // namespace

real pattern_correlation(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("correlation needs equally shaped patterns");
    Tensor ca = a;
    Tensor cb = b;
    subtract_mean(ca);
    subtract_mean(cb);
    real dot = 0.0;
    real na = 0.0;
    real nb = 0.0;
    for (std::size_t i = 0; i < ca.data.size(); ++i) {
        dot += ca.data[i] * cb.data[i];
        na += ca.data[i] * ca.data[i];
        nb += cb.data[i] * cb.data[i];
    }
    real denom = std::sqrt(na * nb);
    if (denom <= 0.0) throw ValueError("correlation undefined for a constant pattern");
    return dot / denom;
}

Tensor band_fingerprint(int size, Rng& rng) {
    if (size < kMinSize)
        throw ValueError("fingerprint size must be at least " + std::to_string(kMinSize));
    Tensor spectrum = Tensor::zeros({size, size});
    // Support spans everything above the radial cutoff, not a thin annulus:
    // correlation is scale-invariant, so a pattern hugging the cutoff would
    // survive k=9 blurring with correlation near 0.8. Spreading energy to the
    // top of the spectrum drives post-blur recovery well under 0.5.
    real lo = static_cast<real>(size) / 4.0;
    // Row-major coefficient order fixes the draw sequence for a given seed.
    for (int u = 0; u < size; ++u) {
        for (int v = 0; v < size; ++v) {
            real radius = std::sqrt(static_cast<real>(u) * u + static_cast<real>(v) * v);
            if (radius > lo)
                spectrum.at({u, v}) = rng.normal();
        }
    }
    Tensor spatial = idct2(spectrum);
    subtract_mean(spatial);
    scale_to_unit_rms(spatial);
    return spatial;
}

std::vector<FingerprintSpec> make_fingerprints(const FixtureConfig& cfg) {
    check_config(cfg);
    std::vector<std::string> names;
    for (int i = 1; i <= cfg.sources; ++i) names.push_back("gm" + std::to_string(i));
    if (cfg.with_external) names.push_back("gmx");

    std::vector<FingerprintSpec> specs;
    for (const std::string& name : names) {
        bool sibling = cfg.sibling_pair && name == "gm2";
        Tensor pattern;
        for (int attempt = 0;; ++attempt) {
            if (attempt >= kMaxRegenerations)
                throw ComputeError("could not decorrelate fingerprint for " + name);
            Rng rng(derive_seed(cfg.seed,
                                "fingerprint:" + name + ":" + std::to_string(attempt)));
            Tensor candidate = band_fingerprint(cfg.size, rng);
            if (sibling) candidate = correlated_sibling(specs[0].pattern, candidate,
                                                        cfg.sibling_corr);
            bool ok = true;
            for (std::size_t j = 0; j < specs.size(); ++j) {
                if (sibling && j == 0) continue;  // the pair is correlated on purpose
                if (std::abs(pattern_correlation(candidate, specs[j].pattern)) >=
                    kMaxPairCorrelation) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                pattern = std::move(candidate);
                break;
            }
        }
        specs.push_back({name, std::move(pattern), cfg.amplitude});
    }
    return specs;
}

ImageU8 gen_base_image(Rng& rng, int size) {
    if (size < kMinSize)
        throw ValueError("base image size must be at least " + std::to_string(kMinSize));

    // Draw order (corners, blob count, then per-blob parameters) is part of
    // the determinism contract; reordering would silently change every image.
    real corners[3][4];
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 4; ++k) corners[c][k] = rng.uniform(72.0, 184.0);

    struct Blob {
        real cx, cy, radius;
        real amp[3];
    };
    int nblobs = rng.uniform_int(3, 5);
    std::vector<Blob> blobs(static_cast<std::size_t>(nblobs));
    for (Blob& b : blobs) {
        b.cx = rng.uniform(0.0, static_cast<real>(size - 1));
        b.cy = rng.uniform(0.0, static_cast<real>(size - 1));
        b.radius = rng.uniform(static_cast<real>(size) / 7.0, static_cast<real>(size) / 3.0);
        for (int c = 0; c < 3; ++c) {
            real magnitude = rng.uniform(24.0, 56.0);
            b.amp[c] = rng.coin(0.5) ? magnitude : -magnitude;
        }
    }

    ImageU8 img = make_image(size, size, 3);
    real denom = static_cast<real>(size - 1);
    for (int y = 0; y < size; ++y) {
        real fy = static_cast<real>(y) / denom;
        for (int x = 0; x < size; ++x) {
            real fx = static_cast<real>(x) / denom;
            for (int c = 0; c < 3; ++c) {
                real v = corners[c][0] * (1.0 - fy) * (1.0 - fx) +
                         corners[c][1] * (1.0 - fy) * fx +
                         corners[c][2] * fy * (1.0 - fx) +
                         corners[c][3] * fy * fx;
                for (const Blob& b : blobs) {
                    real dx = static_cast<real>(x) - b.cx;
                    real dy = static_cast<real>(y) - b.cy;
                    v += b.amp[c] *
                         std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
                }
                v = std::clamp(v, 32.0, 223.0);
                img.px(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return img;
}

ImageU8 stamp_fingerprint(const ImageU8& image, const FingerprintSpec& spec) {
    if (spec.pattern.ndim() != 2 || spec.pattern.dim(0) != image.height ||
        spec.pattern.dim(1) != image.width)
        throw ShapeError("fingerprint pattern does not match the image dimensions");
    ImageU8 out = make_image(image.width, image.height, image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            real delta = spec.amplitude * spec.pattern.at({y, x});
            for (int c = 0; c < image.channels; ++c) {
                long v = std::lround(static_cast<real>(image.px(y, x, c)) + delta);
                out.px(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
            }
        }
    }
    return out;
}

DatasetManifest gen_dataset(const FixtureConfig& cfg, const std::string& out_dir) {
    check_config(cfg);
    std::vector<FingerprintSpec> prints = make_fingerprints(cfg);

    struct Group {
        std::string source;
        int count;
        const FingerprintSpec* print;  // null for reals
        bool external;
    };
    std::vector<Group> groups;
    long fakes_total = static_cast<long>(cfg.sources) * cfg.per_source;
    int reals = static_cast<int>(
        std::llround(static_cast<real>(fakes_total) * cfg.real_parts / cfg.fake_parts));
    groups.push_back({"real", reals, nullptr, false});
    for (int i = 0; i < cfg.sources; ++i)
        groups.push_back({prints[static_cast<std::size_t>(i)].source, cfg.per_source,
                          &prints[static_cast<std::size_t>(i)], false});
    if (cfg.with_external) {
        int ext = cfg.external_count > 0 ? cfg.external_count : cfg.per_source;
        groups.push_back({"gmx", ext, &prints.back(), true});
    }

    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    manifest.header["seed"] = std::to_string(cfg.seed);
    manifest.header["image_size"] = std::to_string(cfg.size);
    manifest.header["amplitude"] = std::to_string(cfg.amplitude);
    manifest.header["balance"] =
        std::to_string(cfg.real_parts) + ":" + std::to_string(cfg.fake_parts);
    manifest.header["sibling_pair"] = cfg.sibling_pair ? "1" : "0";

    for (const Group& group : groups) {
        fs::create_directories(fs::path(out_dir) / "images" / group.source);

        // Assign splits by shuffling indices once per group, so class balance
        // carries into every split and the layout is seed-stable.
        std::vector<std::string> split_of(static_cast<std::size_t>(group.count));
        if (group.external) {
            std::fill(split_of.begin(), split_of.end(), "external");
        } else {
            std::vector<int> order(static_cast<std::size_t>(group.count));
            for (int i = 0; i < group.count; ++i) order[static_cast<std::size_t>(i)] = i;
            Rng shuffle_rng(derive_seed(cfg.seed, "split:" + group.source));
            for (int i = group.count - 1; i > 0; --i)
                std::swap(order[static_cast<std::size_t>(i)],
                          order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, i))]);
            int n_train = static_cast<int>(std::llround(cfg.train_frac * group.count));
            int n_val = static_cast<int>(std::llround(cfg.val_frac * group.count));
            n_train = std::min(n_train, group.count);
            n_val = std::min(n_val, group.count - n_train);
            for (int i = 0; i < group.count; ++i) {
                const char* split = i < n_train ? "train" : i < n_train + n_val ? "val" : "test";
                split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = split;
            }
        }

        for (int idx = 0; idx < group.count; ++idx) {
            std::string id = group.source + "-" + zero_padded(idx, 4);
            Rng rng(derive_seed(cfg.seed, "image:" + id));
            ImageU8 img = gen_base_image(rng, cfg.size);
            if (group.print) img = stamp_fingerprint(img, *group.print);
            std::string rel = "images/" + group.source + "/" + id + ".png";
            save_png(img, (fs::path(out_dir) / rel).string());
            manifest.rows.push_back({rel, group.print ? "fake" : "real", group.source,
                                     split_of[static_cast<std::size_t>(idx)]});
        }
    }

    validate_manifest(manifest);
    save_manifest(manifest, (fs::path(out_dir) / "manifest.tsv").string());
    return manifest;
}

}  // namespace ganattr
