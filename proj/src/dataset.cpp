#include "ganattr/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

#include "ganattr/errors.hpp"
#include "ganattr/parallel.hpp"

namespace fs = std::filesystem;

namespace ganattr {

namespace {

nlohmann::ordered_json record_to_json(const std::string& path,
                                      const AugmentationRecord& rec) {
    nlohmann::ordered_json j;
    j["path"] = path;
    j["fired"] = rec.fired();
    if (rec.blur) j["blur_kernel"] = rec.blur_kernel;
    if (rec.crop) {
        j["crop_pct_y"] = rec.crop_pct_y;
        j["crop_pct_x"] = rec.crop_pct_x;
        j["crop_off_y"] = rec.crop_off_y;
        j["crop_off_x"] = rec.crop_off_x;
    }
    if (rec.jpeg) {
        j["jpeg_quality"] = rec.jpeg_quality;
        j["jpeg_codec"] = rec.jpeg_codec;
    }
    if (rec.noise) j["noise_variance"] = rec.noise_variance;
    return j;
}

struct AugmentedRow {
    std::string rel_path;
    std::vector<std::uint8_t> bytes;  // exact file content to write
    nlohmann::ordered_json record;
};

// Compressed streams survive verbatim only while no later step repaints the
// pixels; in the fixed order, noise is the only step after compression.
AugmentedRow pack_outcome(const std::string& src_rel, const AugmentOutcome& outcome) {
    AugmentedRow slot;
    fs::path rel(src_rel);
    bool keep_jpeg = outcome.record.jpeg && !outcome.record.noise;
    slot.rel_path =
        (rel.parent_path() / rel.stem()).string() + (keep_jpeg ? ".jpg" : ".png");
    slot.bytes = keep_jpeg ? outcome.jpeg_bytes : encode_png(outcome.image);
    slot.record = record_to_json(slot.rel_path, outcome.record);
    return slot;
}

// Shared tail for both materializers: write images, records, manifest.
DatasetManifest write_augmented(const DatasetManifest& src, const std::string& out_dir,
                                const std::vector<AugmentedRow>& produced) {
    DatasetManifest out;
    out.base_dir = out_dir;
    out.header = src.header;
    out.header["derived_from"] = manifest_digest(src);

    std::ofstream records((fs::path(out_dir) / "records.jsonl").string(),
                          std::ios::binary | std::ios::trunc);
    if (!records) throw IoError("cannot write augmentation records in " + out_dir);

    for (std::size_t i = 0; i < src.rows.size(); ++i) {
        const ManifestRow& row = src.rows[i];
        const AugmentedRow& slot = produced[i];
        fs::path full = fs::path(out_dir) / slot.rel_path;
        fs::create_directories(full.parent_path());
        std::ofstream img(full, std::ios::binary | std::ios::trunc);
        if (!img) throw IoError("cannot write augmented image: " + full.string());
        img.write(reinterpret_cast<const char*>(slot.bytes.data()),
                  static_cast<std::streamsize>(slot.bytes.size()));
        if (!img) throw IoError("failed writing augmented image: " + full.string());
        records << slot.record.dump() << "\n";

        out.rows.push_back({slot.rel_path, row.label, row.source, row.split});
    }
    validate_manifest(out);
    save_manifest(out, (fs::path(out_dir) / "manifest.tsv").string());
    return out;
}

}  // namespace

std::vector<int> LoadedDataset::split_indices(const std::string& split) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].split == split) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<std::string> LoadedDataset::fake_sources() const {
    std::set<std::string> seen;
    for (const auto& item : items)
        if (item.fake && item.split != "external") seen.insert(item.source);
    return {seen.begin(), seen.end()};
}

LoadedDataset load_dataset_images(const DatasetManifest& m, int image_size) {
    if (image_size < 16) throw ValueError("dataset image size must be at least 16");
    validate_manifest_files(m);

    LoadedDataset ds;
    ds.image_size = image_size;
    ds.items.reserve(m.rows.size());
    for (const auto& row : m.rows)
        ds.items.push_back({m.resolve(row), row.source, row.split, row.label == "fake"});

    ds.images.resize(ds.items.size());
    // Decoding dominates load time; images land in disjoint slots.
    parallel_for(ds.items.size(), [&](std::size_t i) {
        ds.images[i] = standardize(load_image(ds.items[i].path), image_size);
    });
    return ds;
}

Tensor pixel_batch(const LoadedDataset& ds, const std::vector<int>& indices) {
    if (indices.empty()) throw ValueError("empty batch");
    int s = ds.image_size;
    Tensor batch = Tensor::zeros({static_cast<int>(indices.size()), 3, s, s});
    std::size_t plane = static_cast<std::size_t>(3) * s * s;
    for (std::size_t b = 0; b < indices.size(); ++b) {
        Tensor one = pixel_tensor(ds.images[static_cast<std::size_t>(indices[b])]);
        std::copy(one.data.begin(), one.data.end(),
                  batch.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
    }
    return batch;
}

SpectrumStats dataset_spectrum_stats(const LoadedDataset& ds,
                                     const std::vector<int>& indices) {
    std::vector<Tensor> spectra;
    spectra.reserve(indices.size());
    for (int idx : indices)
        spectra.push_back(log_scale(dct2(gray_tensor(ds.images[static_cast<std::size_t>(idx)]))));
    return compute_spectrum_stats(spectra);
}

Tensor dct_batch(const LoadedDataset& ds, const std::vector<int>& indices,
                 const SpectrumStats& stats) {
    if (indices.empty()) throw ValueError("empty batch");
    int s = ds.image_size;
    Tensor batch = Tensor::zeros({static_cast<int>(indices.size()), 1, s, s});
    std::size_t plane = static_cast<std::size_t>(s) * s;
    for (std::size_t b = 0; b < indices.size(); ++b) {
        Tensor spec =
            log_scale(dct2(gray_tensor(ds.images[static_cast<std::size_t>(indices[b])])));
        Tensor white = normalize_spectrum(spec, stats);
        std::copy(white.data.begin(), white.data.end(),
                  batch.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
    }
    return batch;
}

Tensor input_batch(const LoadedDataset& ds, const std::vector<int>& indices,
                   Representation representation, const SpectrumStats& stats) {
    if (representation == Representation::Pixel) return pixel_batch(ds, indices);
    return dct_batch(ds, indices, stats);
}

std::vector<real> detection_labels(const LoadedDataset& ds, const std::vector<int>& indices) {
    std::vector<real> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i)
        labels[i] = ds.items[static_cast<std::size_t>(indices[i])].fake ? 1.0 : 0.0;
    return labels;
}

std::vector<real> source_labels(const LoadedDataset& ds, const std::vector<int>& indices,
                                const std::string& source) {
    std::vector<real> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i)
        labels[i] =
            ds.items[static_cast<std::size_t>(indices[i])].source == source ? 1.0 : 0.0;
    return labels;
}

std::vector<int> multiclass_labels(const LoadedDataset& ds, const std::vector<int>& indices,
                                   const std::vector<std::string>& sources) {
    std::vector<int> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const DatasetItem& item = ds.items[static_cast<std::size_t>(indices[i])];
        if (!item.fake) {
            labels[i] = 0;
            continue;
        }
        auto it = std::find(sources.begin(), sources.end(), item.source);
        if (it == sources.end())
            throw DataError("source \"" + item.source + "\" has no multiclass label");
        labels[i] = 1 + static_cast<int>(it - sources.begin());
    }
    return labels;
}

DatasetManifest materialize_augmented(const DatasetManifest& src, const std::string& out_dir,
                                      const std::vector<AugmentKind>& enabled,
                                      std::uint64_t seed) {
    validate_manifest_files(src);
    if (enabled.empty()) throw ValueError("augmented materialization needs at least one kind");
    fs::create_directories(out_dir);

    auto is_enabled = [&](AugmentKind k) {
        return std::find(enabled.begin(), enabled.end(), k) != enabled.end();
    };

    std::vector<AugmentedRow> produced(src.rows.size());
    for (std::size_t i = 0; i < src.rows.size(); ++i) {
        const ManifestRow& row = src.rows[i];
        Rng rng(derive_seed(seed, "augment:" + row.path));

        AugmentOutcome outcome;
        outcome.image = load_image(src.resolve(row));
        // Walk the canonical order; a coin is only spent on enabled kinds, so
        // enabling all four reproduces the stochastic training pipeline draw
        // for draw.
        if (is_enabled(AugmentKind::Blur) && rng.coin(AugmentationConfig::probability))
            outcome.image = gaussian_blur(outcome.image, rng, outcome.record);
        if (is_enabled(AugmentKind::Crop) && rng.coin(AugmentationConfig::probability))
            outcome.image = random_crop_upsample(outcome.image, rng, outcome.record);
        if (is_enabled(AugmentKind::Jpeg) && rng.coin(AugmentationConfig::probability))
            outcome.image = jpeg_compress(outcome.image, rng, outcome.record,
                                          &outcome.jpeg_bytes);
        if (is_enabled(AugmentKind::Noise) && rng.coin(AugmentationConfig::probability))
            outcome.image = additive_noise(outcome.image, rng, outcome.record);

        produced[i] = pack_outcome(row.path, outcome);
    }
    return write_augmented(src, out_dir, produced);
}

DatasetManifest individually_augment(const DatasetManifest& src, const std::string& out_dir,
                                     AugmentKind kind, std::uint64_t seed) {
    validate_manifest_files(src);
    fs::create_directories(out_dir);

    Rng pick_rng(derive_seed(seed, "half-selection"));
    std::vector<bool> selected =
        half_selection(static_cast<int>(src.rows.size()), pick_rng);

    std::vector<AugmentedRow> produced(src.rows.size());
    for (std::size_t i = 0; i < src.rows.size(); ++i) {
        const ManifestRow& row = src.rows[i];
        AugmentOutcome outcome;
        outcome.image = load_image(src.resolve(row));
        if (selected[i]) {
            Rng rng(derive_seed(seed, "augment:" + row.path));
            outcome = apply_single(outcome.image, kind, rng);
        }
        produced[i] = pack_outcome(row.path, outcome);
    }
    return write_augmented(src, out_dir, produced);
}

}  // namespace ganattr
