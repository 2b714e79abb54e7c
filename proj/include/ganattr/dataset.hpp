#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganattr/augment.hpp"
#include "ganattr/dct.hpp"
#include "ganattr/graph.hpp"
#include "ganattr/image.hpp"
#include "ganattr/manifest.hpp"
#include "ganattr/tensor.hpp"

namespace ganattr {

struct DatasetItem {
    std::string path;  // resolved, loadable as-is
    std::string source;
    std::string split;
    bool fake = false;
};

// Everything decoded up front; fixture-scale sets fit comfortably in memory
// as 8-bit pixels and are converted to model inputs per batch.
struct LoadedDataset {
    int image_size = 0;
    std::vector<DatasetItem> items;
    std::vector<ImageU8> images;  // parallel to items, standardized to image_size

    std::vector<int> split_indices(const std::string& split) const;
    std::vector<std::string> fake_sources() const;  // sorted, "real" excluded
};

// Validates the manifest (including file existence), decodes every row, and
// standardizes to image_size via center crop plus bilinear resize.
LoadedDataset load_dataset_images(const DatasetManifest& m, int image_size);

// [B,3,S,S] in [-1,1], rows in index order.
Tensor pixel_batch(const LoadedDataset& ds, const std::vector<int>& indices);

// Log-magnitude frequency stats over the given items, for input whitening.
SpectrumStats dataset_spectrum_stats(const LoadedDataset& ds,
                                     const std::vector<int>& indices);

// [B,1,S,S]: greyscale, 2-d transform, log scale, whitened by stats.
Tensor dct_batch(const LoadedDataset& ds, const std::vector<int>& indices,
                 const SpectrumStats& stats);

// Dispatches to pixel_batch or dct_batch to match what a model expects.
Tensor input_batch(const LoadedDataset& ds, const std::vector<int>& indices,
                   Representation representation, const SpectrumStats& stats);

// Detection targets: fake = 1, real = 0.
std::vector<real> detection_labels(const LoadedDataset& ds, const std::vector<int>& indices);
// One-vs-all targets for a single source.
std::vector<real> source_labels(const LoadedDataset& ds, const std::vector<int>& indices,
                                const std::string& source);
// Multiclass targets: 0 = real, then 1 + position in fake_sources() order.
std::vector<int> multiclass_labels(const LoadedDataset& ds, const std::vector<int>& indices,
                                   const std::vector<std::string>& sources);

// Rewrites a dataset with the stochastic training pipeline applied per image:
// every kind in `enabled` flips its own coin. Outputs land in out_dir with a
// fresh manifest plus a records.jsonl describing what fired per image. Images
// whose final state is exactly a decoded JPEG keep the encoder's bytes as
// .jpg; everything else is stored as .png.
DatasetManifest materialize_augmented(const DatasetManifest& src, const std::string& out_dir,
                                      const std::vector<AugmentKind>& enabled,
                                      std::uint64_t seed);

// Evaluation variant: exactly ceil(N/2) rows, chosen by seeded selection, get
// one sampled application of `kind`; the rest are copied through untouched.
DatasetManifest individually_augment(const DatasetManifest& src, const std::string& out_dir,
                                     AugmentKind kind, std::uint64_t seed);

}  // namespace ganattr
