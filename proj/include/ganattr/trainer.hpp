#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganattr/dataset.hpp"
#include "ganattr/graph.hpp"

namespace ganattr {

enum class TrainTask { Detection, Attribution };

struct TrainConfig {
    TrainTask task = TrainTask::Detection;
    real learning_rate = 0.0;  // 0 means the task default below
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 5;  // epochs without validation improvement before stopping
    std::uint64_t model_seed = 2021;
    real init_std = 0.02;
    bool init_model = true;  // false resumes from the weights already present

    // 1e-3 for detection, 1e-4 for attribution unless overridden.
    real effective_lr() const;
};

struct EpochTelemetry {
    int epoch = 0;  // 1-based
    real train_loss = 0.0;
    real val_loss = 0.0;
    real train_accuracy = 0.0;
    real positive_fraction = 0.0;  // predicted-positive rate on train batches
};

struct TrainResult {
    std::vector<EpochTelemetry> history;
    int best_epoch = 0;  // epoch whose weights the model now carries
    real best_val_loss = 0.0;
    bool stopped_early = false;
};

// Index lists plus labels for one training problem. Labels are aligned with
// the dataset's item order; the model's decision head picks which array is
// consulted (sigmoid reads binary_labels, softmax reads class_labels).
struct TrainStreams {
    const LoadedDataset* data = nullptr;
    std::vector<int> train_indices;
    std::vector<int> val_indices;
    std::vector<real> binary_labels;
    std::vector<int> class_labels;
    const SpectrumStats* stats = nullptr;  // required by spectrum-input models

    // Fraction of zero labels in the training stream, the reference value for
    // the stagnancy diagnostic.
    real negative_ratio() const;
};

TrainStreams detection_streams(const LoadedDataset& ds, const SpectrumStats* stats = nullptr);
TrainStreams attribution_streams(const LoadedDataset& ds, const std::string& source,
                                 const SpectrumStats* stats = nullptr);
TrainStreams multiclass_streams(const LoadedDataset& ds,
                                const std::vector<std::string>& sources,
                                const SpectrumStats* stats = nullptr);

// Minibatch optimization with early stopping on validation cross-entropy.
// The model ends up carrying the best-validation-epoch weights, never the
// last epoch's. Throws ComputeError when a loss degenerates, ValueError on
// empty streams.
TrainResult train(ModelGraph& model, const TrainStreams& streams, const TrainConfig& cfg);

// Branch activations of a frozen primary, precomputed per dataset item so
// several secondaries can share one pass. Slots outside `indices` stay empty.
struct FeatureCache {
    int cut = 0;  // primary layer index the features leave
    std::vector<Tensor> features;  // aligned with dataset items
};

FeatureCache build_feature_cache(ModelGraph& primary, const TrainStreams& streams,
                                 int batch_size);

// Trains only the secondary on the frozen primary's branch features. The
// primary must be frozen (its batchnorms run in eval mode, its digest is
// asserted unchanged). Every secondary derives its own seed stream from its
// name, so training order and concurrency cannot change results. Passing a
// prebuilt cache skips the per-call feature pass; passing none with
// cache_features=false recomputes features batch by batch, which is bitwise
// equivalent.
TrainResult train_secondary(ModelGraph& primary, ModelGraph& secondary,
                            const TrainStreams& streams, const TrainConfig& cfg,
                            bool cache_features = true,
                            const FeatureCache* shared_cache = nullptr);

struct TelemetryDiagnostics {
    bool stagnant = false;
    std::vector<int> stagnant_epochs;  // 1-based epochs flagged all-negative
};

// Flags epochs whose train accuracy sits exactly at the negative-label ratio
// (within 1e-6) while the model predicts essentially nothing positive.
TelemetryDiagnostics epoch_telemetry_check(const std::vector<EpochTelemetry>& history,
                                           real negative_ratio);

}  // namespace ganattr
