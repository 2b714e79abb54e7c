#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ganattr/model_zoo.hpp"
#include "ganattr/tensor.hpp"

namespace ganattr {

// Scores and verdict flags for one probed image. Positive means strictly
// above 0.5; an exact 0.5 counts negative.
struct PredictionRecord {
    std::string image_id;
    std::string true_label;  // "real" or a source id
    real primary_score = 0.0;
    std::map<std::string, real> secondary_scores;

    bool primary_positive = false;
    std::vector<std::string> positive_attributions;  // name order
    bool failed_attribution = false;   // detector fired, no secondary did
    bool multiple_attribution = false;
    bool contradiction = false;        // detector silent, some secondary fired
};

// Recomputes every derived flag from the stored scores.
void derive_flags(PredictionRecord& r);

// One eval-mode pass through the primary; the activation leaving the branch
// block feeds every secondary. Channel count must match the model's input
// representation. probe accepts [C,H,W] or [1,C,H,W]; probe_batch takes
// [B,C,H,W] and returns records in row order.
PredictionRecord probe(ModelBundle& bundle, const Tensor& image);
std::vector<PredictionRecord> probe_batch(ModelBundle& bundle, const Tensor& batch);

// Row argmax of a multiclass model's outputs, for softmax baselines.
std::vector<int> multiclass_predictions(ModelGraph& model, const Tensor& batch);

// "real" when the detector is negative or the attribution failed; otherwise
// the best-scoring source. Exact score ties resolve to the first name.
std::string multiclass_decision(const PredictionRecord& r);

struct BinaryMetrics {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    real precision = 0.0, recall = 0.0, f1 = 0.0;
    // Degenerate denominators report 0 instead of NaN, flagged here.
    bool no_predicted_positives = false;
    bool no_relevant = false;
};

// Detection when source is empty: predicted = detector verdict, relevant =
// any fake. Otherwise one-vs-all for that source: predicted = its secondary's
// verdict, relevant = images truly from it.
BinaryMetrics binary_metrics(const std::vector<PredictionRecord>& records,
                             const std::string& source = "");

enum class Task { Detection, Attribution };

// Records must all come from one held-out source. Detection measures
// sensitivity (fraction flagged fake); attribution measures specificity of
// the probed secondary (fraction it rejects).
real external_accuracy(const std::vector<PredictionRecord>& records, Task task,
                       const std::string& source = "");

// Fraction of records whose secondaries fired while the detector stayed
// negative. Every record must carry secondary scores.
real contradiction_rate(const std::vector<PredictionRecord>& records);

// Fraction of records whose multiclass_decision equals the true label.
real multiclass_accuracy(const std::vector<PredictionRecord>& records);

struct MetricsReport {
    std::map<std::string, BinaryMetrics> binary;  // "detection" or source name
    std::optional<real> multiclass_acc;
    std::optional<real> exa;
    std::optional<real> cr;
};

// Rates as percentages with one decimal, e.g. "PRC 80.0  REC 100.0  F1 88.9".
std::string percent1(real rate);
std::string render_binary_metrics(const BinaryMetrics& m);
std::string render_metrics(const MetricsReport& report);

}  // namespace ganattr
