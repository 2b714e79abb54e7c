#include "ganattr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ganattr/errors.hpp"
#include "ganattr/losses.hpp"

namespace ganattr {

namespace {

constexpr real kThreshold = 0.5;

void require_records(const std::vector<PredictionRecord>& records, const char* who) {
    if (records.empty()) throw ValueError(std::string(who) + ": no records");
}

}  // namespace

void derive_flags(PredictionRecord& r) {
    r.primary_positive = r.primary_score > kThreshold;
    r.positive_attributions.clear();
    for (const auto& [name, score] : r.secondary_scores)
        if (score > kThreshold) r.positive_attributions.push_back(name);
    r.failed_attribution = r.primary_positive && r.positive_attributions.empty();
    r.multiple_attribution = r.positive_attributions.size() > 1;
    r.contradiction = !r.primary_positive && !r.positive_attributions.empty();
}

std::vector<PredictionRecord> probe_batch(ModelBundle& bundle, const Tensor& batch) {
    if (batch.ndim() != 4) throw ShapeError("probe expects a [B,C,H,W] batch");
    ModelGraph& primary = bundle.primary;
    if (batch.dim(1) != primary.input.channels)
        throw ValueError("input has " + std::to_string(batch.dim(1)) +
                         " channels but the model's representation expects " +
                         std::to_string(primary.input.channels));
    if (primary.decision != DecisionKind::Sigmoid)
        throw StateError("probe needs a sigmoid detector, not a multiclass model");

    ForwardTrace trace;
    Tensor logits = graph_forward(primary, batch, Mode::Eval, &trace);

    const int B = batch.dim(0);
    std::vector<PredictionRecord> records(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b)
        records[static_cast<std::size_t>(b)].primary_score = sigmoid(logits.at({b, 0}));

    if (!bundle.secondaries.empty()) {
        const int cut = primary.branch_cut_layer();
        const Tensor& features = trace.outputs[static_cast<std::size_t>(cut - 1)];
        for (ModelGraph& secondary : bundle.secondaries) {
            Tensor s_logits = graph_forward(secondary, features, Mode::Eval);
            for (int b = 0; b < B; ++b)
                records[static_cast<std::size_t>(b)].secondary_scores[secondary.name] =
                    sigmoid(s_logits.at({b, 0}));
        }
    }
    for (auto& r : records) derive_flags(r);
    return records;
}

PredictionRecord probe(ModelBundle& bundle, const Tensor& image) {
    Tensor batch = image;
    if (image.ndim() == 3)
        batch.shape = {1, image.dim(0), image.dim(1), image.dim(2)};
    else if (image.ndim() != 4 || image.dim(0) != 1)
        throw ShapeError("probe expects one [C,H,W] or [1,C,H,W] image");
    return probe_batch(bundle, batch)[0];
}

std::vector<int> multiclass_predictions(ModelGraph& model, const Tensor& batch) {
    Tensor logits = graph_forward(model, batch, Mode::Eval);
    if (logits.ndim() != 2) throw ShapeError("multiclass outputs must be [B,K]");
    std::vector<int> picks(static_cast<std::size_t>(logits.dim(0)));
    for (int b = 0; b < logits.dim(0); ++b) {
        int best = 0;
        for (int k = 1; k < logits.dim(1); ++k)
            if (logits.at({b, k}) > logits.at({b, best})) best = k;
        picks[static_cast<std::size_t>(b)] = best;
    }
    return picks;
}

std::string multiclass_decision(const PredictionRecord& r) {
    if (!r.primary_positive || r.failed_attribution) return "real";
    std::string best;
    real best_score = 0.0;
    // Map order is name order, so an exact tie lands on the first name.
    for (const auto& [name, score] : r.secondary_scores) {
        if (best.empty() || score > best_score) {
            best = name;
            best_score = score;
        }
    }
    return best;
}

BinaryMetrics binary_metrics(const std::vector<PredictionRecord>& records,
                             const std::string& source) {
    require_records(records, "binary_metrics");
    BinaryMetrics m;
    for (const auto& r : records) {
        bool predicted, relevant;
        if (source.empty()) {
            predicted = r.primary_positive;
            relevant = r.true_label != "real";
        } else {
            auto it = r.secondary_scores.find(source);
            if (it == r.secondary_scores.end())
                throw DataError("record " + r.image_id + " lacks a secondary score for \"" +
                                source + "\"");
            predicted = it->second > kThreshold;
            relevant = r.true_label == source;
        }
        if (predicted && relevant) ++m.tp;
        else if (predicted && !relevant) ++m.fp;
        else if (!predicted && relevant) ++m.fn;
        else ++m.tn;
    }
    m.no_predicted_positives = m.tp + m.fp == 0;
    m.no_relevant = m.tp + m.fn == 0;
    m.precision = m.no_predicted_positives
                      ? 0.0
                      : static_cast<real>(m.tp) / static_cast<real>(m.tp + m.fp);
    m.recall =
        m.no_relevant ? 0.0 : static_cast<real>(m.tp) / static_cast<real>(m.tp + m.fn);
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

real external_accuracy(const std::vector<PredictionRecord>& records, Task task,
                       const std::string& source) {
    require_records(records, "external_accuracy");
    const std::string& held_out = records.front().true_label;
    if (held_out == "real")
        throw DataError("external records must come from a fake source");
    for (const auto& r : records)
        if (r.true_label != held_out)
            throw DataError("external records mix sources \"" + held_out + "\" and \"" +
                            r.true_label + "\"");

    long hits = 0;
    if (task == Task::Detection) {
        for (const auto& r : records) hits += r.primary_positive ? 1 : 0;
    } else {
        if (source.empty())
            throw ValueError("attribution external accuracy needs the probed source");
        for (const auto& r : records) {
            auto it = r.secondary_scores.find(source);
            if (it == r.secondary_scores.end())
                throw DataError("record " + r.image_id + " lacks a secondary score for \"" +
                                source + "\"");
            hits += it->second > kThreshold ? 0 : 1;
        }
    }
    return static_cast<real>(hits) / static_cast<real>(records.size());
}

real contradiction_rate(const std::vector<PredictionRecord>& records) {
    require_records(records, "contradiction_rate");
    long hits = 0;
    for (const auto& r : records) {
        if (r.secondary_scores.empty())
            throw ValueError("contradiction_rate needs secondary scores on every record");
        hits += r.contradiction ? 1 : 0;
    }
    return static_cast<real>(hits) / static_cast<real>(records.size());
}

real multiclass_accuracy(const std::vector<PredictionRecord>& records) {
    require_records(records, "multiclass_accuracy");
    long hits = 0;
    for (const auto& r : records) hits += multiclass_decision(r) == r.true_label ? 1 : 0;
    return static_cast<real>(hits) / static_cast<real>(records.size());
}

std::string percent1(real rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", rate * 100.0);
    return buf;
}

std::string render_binary_metrics(const BinaryMetrics& m) {
    return "PRC " + percent1(m.precision) + "  REC " + percent1(m.recall) + "  F1 " +
           percent1(m.f1);
}

std::string render_metrics(const MetricsReport& report) {
    std::ostringstream out;
    for (const auto& [name, m] : report.binary)
        out << name << ": " << render_binary_metrics(m) << "\n";
    if (report.multiclass_acc) out << "ACC " << percent1(*report.multiclass_acc) << "\n";
    if (report.exa) out << "EXA " << percent1(*report.exa) << "\n";
    if (report.cr) out << "CR " << percent1(*report.cr) << "\n";
    return out.str();
}

}  // namespace ganattr
