#include "ganattr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ganattr/adam.hpp"
#include "ganattr/errors.hpp"
#include "ganattr/losses.hpp"

namespace ganattr {

namespace {

using FetchFn = std::function<Tensor(const std::vector<int>&)>;

std::vector<int> shuffled(const std::vector<int>& v, Rng& rng) {
    std::vector<int> out = v;
    for (int i = static_cast<int>(out.size()) - 1; i > 0; --i)
        std::swap(out[static_cast<std::size_t>(i)],
                  out[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    return out;
}

// Train batches drop a trailing singleton because train-mode batchnorm has no
// statistics to compute from one sample; evaluation keeps every element.
std::vector<std::vector<int>> chunked(const std::vector<int>& order, int batch_size,
                                      bool drop_singleton) {
    std::vector<std::vector<int>> batches;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<int> b(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
        if (drop_singleton && b.size() == 1) continue;
        batches.push_back(std::move(b));
    }
    return batches;
}

Tensor binary_label_tensor(const TrainStreams& s, const std::vector<int>& idx) {
    Tensor t({static_cast<int>(idx.size()), 1});
    for (std::size_t i = 0; i < idx.size(); ++i)
        t.data[i] = s.binary_labels[static_cast<std::size_t>(idx[i])];
    return t;
}

std::vector<int> class_label_vector(const TrainStreams& s, const std::vector<int>& idx) {
    std::vector<int> t(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        t[i] = s.class_labels[static_cast<std::size_t>(idx[i])];
    return t;
}

void validate_streams(const ModelGraph& model, const TrainStreams& s) {
    if (!s.data) throw ValueError("training streams carry no dataset");
    if (s.train_indices.empty()) throw ValueError("empty training split");
    if (s.val_indices.empty()) throw ValueError("empty validation split");
    const std::size_t n = s.data->items.size();
    if (model.decision == DecisionKind::Sigmoid) {
        if (s.binary_labels.size() != n)
            throw ValueError("sigmoid model needs one binary label per dataset item");
    } else {
        if (s.class_labels.size() != n)
            throw ValueError("softmax model needs one class label per dataset item");
    }
}

struct Snapshot {
    std::vector<Tensor> values;
};

Snapshot capture(ModelGraph& model) {
    Snapshot s;
    for (const ParamRef& p : model.all_state()) s.values.push_back(*p.value);
    return s;
}

void restore(ModelGraph& model, const Snapshot& s) {
    auto refs = model.all_state();
    for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].value = s.values[i];
}

// The shared optimization loop; `fetch` maps an index batch to model input.
TrainResult train_core(ModelGraph& model, const TrainStreams& streams,
                       const TrainConfig& cfg, std::uint64_t seed_ns, const FetchFn& fetch) {
    validate_streams(model, streams);
    if (cfg.patience < 1) throw ValueError("patience must be at least 1");
    if (cfg.batch_size < 1) throw ValueError("batch size must be positive");
    if (cfg.max_epochs < 1) throw ValueError("max epochs must be positive");
    if (cfg.init_std <= 0.0 && cfg.init_model)
        throw ValueError("init stddev must be positive");

    const bool binary = model.decision == DecisionKind::Sigmoid;
    if (cfg.init_model) {
        Rng wrng(seed_ns);
        init_weights(model, cfg.init_std, wrng);
    }

    AdamState opt;
    opt.cfg.lr = cfg.effective_lr();
    auto params = model.trainable_params();

    TrainResult result;
    result.best_val_loss = std::numeric_limits<real>::infinity();
    Snapshot best;
    int since_improvement = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed_ns, "shuffle:" + std::to_string(epoch)));
        auto batches =
            chunked(shuffled(streams.train_indices, shuffle_rng), cfg.batch_size, true);
        if (batches.empty())
            throw ValueError("training split too small for the requested batch size");

        real loss_sum = 0.0;
        long seen = 0, correct = 0, positives = 0;
        try {
            for (const auto& bidx : batches) {
                Tensor x = fetch(bidx);
                ForwardTrace trace;
                Tensor logits = graph_forward(model, x, Mode::Train, &trace);
                Tensor dlogits;
                if (binary) {
                    BinaryLoss L = sigmoid_bce(logits, binary_label_tensor(streams, bidx));
                    loss_sum += L.loss * static_cast<real>(bidx.size());
                    for (std::size_t i = 0; i < bidx.size(); ++i) {
                        bool positive = L.probs.data[i] > 0.5;
                        positives += positive ? 1 : 0;
                        bool truth =
                            streams.binary_labels[static_cast<std::size_t>(bidx[i])] > 0.5;
                        correct += positive == truth ? 1 : 0;
                    }
                    dlogits = std::move(L.dlogits);
                } else {
                    std::vector<int> labels = class_label_vector(streams, bidx);
                    MulticlassLoss L = softmax_ce(logits, labels);
                    loss_sum += L.loss * static_cast<real>(bidx.size());
                    const int K = logits.dim(1);
                    for (std::size_t i = 0; i < bidx.size(); ++i) {
                        int pick = 0;
                        for (int k = 1; k < K; ++k)
                            if (L.probs.at({static_cast<int>(i), k}) >
                                L.probs.at({static_cast<int>(i), pick}))
                                pick = k;
                        positives += pick != 0 ? 1 : 0;
                        correct += pick == labels[i] ? 1 : 0;
                    }
                    dlogits = std::move(L.dlogits);
                }
                seen += static_cast<long>(bidx.size());
                Gradients grads = graph_backward(model, trace, dlogits);
                adam_step(params, grads.params, opt);
            }
        } catch (const ComputeError& e) {
            throw ComputeError("training aborted in epoch " + std::to_string(epoch) + ": " +
                               e.what());
        }

        real val_loss_sum = 0.0;
        long val_seen = 0;
        try {
            for (const auto& bidx : chunked(streams.val_indices, cfg.batch_size, false)) {
                Tensor x = fetch(bidx);
                Tensor logits = graph_forward(model, x, Mode::Eval);
                real batch_loss =
                    binary ? sigmoid_bce(logits, binary_label_tensor(streams, bidx)).loss
                           : softmax_ce(logits, class_label_vector(streams, bidx)).loss;
                val_loss_sum += batch_loss * static_cast<real>(bidx.size());
                val_seen += static_cast<long>(bidx.size());
            }
        } catch (const ComputeError& e) {
            throw ComputeError("validation aborted in epoch " + std::to_string(epoch) +
                               ": " + e.what());
        }

        EpochTelemetry t;
        t.epoch = epoch;
        t.train_loss = loss_sum / static_cast<real>(seen);
        t.val_loss = val_loss_sum / static_cast<real>(val_seen);
        t.train_accuracy = static_cast<real>(correct) / static_cast<real>(seen);
        t.positive_fraction = static_cast<real>(positives) / static_cast<real>(seen);
        result.history.push_back(t);

        if (t.val_loss < result.best_val_loss) {
            result.best_val_loss = t.val_loss;
            result.best_epoch = epoch;
            best = capture(model);
            since_improvement = 0;
        } else if (++since_improvement >= cfg.patience) {
            result.stopped_early = true;
            break;
        }
    }

    restore(model, best);
    return result;
}

}  // namespace

real TrainConfig::effective_lr() const {
    if (learning_rate > 0.0) return learning_rate;
    return task == TrainTask::Detection ? 1e-3 : 1e-4;
}

real TrainStreams::negative_ratio() const {
    if (train_indices.empty()) throw ValueError("no training indices");
    long negatives = 0;
    for (int idx : train_indices) {
        if (!binary_labels.empty())
            negatives += binary_labels[static_cast<std::size_t>(idx)] == 0.0 ? 1 : 0;
        else if (!class_labels.empty())
            negatives += class_labels[static_cast<std::size_t>(idx)] == 0 ? 1 : 0;
        else
            throw ValueError("streams carry no labels");
    }
    return static_cast<real>(negatives) / static_cast<real>(train_indices.size());
}

namespace {

std::vector<int> identity_indices(const LoadedDataset& ds) {
    std::vector<int> all(ds.items.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
}

}  // namespace

TrainStreams detection_streams(const LoadedDataset& ds, const SpectrumStats* stats) {
    TrainStreams s;
    s.data = &ds;
    s.train_indices = ds.split_indices("train");
    s.val_indices = ds.split_indices("val");
    s.binary_labels = detection_labels(ds, identity_indices(ds));
    s.stats = stats;
    return s;
}

TrainStreams attribution_streams(const LoadedDataset& ds, const std::string& source,
                                 const SpectrumStats* stats) {
    TrainStreams s;
    s.data = &ds;
    s.train_indices = ds.split_indices("train");
    s.val_indices = ds.split_indices("val");
    s.binary_labels = source_labels(ds, identity_indices(ds), source);
    s.stats = stats;
    return s;
}

TrainStreams multiclass_streams(const LoadedDataset& ds,
                                const std::vector<std::string>& sources,
                                const SpectrumStats* stats) {
    TrainStreams s;
    s.data = &ds;
    s.train_indices = ds.split_indices("train");
    s.val_indices = ds.split_indices("val");
    // Held-out splits may contain sources with no class id (the external
    // generator); only the streamed items get labels, the rest a sentinel
    // that softmax_ce would reject if it ever leaked into a batch.
    s.class_labels.assign(ds.items.size(), -1);
    std::vector<int> covered = s.train_indices;
    covered.insert(covered.end(), s.val_indices.begin(), s.val_indices.end());
    std::vector<int> labels = multiclass_labels(ds, covered, sources);
    for (std::size_t i = 0; i < covered.size(); ++i)
        s.class_labels[static_cast<std::size_t>(covered[i])] = labels[i];
    s.stats = stats;
    return s;
}

TrainResult train(ModelGraph& model, const TrainStreams& streams, const TrainConfig& cfg) {
    validate_streams(model, streams);
    if (model.input.representation == Representation::Dct &&
        (!streams.stats || streams.stats->empty()))
        throw ValueError("spectrum-input model needs whitening statistics");
    const SpectrumStats* stats = streams.stats;
    const LoadedDataset* data = streams.data;
    Representation rep = model.input.representation;
    FetchFn fetch = [data, rep, stats](const std::vector<int>& idx) {
        static const SpectrumStats no_stats;
        return input_batch(*data, idx, rep, stats ? *stats : no_stats);
    };
    return train_core(model, streams, cfg, cfg.model_seed, fetch);
}

FeatureCache build_feature_cache(ModelGraph& primary, const TrainStreams& streams,
                                 int batch_size) {
    if (!streams.data) throw ValueError("training streams carry no dataset");
    if (primary.input.representation == Representation::Dct &&
        (!streams.stats || streams.stats->empty()))
        throw ValueError("spectrum-input primary needs whitening statistics");

    FeatureCache cache;
    cache.cut = primary.branch_cut_layer();
    cache.features.resize(streams.data->items.size());

    std::vector<int> wanted = streams.train_indices;
    wanted.insert(wanted.end(), streams.val_indices.begin(), streams.val_indices.end());
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

    static const SpectrumStats no_stats;
    for (const auto& bidx : chunked(wanted, batch_size, false)) {
        Tensor x = input_batch(*streams.data, bidx, primary.input.representation,
                               streams.stats ? *streams.stats : no_stats);
        Tensor f = graph_forward_range(primary, x, 0, cache.cut, Mode::Eval);
        const int C = f.dim(1), H = f.dim(2), W = f.dim(3);
        const std::size_t plane = static_cast<std::size_t>(C) * H * W;
        for (std::size_t b = 0; b < bidx.size(); ++b) {
            Tensor one({C, H, W});
            std::copy(f.data.begin() + static_cast<std::ptrdiff_t>(b * plane),
                      f.data.begin() + static_cast<std::ptrdiff_t>((b + 1) * plane),
                      one.data.begin());
            cache.features[static_cast<std::size_t>(bidx[b])] = std::move(one);
        }
    }
    return cache;
}

TrainResult train_secondary(ModelGraph& primary, ModelGraph& secondary,
                            const TrainStreams& streams, const TrainConfig& cfg,
                            bool cache_features, const FeatureCache* shared_cache) {
    if (!primary.frozen)
        throw StateError("secondary training requires a frozen primary module");
    const std::string digest_before = weight_digest(primary);
    const int cut = primary.branch_cut_layer();

    FeatureCache local;
    const FeatureCache* cache = shared_cache;
    if (!cache && cache_features) {
        local = build_feature_cache(primary, streams, cfg.batch_size);
        cache = &local;
    }
    if (cache && cache->cut != cut)
        throw StateError("feature cache was built at a different branch point");

    FetchFn fetch;
    if (cache) {
        fetch = [cache](const std::vector<int>& idx) {
            const Tensor& probe = cache->features[static_cast<std::size_t>(idx.at(0))];
            if (probe.data.empty()) throw StateError("index missing from feature cache");
            const int C = probe.dim(0), H = probe.dim(1), W = probe.dim(2);
            Tensor batch({static_cast<int>(idx.size()), C, H, W});
            const std::size_t plane = probe.data.size();
            for (std::size_t b = 0; b < idx.size(); ++b) {
                const Tensor& one = cache->features[static_cast<std::size_t>(idx[b])];
                if (one.data.empty()) throw StateError("index missing from feature cache");
                std::copy(one.data.begin(), one.data.end(),
                          batch.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
            }
            return batch;
        };
    } else {
        const SpectrumStats* stats = streams.stats;
        const LoadedDataset* data = streams.data;
        ModelGraph* trunk = &primary;
        fetch = [trunk, data, stats, cut](const std::vector<int>& idx) {
            static const SpectrumStats no_stats;
            Tensor x = input_batch(*data, idx, trunk->input.representation,
                                   stats ? *stats : no_stats);
            return graph_forward_range(*trunk, x, 0, cut, Mode::Eval);
        };
    }

    std::uint64_t seed_ns = derive_seed(cfg.model_seed, "secondary:" + secondary.name);
    TrainResult result = train_core(secondary, streams, cfg, seed_ns, fetch);

    if (weight_digest(primary) != digest_before)
        throw StateError("primary weights changed during secondary training");
    return result;
}

TelemetryDiagnostics epoch_telemetry_check(const std::vector<EpochTelemetry>& history,
                                           real negative_ratio) {
    if (history.empty()) throw ValueError("telemetry history is empty");
    TelemetryDiagnostics d;
    for (const auto& t : history) {
        if (std::abs(t.train_accuracy - negative_ratio) <= 1e-6 &&
            t.positive_fraction < 1e-3) {
            d.stagnant = true;
            d.stagnant_epochs.push_back(t.epoch);
        }
    }
    return d;
}

}  // namespace ganattr
