#include "ganattr/phases.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "ganattr/dataset.hpp"
#include "ganattr/digest.hpp"
#include "ganattr/errors.hpp"
#include "ganattr/fixtures.hpp"
#include "ganattr/model_zoo.hpp"
#include "ganattr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace ganattr {

namespace {

constexpr const char* kConfigFile = "config.json";
constexpr const char* kLineageFile = "lineage.json";

// Reference attribution topologies retrained per seed alongside the
// proposed model; each carries its own fixed input representation.
const std::vector<std::pair<std::string, Representation>> kBaselines = {
    {"gandct-conv", Representation::Dct},
    {"ganfp-postpool", Representation::Pixel},
};

std::string rep_name(Representation r) {
    return r == Representation::Pixel ? "pixel" : "dct";
}

Representation rep_from_name(const std::string& s) {
    if (s == "pixel") return Representation::Pixel;
    if (s == "dct") return Representation::Dct;
    throw DataError("unknown representation '" + s + "' in workspace config");
}

ordered_json config_to_json(const PhaseConfig& cfg) {
    ordered_json j;
    j["version"] = 1;
    j["image_size"] = cfg.image_size;
    j["model_seeds"] = cfg.model_seeds;
    j["representations"] = ordered_json::array();
    for (Representation r : cfg.representations) j["representations"].push_back(rep_name(r));
    j["variants"] = ordered_json::array();
    for (AugmentKind k : cfg.variants) j["variants"].push_back(augment_kind_name(k));
    j["with_baselines"] = cfg.with_baselines;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["detection_lr"] = cfg.detection_lr;
    j["attribution_lr"] = cfg.attribution_lr;
    j["augment_seed"] = cfg.augment_seed;
    return j;
}

std::string config_text(const PhaseConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

void check_config(const PhaseConfig& cfg) {
    if (cfg.image_size < 16) throw ValueError("workspace image size below 16");
    if (cfg.model_seeds.empty()) throw ValueError("workspace needs at least one model seed");
    if (cfg.representations.empty())
        throw ValueError("workspace needs at least one input representation");
    if (cfg.batch_size < 2) throw ValueError("workspace batch size below 2");
    if (cfg.max_epochs < 1 || cfg.patience < 1)
        throw ValueError("workspace epoch budget and patience must be positive");
    for (std::size_t i = 0; i < cfg.model_seeds.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.model_seeds.size(); ++j)
            if (cfg.model_seeds[i] == cfg.model_seeds[j])
                throw ValueError("duplicate model seed in workspace config");
    for (std::size_t i = 0; i < cfg.variants.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.variants.size(); ++j)
            if (cfg.variants[i] == cfg.variants[j])
                throw ValueError("duplicate augmentation variant in workspace config");
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

PhaseConfig parse_config(const std::string& text, const std::string& origin) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw DataError("malformed workspace config " + origin + ": " + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw DataError("unsupported workspace config version in " + origin);
        PhaseConfig cfg;
        cfg.image_size = j.at("image_size").get<int>();
        cfg.model_seeds = j.at("model_seeds").get<std::vector<std::uint64_t>>();
        cfg.representations.clear();
        for (const auto& r : j.at("representations"))
            cfg.representations.push_back(rep_from_name(r.get<std::string>()));
        cfg.variants.clear();
        for (const auto& v : j.at("variants"))
            cfg.variants.push_back(augment_kind_from_name(v.get<std::string>()));
        cfg.with_baselines = j.at("with_baselines").get<bool>();
        cfg.batch_size = j.at("batch_size").get<int>();
        cfg.max_epochs = j.at("max_epochs").get<int>();
        cfg.patience = j.at("patience").get<int>();
        cfg.detection_lr = j.at("detection_lr").get<real>();
        cfg.attribution_lr = j.at("attribution_lr").get<real>();
        cfg.augment_seed = j.at("augment_seed").get<std::uint64_t>();
        check_config(cfg);
        return cfg;
    } catch (const ordered_json::exception& e) {
        throw DataError("workspace config " + origin + " is missing fields: " + e.what());
    }
}

std::string seed_dir(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

std::string variant_dataset_dir(const std::string& variant) { return "data/" + variant; }

// Lineage persistence: one JSON document holding every artifact record,
// replaced wholesale on update so partial writes cannot interleave.
ordered_json lineage_document(const fs::path& root) {
    fs::path file = root / kLineageFile;
    if (!fs::exists(file)) {
        ordered_json fresh;
        fresh["version"] = 1;
        fresh["entries"] = ordered_json::array();
        return fresh;
    }
    try {
        ordered_json j = ordered_json::parse(read_text_file(file));
        if (j.at("version").get<int>() != 1)
            throw DataError("unsupported lineage version in " + file.string());
        return j;
    } catch (const ordered_json::exception& e) {
        throw DataError("malformed lineage manifest " + file.string() + ": " + e.what());
    }
}

ordered_json entry_to_json(const LineageEntry& e) {
    ordered_json j;
    j["artifact"] = e.artifact;
    j["phase"] = e.phase;
    j["kind"] = e.kind;
    j["representation"] = e.representation;
    j["seed"] = e.seed;
    j["variant"] = e.variant;
    j["data"] = e.data_path;
    j["data_digest"] = e.data_digest;
    j["parents"] = e.parents;
    j["artifact_digest"] = e.artifact_digest;
    j["config_digest"] = e.config_digest;
    j["training"] = ordered_json::array();
    for (const TrainingSummary& t : e.training) {
        ordered_json row;
        row["model"] = t.model;
        row["epochs"] = t.epochs;
        row["best_epoch"] = t.best_epoch;
        row["best_val_loss"] = t.best_val_loss;
        row["stopped_early"] = t.stopped_early;
        row["stagnant"] = t.stagnant;
        j["training"].push_back(row);
    }
    return j;
}

LineageEntry entry_from_json(const ordered_json& j) {
    LineageEntry e;
    e.artifact = j.at("artifact").get<std::string>();
    e.phase = j.at("phase").get<int>();
    e.kind = j.at("kind").get<std::string>();
    e.representation = j.at("representation").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.variant = j.at("variant").get<std::string>();
    e.data_path = j.at("data").get<std::string>();
    e.data_digest = j.at("data_digest").get<std::string>();
    e.parents = j.at("parents").get<std::vector<std::string>>();
    e.artifact_digest = j.at("artifact_digest").get<std::string>();
    e.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& row : j.at("training")) {
        TrainingSummary t;
        t.model = row.at("model").get<std::string>();
        t.epochs = row.at("epochs").get<int>();
        t.best_epoch = row.at("best_epoch").get<int>();
        t.best_val_loss = row.at("best_val_loss").get<real>();
        t.stopped_early = row.at("stopped_early").get<bool>();
        t.stagnant = row.at("stagnant").get<bool>();
        e.training.push_back(t);
    }
    return e;
}

void upsert_lineage(const fs::path& root, const LineageEntry& entry) {
    ordered_json doc = lineage_document(root);
    ordered_json row = entry_to_json(entry);
    bool replaced = false;
    for (auto& existing : doc["entries"]) {
        if (existing.at("artifact").get<std::string>() == entry.artifact) {
            existing = row;
            replaced = true;
            break;
        }
    }
    if (!replaced) doc["entries"].push_back(row);
    write_text_file(root / kLineageFile, doc.dump(2) + "\n");
}

// Caches datasets and the clean-set whitening statistics across one
// run_phase call; everything reloads fresh per call so two identical runs
// share no hidden state.
struct Ctx {
    fs::path root;
    PhaseConfig cfg;
    std::string cfg_digest;
    std::map<std::string, LoadedDataset> datasets;
    std::map<std::string, std::string> digests;
    SpectrumStats clean_stats;
    bool stats_ready = false;

    explicit Ctx(const std::string& workspace) : root(workspace) {
        fs::path file = root / kConfigFile;
        if (!fs::exists(file))
            throw DependencyError("workspace " + root.string() +
                                  " is not initialized (missing config.json)");
        std::string text = read_text_file(file);
        cfg = parse_config(text, file.string());
        cfg_digest = sha256_hex(text);
    }

    LoadedDataset& dataset(const std::string& name) {
        auto it = datasets.find(name);
        if (it != datasets.end()) return it->second;
        fs::path mf = root / "data" / name / "manifest.tsv";
        if (!fs::exists(mf))
            throw DependencyError("workspace dataset data/" + name +
                                  " is missing (initialize the workspace first)");
        DatasetManifest m = load_manifest(mf.string());
        digests[name] = manifest_digest(m);
        auto [pos, inserted] = datasets.emplace(name, load_dataset_images(m, cfg.image_size));
        (void)inserted;
        return pos->second;
    }

    std::string data_digest(const std::string& name) {
        dataset(name);
        return digests.at(name);
    }

    // Whitening statistics always come from the clean training split, also
    // when the model itself trains on augmented data.
    const SpectrumStats* stats(Representation rep) {
        if (rep == Representation::Pixel) return nullptr;
        if (!stats_ready) {
            LoadedDataset& clean = dataset("clean");
            clean_stats = dataset_spectrum_stats(clean, clean.split_indices("train"));
            stats_ready = true;
        }
        return &clean_stats;
    }

    bool uses_spectrum() const {
        if (cfg.with_baselines) return true;
        return std::find(cfg.representations.begin(), cfg.representations.end(),
                         Representation::Dct) != cfg.representations.end();
    }
};

TrainConfig phase_train_config(const Ctx& ctx, TrainTask task, std::uint64_t seed,
                               bool init_model) {
    TrainConfig tc;
    tc.task = task;
    tc.batch_size = ctx.cfg.batch_size;
    tc.max_epochs = ctx.cfg.max_epochs;
    tc.patience = ctx.cfg.patience;
    tc.model_seed = seed;
    tc.init_model = init_model;
    return tc;
}

void write_telemetry(const fs::path& root, int phase, std::uint64_t seed,
                     const std::string& name, const TrainResult& r) {
    fs::path dir = root / ("phase" + std::to_string(phase)) / seed_dir(seed) / "telemetry";
    fs::create_directories(dir);
    std::ofstream out(dir / (name + ".jsonl"), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write telemetry " + (dir / (name + ".jsonl")).string());
    for (const EpochTelemetry& t : r.history) {
        ordered_json row;
        row["epoch"] = t.epoch;
        row["train_loss"] = t.train_loss;
        row["val_loss"] = t.val_loss;
        row["train_accuracy"] = t.train_accuracy;
        row["positive_fraction"] = t.positive_fraction;
        out << row.dump() << "\n";
    }
}

TrainingSummary summarize(const std::string& model, const TrainResult& r, real negative_ratio) {
    TrainingSummary s;
    s.model = model;
    s.epochs = static_cast<int>(r.history.size());
    s.best_epoch = r.best_epoch;
    s.best_val_loss = r.best_val_loss;
    s.stopped_early = r.stopped_early;
    s.stagnant = epoch_telemetry_check(r.history, negative_ratio).stagnant;
    return s;
}

std::string emit_bundle(Ctx& ctx, ModelBundle& bundle, LineageEntry entry) {
    fs::path abs = ctx.root / entry.artifact;
    fs::create_directories(abs.parent_path());
    save_bundle(bundle, abs.string());
    entry.artifact_digest = sha256_file_hex(abs.string());
    entry.config_digest = ctx.cfg_digest;
    upsert_lineage(ctx.root, entry);
    return entry.artifact;
}

std::vector<std::string> phase_variants(const PhaseConfig& cfg) {
    std::vector<std::string> v = {"multi"};
    for (AugmentKind k : cfg.variants) v.push_back(augment_kind_name(k));
    return v;
}

std::string primary_artifact(std::uint64_t seed, Representation rep) {
    return "phase1/" + seed_dir(seed) + "/primary-" + rep_name(rep) + ".gab";
}

std::string refit_artifact(std::uint64_t seed, Representation rep, const std::string& variant) {
    return "phase2/" + seed_dir(seed) + "/primary-" + rep_name(rep) + "-" + variant + ".gab";
}

std::string attribution_artifact(std::uint64_t seed, Representation rep) {
    return "phase3/" + seed_dir(seed) + "/attribution-" + rep_name(rep) + ".gab";
}

std::string baseline_artifact(std::uint64_t seed, const std::string& name) {
    return "phase3/" + seed_dir(seed) + "/baseline-" + name + ".gab";
}

std::string phase4_artifact(std::uint64_t seed, Representation rep, const std::string& variant) {
    return "phase4/" + seed_dir(seed) + "/attribution-" + rep_name(rep) + "-" + variant +
           ".gab";
}

std::string phase4_baseline_artifact(std::uint64_t seed, const std::string& name) {
    return "phase4/" + seed_dir(seed) + "/baseline-" + name + "-multi.gab";
}

std::vector<std::string> expected_artifacts(const PhaseConfig& cfg, int phase) {
    std::vector<std::string> out;
    for (std::uint64_t seed : cfg.model_seeds) {
        for (Representation rep : cfg.representations) {
            switch (phase) {
                case 1:
                    out.push_back(primary_artifact(seed, rep));
                    break;
                case 2:
                    for (const std::string& v : phase_variants(cfg))
                        out.push_back(refit_artifact(seed, rep, v));
                    break;
                case 3:
                    out.push_back(attribution_artifact(seed, rep));
                    break;
                case 4:
                    for (const std::string& v : phase_variants(cfg))
                        out.push_back(phase4_artifact(seed, rep, v));
                    break;
                default:
                    throw ValueError("phase index must be 1 through 4");
            }
        }
        if (cfg.with_baselines && phase == 3)
            for (const auto& [name, rep] : kBaselines)
                out.push_back(baseline_artifact(seed, name));
        if (cfg.with_baselines && phase == 4)
            for (const auto& [name, rep] : kBaselines)
                out.push_back(phase4_baseline_artifact(seed, name));
    }
    return out;
}

void require_artifacts(const Ctx& ctx, int requested, int producer,
                       const std::vector<std::string>& artifacts) {
    for (const std::string& rel : artifacts)
        if (!fs::exists(ctx.root / rel))
            throw DependencyError("phase " + std::to_string(requested) + " requires phase " +
                                  std::to_string(producer) + " artifacts (missing " + rel +
                                  ")");
}

void require_dataset(const Ctx& ctx, int requested, const std::string& name) {
    if (!fs::exists(ctx.root / "data" / name / "manifest.tsv"))
        throw DependencyError("phase " + std::to_string(requested) +
                              " requires the materialized dataset data/" + name +
                              " (initialize the workspace first)");
}

PhaseOutcome phase1(Ctx& ctx) {
    PhaseOutcome out;
    out.phase = 1;
    for (std::uint64_t seed : ctx.cfg.model_seeds) {
        for (Representation rep : ctx.cfg.representations) {
            LoadedDataset& clean = ctx.dataset("clean");
            TrainStreams streams = detection_streams(clean, ctx.stats(rep));
            ModelGraph model = build_primary(rep, ctx.cfg.image_size);
            TrainResult r =
                train(model, streams, phase_train_config(ctx, TrainTask::Detection, seed, true));
            write_telemetry(ctx.root, 1, seed, "primary-" + rep_name(rep), r);

            ModelBundle bundle;
            bundle.primary = std::move(model);
            if (rep == Representation::Dct) bundle.stats = *ctx.stats(rep);

            LineageEntry e;
            e.artifact = primary_artifact(seed, rep);
            e.phase = 1;
            e.kind = "primary";
            e.representation = rep_name(rep);
            e.seed = seed;
            e.data_path = "data/clean";
            e.data_digest = ctx.data_digest("clean");
            e.training = {summarize("primary", r, streams.negative_ratio())};
            out.artifacts.push_back(emit_bundle(ctx, bundle, std::move(e)));
        }
    }
    return out;
}

PhaseOutcome phase2(Ctx& ctx) {
    PhaseOutcome out;
    out.phase = 2;
    for (std::uint64_t seed : ctx.cfg.model_seeds) {
        for (Representation rep : ctx.cfg.representations) {
            const std::string parent = primary_artifact(seed, rep);
            for (const std::string& variant : phase_variants(ctx.cfg)) {
                ModelBundle parent_bundle = load_bundle((ctx.root / parent).string());
                ModelGraph model = std::move(parent_bundle.primary);
                LoadedDataset& ds = ctx.dataset(variant);
                TrainStreams streams = detection_streams(ds, ctx.stats(rep));
                TrainResult r = train(
                    model, streams, phase_train_config(ctx, TrainTask::Detection, seed, false));
                write_telemetry(ctx.root, 2, seed,
                                "primary-" + rep_name(rep) + "-" + variant, r);

                ModelBundle bundle;
                bundle.primary = std::move(model);
                if (rep == Representation::Dct) bundle.stats = *ctx.stats(rep);

                LineageEntry e;
                e.artifact = refit_artifact(seed, rep, variant);
                e.phase = 2;
                e.kind = "primary";
                e.representation = rep_name(rep);
                e.seed = seed;
                e.variant = variant;
                e.data_path = variant_dataset_dir(variant);
                e.data_digest = ctx.data_digest(variant);
                e.parents = {parent};
                e.training = {summarize("primary", r, streams.negative_ratio())};
                out.artifacts.push_back(emit_bundle(ctx, bundle, std::move(e)));
            }
        }
    }
    return out;
}

// Grows one secondary per fake source on a frozen trunk and returns the
// assembled bundle's lineage summaries. The caller owns naming and parents.
std::vector<TrainingSummary> grow_secondaries(Ctx& ctx, ModelBundle& bundle,
                                              LoadedDataset& ds, std::uint64_t seed,
                                              bool fresh, int phase,
                                              const std::string& telemetry_stem) {
    bundle.primary.frozen = true;
    const std::vector<std::string> sources = ds.fake_sources();
    if (sources.empty()) throw DataError("attribution training needs at least one fake source");
    const SpectrumStats* stats = ctx.stats(bundle.primary.input.representation);

    TrainStreams probe = attribution_streams(ds, sources.front(), stats);
    FeatureCache cache = build_feature_cache(bundle.primary, probe, ctx.cfg.batch_size);

    std::vector<TrainingSummary> summaries;
    for (const std::string& source : sources) {
        TrainStreams streams = attribution_streams(ds, source, stats);
        ModelGraph* sec = bundle.find_secondary(source);
        ModelGraph built;
        if (fresh) {
            built = build_secondary(bundle.primary, source);
            sec = &built;
        } else if (!sec) {
            throw StateError("bundle to refit has no secondary for source " + source);
        }
        TrainConfig tc = phase_train_config(ctx, TrainTask::Attribution, seed, fresh);
        TrainResult r = train_secondary(bundle.primary, *sec, streams, tc, false, &cache);
        write_telemetry(ctx.root, phase, seed, telemetry_stem + "-sec-" + source, r);
        summaries.push_back(summarize("secondary:" + source, r, streams.negative_ratio()));
        if (fresh) bundle.add_secondary(std::move(built));
    }
    return summaries;
}

void train_baseline(Ctx& ctx, PhaseOutcome& out, std::uint64_t seed, const std::string& name,
                    Representation rep, bool fresh) {
    LoadedDataset& ds = ctx.dataset(fresh ? "clean" : "multi");
    const std::vector<std::string> sources = ds.fake_sources();
    TrainStreams streams = multiclass_streams(ds, sources, ctx.stats(rep));

    ModelGraph model;
    std::vector<std::string> parents;
    if (fresh) {
        model = build_baseline(name, DecisionKind::Softmax,
                               static_cast<int>(sources.size()) + 1, rep,
                               ctx.cfg.image_size);
    } else {
        const std::string parent = baseline_artifact(seed, name);
        ModelBundle prev = load_bundle((ctx.root / parent).string());
        model = std::move(prev.primary);
        parents = {parent};
    }
    TrainResult r =
        train(model, streams, phase_train_config(ctx, TrainTask::Attribution, seed, fresh));
    const int phase = fresh ? 3 : 4;
    write_telemetry(ctx.root, phase, seed, fresh ? "baseline-" + name : "baseline-" + name + "-multi",
                    r);

    ModelBundle bundle;
    bundle.primary = std::move(model);
    if (rep == Representation::Dct) bundle.stats = *ctx.stats(rep);

    LineageEntry e;
    e.artifact = fresh ? baseline_artifact(seed, name) : phase4_baseline_artifact(seed, name);
    e.phase = phase;
    e.kind = "baseline";
    e.representation = rep_name(rep);
    e.seed = seed;
    e.variant = fresh ? "" : "multi";
    e.data_path = fresh ? "data/clean" : "data/multi";
    e.data_digest = ctx.data_digest(fresh ? "clean" : "multi");
    e.parents = parents;
    e.training = {summarize("baseline:" + name, r, streams.negative_ratio())};
    out.artifacts.push_back(emit_bundle(ctx, bundle, std::move(e)));
}

PhaseOutcome phase3(Ctx& ctx) {
    PhaseOutcome out;
    out.phase = 3;
    for (std::uint64_t seed : ctx.cfg.model_seeds) {
        for (Representation rep : ctx.cfg.representations) {
            const std::string parent = refit_artifact(seed, rep, "multi");
            ModelBundle bundle = load_bundle((ctx.root / parent).string());
            bundle.secondaries.clear();
            LoadedDataset& clean = ctx.dataset("clean");
            std::vector<TrainingSummary> summaries = grow_secondaries(
                ctx, bundle, clean, seed, true, 3, "attribution-" + rep_name(rep));
            if (rep == Representation::Dct) bundle.stats = *ctx.stats(rep);

            LineageEntry e;
            e.artifact = attribution_artifact(seed, rep);
            e.phase = 3;
            e.kind = "attribution";
            e.representation = rep_name(rep);
            e.seed = seed;
            e.data_path = "data/clean";
            e.data_digest = ctx.data_digest("clean");
            e.parents = {parent};
            e.training = std::move(summaries);
            out.artifacts.push_back(emit_bundle(ctx, bundle, std::move(e)));
        }
        if (ctx.cfg.with_baselines)
            for (const auto& [name, rep] : kBaselines) train_baseline(ctx, out, seed, name, rep, true);
    }
    return out;
}

PhaseOutcome phase4(Ctx& ctx) {
    PhaseOutcome out;
    out.phase = 4;
    for (std::uint64_t seed : ctx.cfg.model_seeds) {
        for (Representation rep : ctx.cfg.representations) {
            // Refit the clean-data heads on the multi-augmented stream.
            {
                const std::string parent = attribution_artifact(seed, rep);
                ModelBundle bundle = load_bundle((ctx.root / parent).string());
                LoadedDataset& multi = ctx.dataset("multi");
                std::vector<TrainingSummary> summaries =
                    grow_secondaries(ctx, bundle, multi, seed, false, 4,
                                     "attribution-" + rep_name(rep) + "-multi");
                if (rep == Representation::Dct) bundle.stats = *ctx.stats(rep);

                LineageEntry e;
                e.artifact = phase4_artifact(seed, rep, "multi");
                e.phase = 4;
                e.kind = "attribution";
                e.representation = rep_name(rep);
                e.seed = seed;
                e.variant = "multi";
                e.data_path = "data/multi";
                e.data_digest = ctx.data_digest("multi");
                e.parents = {parent};
                e.training = std::move(summaries);
                out.artifacts.push_back(emit_bundle(ctx, bundle, std::move(e)));
            }
            // Fresh heads per variant, attached to the variant-matched
            // phase-2 trunk.
            for (AugmentKind kind : ctx.cfg.variants) {
                const std::string variant = augment_kind_name(kind);
                const std::string parent = refit_artifact(seed, rep, variant);
                ModelBundle bundle = load_bundle((ctx.root / parent).string());
                bundle.secondaries.clear();
                LoadedDataset& ds = ctx.dataset(variant);
                std::vector<TrainingSummary> summaries =
                    grow_secondaries(ctx, bundle, ds, seed, true, 4,
                                     "attribution-" + rep_name(rep) + "-" + variant);
                if (rep == Representation::Dct) bundle.stats = *ctx.stats(rep);

                LineageEntry e;
                e.artifact = phase4_artifact(seed, rep, variant);
                e.phase = 4;
                e.kind = "attribution";
                e.representation = rep_name(rep);
                e.seed = seed;
                e.variant = variant;
                e.data_path = variant_dataset_dir(variant);
                e.data_digest = ctx.data_digest(variant);
                e.parents = {parent};
                e.training = std::move(summaries);
                out.artifacts.push_back(emit_bundle(ctx, bundle, std::move(e)));
            }
        }
        if (ctx.cfg.with_baselines)
            for (const auto& [name, rep] : kBaselines)
                train_baseline(ctx, out, seed, name, rep, false);
    }
    return out;
}

}  // namespace

void init_workspace(const std::string& workspace, const PhaseConfig& cfg) {
    check_config(cfg);
    fs::path root(workspace);
    fs::path clean_manifest = root / "data" / "clean" / "manifest.tsv";
    if (!fs::exists(clean_manifest))
        throw DependencyError("workspace initialization needs the clean dataset at " +
                              clean_manifest.string());

    fs::path config_file = root / kConfigFile;
    const std::string text = config_text(cfg);
    if (fs::exists(config_file)) {
        if (read_text_file(config_file) != text)
            throw StateError("workspace " + workspace +
                             " is already initialized with a different configuration");
    } else {
        write_text_file(config_file, text);
    }

    DatasetManifest clean = load_manifest(clean_manifest.string());
    fs::path multi_dir = root / "data" / "multi";
    if (!fs::exists(multi_dir / "manifest.tsv")) {
        const std::vector<AugmentKind> all = {AugmentKind::Blur, AugmentKind::Crop,
                                              AugmentKind::Jpeg, AugmentKind::Noise};
        materialize_augmented(clean, multi_dir.string(), all,
                              derive_seed(cfg.augment_seed, "materialize:multi"));
    }
    for (AugmentKind kind : cfg.variants) {
        const std::string name = augment_kind_name(kind);
        fs::path dir = root / "data" / name;
        if (fs::exists(dir / "manifest.tsv")) continue;
        individually_augment(clean, dir.string(), kind,
                             derive_seed(cfg.augment_seed, "materialize:" + name));
    }
}

PhaseConfig load_workspace_config(const std::string& workspace) {
    fs::path file = fs::path(workspace) / kConfigFile;
    if (!fs::exists(file))
        throw DependencyError("workspace " + workspace + " is not initialized (missing config.json)");
    return parse_config(read_text_file(file), file.string());
}

std::string workspace_config_digest(const std::string& workspace) {
    fs::path file = fs::path(workspace) / kConfigFile;
    if (!fs::exists(file))
        throw DependencyError("workspace " + workspace + " is not initialized (missing config.json)");
    return sha256_hex(read_text_file(file));
}

std::vector<LineageEntry> load_lineage(const std::string& workspace) {
    ordered_json doc = lineage_document(fs::path(workspace));
    std::vector<LineageEntry> entries;
    try {
        for (const auto& row : doc.at("entries")) entries.push_back(entry_from_json(row));
    } catch (const ordered_json::exception& e) {
        throw DataError("malformed lineage manifest in " + workspace + ": " + e.what());
    }
    return entries;
}

PhaseOutcome run_phase(const std::string& workspace, int phase, bool force) {
    if (phase < 1 || phase > 4) throw ValueError("phase index must be 1 through 4");
    Ctx ctx(workspace);

    const std::vector<std::string> expected = expected_artifacts(ctx.cfg, phase);
    if (!force) {
        bool complete = true;
        for (const std::string& rel : expected)
            if (!fs::exists(ctx.root / rel)) {
                complete = false;
                break;
            }
        if (complete) {
            PhaseOutcome out;
            out.phase = phase;
            out.skipped = true;
            out.artifacts = expected;
            return out;
        }
    }

    require_dataset(ctx, phase, "clean");
    if (phase == 2 || phase == 4) {
        require_dataset(ctx, phase, "multi");
        for (AugmentKind kind : ctx.cfg.variants)
            require_dataset(ctx, phase, augment_kind_name(kind));
    }
    if (phase == 2) require_artifacts(ctx, phase, 1, expected_artifacts(ctx.cfg, 1));
    if (phase == 3) {
        std::vector<std::string> need;
        for (std::uint64_t seed : ctx.cfg.model_seeds)
            for (Representation rep : ctx.cfg.representations)
                need.push_back(refit_artifact(seed, rep, "multi"));
        require_artifacts(ctx, phase, 2, need);
    }
    if (phase == 4) {
        require_artifacts(ctx, phase, 3, expected_artifacts(ctx.cfg, 3));
        std::vector<std::string> need;
        for (std::uint64_t seed : ctx.cfg.model_seeds)
            for (Representation rep : ctx.cfg.representations)
                for (AugmentKind kind : ctx.cfg.variants)
                    need.push_back(refit_artifact(seed, rep, augment_kind_name(kind)));
        require_artifacts(ctx, phase, 2, need);
    }

    switch (phase) {
        case 1: return phase1(ctx);
        case 2: return phase2(ctx);
        case 3: return phase3(ctx);
        default: return phase4(ctx);
    }
}

}  // namespace ganattr
