#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ganattr/dataset.hpp"
#include "ganattr/dct.hpp"
#include "ganattr/errors.hpp"
#include "ganattr/evaluator.hpp"
#include "ganattr/fixtures.hpp"
#include "ganattr/image.hpp"
#include "ganattr/localization.hpp"
#include "ganattr/manifest.hpp"
#include "ganattr/model_zoo.hpp"
#include "ganattr/parallel.hpp"
#include "ganattr/phases.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using namespace ganattr;

// ---------------------------------------------------------------- shared bits

Representation rep_from_flag(const std::string& name) {
    if (name == "pixel") return Representation::Pixel;
    if (name == "dct") return Representation::Dct;
    throw ValueError("unknown representation \"" + name + "\" (expected pixel or dct)");
}

// Accepts arabic 1-4 and roman i-iv, case-insensitive. The list must be
// strictly ascending; running later phases before earlier ones in one
// invocation is always a mistake.
std::vector<int> parse_phases(const std::vector<std::string>& tokens) {
    static const std::map<std::string, int> names = {
        {"1", 1}, {"2", 2}, {"3", 3}, {"4", 4}, {"i", 1}, {"ii", 2}, {"iii", 3}, {"iv", 4}};
    if (tokens.empty()) throw ValueError("no phases requested");
    std::vector<int> phases;
    for (std::string t : tokens) {
        std::transform(t.begin(), t.end(), t.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        auto it = names.find(t);
        if (it == names.end())
            throw ValueError("unknown phase \"" + t + "\" (expected 1-4 or I-IV)");
        phases.push_back(it->second);
    }
    for (std::size_t i = 1; i < phases.size(); ++i)
        if (phases[i] <= phases[i - 1])
            throw ValueError("phases must be listed in ascending order (phase " +
                             std::to_string(phases[i]) + " after phase " +
                             std::to_string(phases[i - 1]) + ")");
    return phases;
}

ModelBundle open_bundle(const std::string& path) {
    ModelBundle bundle = load_bundle(path);
    if (bundle.primary.input.representation == Representation::Dct && bundle.stats.empty())
        throw DataError("bundle \"" + path + "\" takes spectrum input but carries no whitening statistics");
    return bundle;
}

// Single-image model input, matching the batch builders bit for bit.
Tensor single_input(const ImageU8& standardized, const ModelBundle& bundle) {
    if (bundle.primary.input.representation == Representation::Pixel)
        return pixel_tensor(standardized);
    Tensor white = normalize_spectrum(log_scale(dct2(gray_tensor(standardized))), bundle.stats);
    Tensor t({1, white.dim(0), white.dim(1)});
    t.data = white.data;
    return t;
}

std::string flags_text(const PredictionRecord& r) {
    std::vector<std::string> flags;
    if (r.failed_attribution) flags.push_back("failed-attribution");
    if (r.multiple_attribution) flags.push_back("multiple-attribution");
    if (r.contradiction) flags.push_back("contradiction");
    if (flags.empty()) return "-";
    std::string out;
    for (const auto& f : flags) out += (out.empty() ? "" : ",") + f;
    return out;
}

void print_verdict(std::ostream& os, const PredictionRecord& r) {
    os << r.image_id << "  primary=" << percent1(r.primary_score)
       << (r.primary_positive ? "+" : "-");
    for (const auto& [name, score] : r.secondary_scores)
        os << "  " << name << "=" << percent1(score) << (score > 0.5 ? "+" : "-");
    if (!r.secondary_scores.empty()) os << "  attribution=" << multiclass_decision(r);
    os << "  flags=" << flags_text(r) << "\n";
}

// ---------------------------------------------------------------------- synth

struct SynthArgs {
    std::string out;
    FixtureConfig cfg;
};

int cmd_synth(const SynthArgs& a) {
    DatasetManifest m = gen_dataset(a.cfg, a.out);
    std::cout << "manifest: " << (fs::path(a.out) / "manifest.tsv").string() << "\n"
              << "rows: " << m.rows.size() << "  train: " << m.count("train")
              << "  val: " << m.count("val") << "  test: " << m.count("test")
              << "  external: " << m.count("external") << "\n"
              << "digest: " << manifest_digest(m) << "\n";
    return 0;
}

// ------------------------------------------------------------------------ run

struct RunArgs {
    std::string workspace;
    std::vector<std::string> phase_tokens = {"1", "2", "3", "4"};
    bool force = false;
    PhaseConfig cfg;
    std::vector<std::string> rep_names = {"pixel"};
    std::vector<std::string> variant_names = {"blur", "crop", "jpeg", "noise"};
    bool config_touched = false;  // any initialization flag given explicitly
};

int cmd_run(RunArgs& a) {
    if (a.workspace.empty())
        throw ValueError("run needs a workspace (--workspace or GANATTR_WORKSPACE)");
    std::vector<int> phases = parse_phases(a.phase_tokens);

    a.cfg.representations.clear();
    for (const auto& n : a.rep_names) a.cfg.representations.push_back(rep_from_flag(n));
    a.cfg.variants.clear();
    for (const auto& n : a.variant_names) a.cfg.variants.push_back(augment_kind_from_name(n));

    if (!fs::exists(fs::path(a.workspace) / "config.json")) {
        init_workspace(a.workspace, a.cfg);
        std::cout << "initialized workspace " << a.workspace << " (config digest "
                  << workspace_config_digest(a.workspace).substr(0, 12) << ")\n";
    } else if (a.config_touched) {
        // The frozen config wins; silently diverging from it would corrupt
        // provenance for every artifact trained afterwards.
        std::cout << "note: workspace is already initialized, configuration flags ignored\n";
    }

    for (int phase : phases) {
        PhaseOutcome out = run_phase(a.workspace, phase, a.force);
        if (out.skipped) {
            std::cout << "phase " << phase << ": complete, skipped (use --force to retrain)\n";
        } else {
            std::cout << "phase " << phase << ": trained " << out.artifacts.size()
                      << " artifact" << (out.artifacts.size() == 1 ? "" : "s") << "\n";
            for (const auto& art : out.artifacts) std::cout << "  " << art << "\n";
        }
    }
    return 0;
}

// ----------------------------------------------------------------------- eval

struct EvalArgs {
    std::string bundle_path;
    std::string manifest_path;
    std::string records_in;
    std::vector<std::string> splits = {"test"};
    std::string out_path;
    std::string records_out;
    int batch = 32;
};

struct SplitRecords {
    std::string split;
    std::vector<PredictionRecord> records;
};

std::vector<PredictionRecord> live_records(ModelBundle& bundle, const LoadedDataset& ds,
                                           const std::vector<int>& indices, int batch) {
    std::vector<PredictionRecord> records;
    records.reserve(indices.size());
    const Representation rep = bundle.primary.input.representation;
    for (std::size_t at = 0; at < indices.size(); at += static_cast<std::size_t>(batch)) {
        std::vector<int> chunk(indices.begin() + static_cast<std::ptrdiff_t>(at),
                               indices.begin() +
                                   static_cast<std::ptrdiff_t>(
                                       std::min(at + static_cast<std::size_t>(batch), indices.size())));
        Tensor x = input_batch(ds, chunk, rep, bundle.stats);
        std::vector<PredictionRecord> part = probe_batch(bundle, x);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const DatasetItem& item = ds.items[static_cast<std::size_t>(chunk[i])];
            part[i].image_id = item.path;
            part[i].true_label = item.fake ? item.source : "real";
            records.push_back(std::move(part[i]));
        }
    }
    return records;
}

void dump_records(const std::string& path, const std::vector<SplitRecords>& groups) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write prediction records to " + path);
    for (const auto& group : groups) {
        for (const auto& r : group.records) {
            ordered_json row;
            row["image"] = r.image_id;
            row["label"] = r.true_label;
            row["split"] = group.split;
            row["primary"] = r.primary_score;
            row["secondary"] = ordered_json::object();
            for (const auto& [name, score] : r.secondary_scores) row["secondary"][name] = score;
            out << row.dump() << "\n";
        }
    }
    if (!out) throw IoError("cannot write prediction records to " + path);
}

// Replaying persisted scores regenerates every flag through the same
// derivation the live path uses, so reports must agree bit for bit.
std::vector<SplitRecords> load_records(const std::string& path,
                                       const std::vector<std::string>& splits) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read prediction records from " + path);
    std::map<std::string, std::vector<PredictionRecord>> by_split;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json row = ordered_json::parse(line, nullptr, false);
        if (row.is_discarded() || !row.contains("image") || !row.contains("label") ||
            !row.contains("split") || !row.contains("primary"))
            throw DataError("malformed prediction record at " + path + ":" +
                            std::to_string(line_no));
        PredictionRecord r;
        r.image_id = row["image"].get<std::string>();
        r.true_label = row["label"].get<std::string>();
        r.primary_score = row["primary"].get<real>();
        if (row.contains("secondary"))
            for (const auto& [name, score] : row["secondary"].items())
                r.secondary_scores[name] = score.get<real>();
        derive_flags(r);
        by_split[row["split"].get<std::string>()].push_back(std::move(r));
    }
    std::vector<SplitRecords> groups;
    for (const auto& split : splits) {
        auto it = by_split.find(split);
        if (it == by_split.end())
            throw DataError("records file has no rows for split \"" + split + "\"");
        groups.push_back({split, it->second});
    }
    return groups;
}

MetricsReport report_for(const SplitRecords& group) {
    MetricsReport report;
    report.binary["detection"] = binary_metrics(group.records);
    bool with_secondaries = !group.records.empty() && !group.records.front().secondary_scores.empty();
    if (with_secondaries) {
        for (const auto& [name, score] : group.records.front().secondary_scores) {
            (void)score;
            report.binary[name] = binary_metrics(group.records, name);
        }
        report.multiclass_acc = multiclass_accuracy(group.records);
        report.cr = contradiction_rate(group.records);
    }
    if (group.split == "external") {
        // Specificity of each attribution head against each foreign source,
        // averaged; with no heads this reduces to detector sensitivity.
        std::map<std::string, std::vector<PredictionRecord>> by_source;
        for (const auto& r : group.records)
            if (r.true_label != "real") by_source[r.true_label].push_back(r);
        real sum = 0.0;
        int n = 0;
        for (const auto& [source, recs] : by_source) {
            if (!with_secondaries) {
                sum += external_accuracy(recs, Task::Detection);
                ++n;
                continue;
            }
            for (const auto& [name, score] : recs.front().secondary_scores) {
                (void)score;
                if (name == source) continue;
                sum += external_accuracy(recs, Task::Attribution, name);
                ++n;
            }
        }
        if (n > 0) report.exa = sum / static_cast<real>(n);
    }
    return report;
}

ordered_json binary_json(const BinaryMetrics& m) {
    ordered_json j;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    j["tn"] = m.tn;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    return j;
}

// Multiclass baselines decide by row argmax; their report is plain per-class
// counting over classes (real, then the manifest's fake sources in order).
MetricsReport softmax_report(ModelGraph& model, const LoadedDataset& ds,
                             const std::vector<int>& indices, const SpectrumStats& stats,
                             int batch, const std::vector<std::string>& classes) {
    std::vector<int> truth = multiclass_labels(ds, indices, {classes.begin() + 1, classes.end()});
    std::vector<int> predicted;
    predicted.reserve(indices.size());
    for (std::size_t at = 0; at < indices.size(); at += static_cast<std::size_t>(batch)) {
        std::vector<int> chunk(indices.begin() + static_cast<std::ptrdiff_t>(at),
                               indices.begin() +
                                   static_cast<std::ptrdiff_t>(
                                       std::min(at + static_cast<std::size_t>(batch), indices.size())));
        Tensor x = input_batch(ds, chunk, model.input.representation, stats);
        for (int p : multiclass_predictions(model, x)) predicted.push_back(p);
    }

    MetricsReport report;
    long correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
    report.multiclass_acc = static_cast<real>(correct) / static_cast<real>(truth.size());
    for (int cls = 0; cls < static_cast<int>(classes.size()); ++cls) {
        BinaryMetrics m;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            bool hit = predicted[i] == cls;
            bool rel = truth[i] == cls;
            m.tp += hit && rel;
            m.fp += hit && !rel;
            m.fn += !hit && rel;
            m.tn += !hit && !rel;
        }
        m.no_predicted_positives = m.tp + m.fp == 0;
        m.no_relevant = m.tp + m.fn == 0;
        m.precision = m.no_predicted_positives ? 0.0 : static_cast<real>(m.tp) / (m.tp + m.fp);
        m.recall = m.no_relevant ? 0.0 : static_cast<real>(m.tp) / (m.tp + m.fn);
        m.f1 = m.precision + m.recall == 0.0 ? 0.0
                                             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        report.binary[classes[static_cast<std::size_t>(cls)]] = m;
    }
    return report;
}

int cmd_eval(const EvalArgs& a) {
    if (a.records_in.empty() == a.bundle_path.empty())
        throw ValueError("eval needs exactly one input: --bundle or --from-records");

    ordered_json doc;
    doc["splits"] = ordered_json::object();
    std::vector<SplitRecords> groups;

    if (!a.records_in.empty()) {
        doc["source"] = a.records_in;
        groups = load_records(a.records_in, a.splits);
    } else {
        if (a.manifest_path.empty()) throw ValueError("eval needs --manifest with --bundle");
        doc["source"] = a.bundle_path;
        doc["manifest"] = a.manifest_path;
        ModelBundle bundle = open_bundle(a.bundle_path);
        DatasetManifest manifest = load_manifest(a.manifest_path);
        LoadedDataset ds = load_dataset_images(manifest, bundle.primary.input.resolution);

        if (bundle.primary.decision == DecisionKind::Softmax) {
            if (!a.records_out.empty())
                throw ValueError("prediction records need a detector bundle, not a multiclass baseline");
            std::vector<std::string> classes = {"real"};
            for (const auto& s : ds.fake_sources()) classes.push_back(s);
            if (static_cast<int>(classes.size()) != bundle.primary.classes)
                throw DataError("class count mismatch: model has " +
                                std::to_string(bundle.primary.classes) + " outputs, manifest has " +
                                std::to_string(classes.size() - 1) + " fake sources");
            for (const auto& split : a.splits) {
                std::vector<int> indices = ds.split_indices(split);
                if (indices.empty()) throw DataError("split \"" + split + "\" has no rows");
                MetricsReport report =
                    softmax_report(bundle.primary, ds, indices, bundle.stats, a.batch, classes);
                std::cout << "== split " << split << " ==\n" << render_metrics(report);
                ordered_json js;
                js["multiclass_accuracy"] = *report.multiclass_acc;
                js["classes"] = ordered_json::object();
                for (const auto& [name, m] : report.binary) js["classes"][name] = binary_json(m);
                doc["splits"][split] = js;
            }
            if (!a.out_path.empty()) {
                std::ofstream out(a.out_path, std::ios::binary);
                if (!out) throw IoError("cannot write report to " + a.out_path);
                out << doc.dump(2) << "\n";
            }
            return 0;
        }

        for (const auto& split : a.splits) {
            std::vector<int> indices = ds.split_indices(split);
            if (indices.empty()) throw DataError("split \"" + split + "\" has no rows");
            groups.push_back({split, live_records(bundle, ds, indices, a.batch)});
        }
    }

    for (const auto& group : groups) {
        MetricsReport report = report_for(group);
        std::cout << "== split " << group.split << " ==\n" << render_metrics(report);
        ordered_json js;
        js["records"] = group.records.size();
        js["detection"] = binary_json(report.binary.at("detection"));
        ordered_json sources = ordered_json::object();
        for (const auto& [name, m] : report.binary)
            if (name != "detection") sources[name] = binary_json(m);
        if (!sources.empty()) js["sources"] = sources;
        if (report.multiclass_acc) js["multiclass_accuracy"] = *report.multiclass_acc;
        if (report.cr) js["contradiction_rate"] = *report.cr;
        if (report.exa) js["exa"] = *report.exa;
        doc["splits"][group.split] = js;
    }

    if (!a.records_out.empty()) dump_records(a.records_out, groups);
    if (!a.out_path.empty()) {
        std::ofstream out(a.out_path, std::ios::binary);
        if (!out) throw IoError("cannot write report to " + a.out_path);
        out << doc.dump(2) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------- probe

struct ProbeArgs {
    std::string bundle_path;
    std::vector<std::string> images;
    bool cam = false;
    std::string out_dir = "probe-out";
    double alpha = 0.5;
};

int cmd_probe(const ProbeArgs& a) {
    ModelBundle bundle = open_bundle(a.bundle_path);
    if (bundle.primary.decision != DecisionKind::Sigmoid)
        throw ValueError("probe needs a detector bundle, not a multiclass baseline");
    if (a.cam) fs::create_directories(a.out_dir);

    HeatmapStyle style;
    style.alpha = a.alpha;
    std::vector<SaliencyRecord> saliency_records;
    int failures = 0;
    int index = 0;
    for (const auto& path : a.images) {
        ++index;
        try {
            ImageU8 img = standardize(load_image(path), bundle.primary.input.resolution);
            Tensor x = single_input(img, bundle);
            PredictionRecord rec = probe(bundle, x);
            rec.image_id = path;
            print_verdict(std::cout, rec);

            if (!a.cam) continue;
            char prefix[16];
            std::snprintf(prefix, sizeof prefix, "%03d", index);
            std::string stem = std::string(prefix) + "-" + fs::path(path).stem().string();
            for (const SaliencyMap& map : bundle_saliency(bundle, x)) {
                ImageU8 overlay = render_heatmap(map, img, style);
                save_png(overlay, (fs::path(a.out_dir) / (stem + "-" + map.output_name + ".png"))
                                      .string());
                saliency_records.push_back(
                    {stem, map.output_name, map.confidence > 0.5, map.confidence});
            }
        } catch (const ComputeError&) {
            throw;  // a numerically broken bundle poisons every probe
        } catch (const Error& e) {
            std::cerr << "FAILED " << path << ": " << e.what() << "\n";
            ++failures;
        }
    }
    if (a.cam && !saliency_records.empty())
        write_saliency_records((fs::path(a.out_dir) / "records.jsonl").string(), saliency_records);
    if (failures > 0) {
        std::cerr << failures << " of " << a.images.size() << " images failed\n";
        return 2;
    }
    return 0;
}

// -------------------------------------------------------------------- cam-grid

struct GridArgs {
    std::string bundle_path;
    std::string manifest_path;
    std::string split = "test";
    int per_source = 16;
    std::string out_dir = "cam-grid";
    double alpha = 0.5;
};

void blit(ImageU8& dst, const ImageU8& src, int y0, int x0) {
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < 3; ++c)
                dst.px(y0 + y, x0 + x, c) = src.px(y, x, src.channels == 1 ? 0 : c);
}

int cmd_cam_grid(const GridArgs& a) {
    if (a.per_source < 1) throw ValueError("--per-source must be at least 1");
    ModelBundle bundle = open_bundle(a.bundle_path);
    if (bundle.primary.decision != DecisionKind::Sigmoid)
        throw ValueError("cam-grid needs a detector bundle, not a multiclass baseline");
    DatasetManifest manifest = load_manifest(a.manifest_path);
    const int size = bundle.primary.input.resolution;
    LoadedDataset ds = load_dataset_images(manifest, size);
    fs::create_directories(a.out_dir);

    HeatmapStyle style;
    style.alpha = a.alpha;
    std::vector<SaliencyRecord> saliency_records;
    std::vector<std::string> sources = manifest.sources_in(a.split);
    if (sources.empty()) throw DataError("split \"" + a.split + "\" has no rows");

    for (const auto& source : sources) {
        std::vector<int> picks;
        for (int idx : ds.split_indices(a.split)) {
            if (ds.items[static_cast<std::size_t>(idx)].source != source) continue;
            picks.push_back(idx);
            if (static_cast<int>(picks.size()) == a.per_source) break;
        }

        // One panel row per image: the input, then every saliency overlay.
        const int cols = 1 + 1 + static_cast<int>(bundle.secondaries.size());
        ImageU8 grid = make_image(cols * size, static_cast<int>(picks.size()) * size, 3, 255);
        for (std::size_t row = 0; row < picks.size(); ++row) {
            const int idx = picks[row];
            const ImageU8& img = ds.images[static_cast<std::size_t>(idx)];
            Tensor x = input_batch(ds, {idx}, bundle.primary.input.representation, bundle.stats);

            PredictionRecord rec = probe(bundle, x);
            rec.image_id = ds.items[static_cast<std::size_t>(idx)].path;
            print_verdict(std::cout, rec);

            blit(grid, img, static_cast<int>(row) * size, 0);
            int col = 1;
            for (const SaliencyMap& map : bundle_saliency(bundle, x)) {
                blit(grid, render_heatmap(map, img, style), static_cast<int>(row) * size,
                     col * size);
                ++col;
                saliency_records.push_back({rec.image_id, map.output_name,
                                            map.confidence > 0.5, map.confidence});
            }
        }
        std::string out = (fs::path(a.out_dir) / ("grid-" + source + ".png")).string();
        save_png(grid, out);
        std::cout << "wrote " << out << " (" << picks.size() << " images)\n";
    }
    write_saliency_records((fs::path(a.out_dir) / "records.jsonl").string(), saliency_records);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAN-image detection and source attribution toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (0 = hardware concurrency)")
        ->capture_default_str();

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic fixture dataset");
    synth_cmd->add_option("--out", synth.out, "output directory")->required();
    synth_cmd->add_option("--size", synth.cfg.size, "image side length")->capture_default_str();
    synth_cmd->add_option("--sources", synth.cfg.sources, "number of fake generators")
        ->capture_default_str();
    synth_cmd->add_option("--per-source", synth.cfg.per_source, "fake images per generator")
        ->capture_default_str();
    synth_cmd->add_option("--amplitude", synth.cfg.amplitude, "fingerprint amplitude")
        ->capture_default_str();
    synth_cmd->add_option("--real-parts", synth.cfg.real_parts, "real share of the balance ratio")
        ->capture_default_str();
    synth_cmd->add_option("--fake-parts", synth.cfg.fake_parts, "fake share of the balance ratio")
        ->capture_default_str();
    synth_cmd->add_flag("--external,!--no-external", synth.cfg.with_external,
                        "add a held-out external source");
    synth_cmd->add_option("--external-count", synth.cfg.external_count,
                          "external images (0 = per-source)")
        ->capture_default_str();
    synth_cmd->add_flag("--sibling", synth.cfg.sibling_pair, "correlate the gm2 fingerprint with gm1");
    synth_cmd->add_option("--sibling-corr", synth.cfg.sibling_corr, "sibling pattern correlation")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.cfg.seed, "generation seed")->capture_default_str();

    RunArgs run;
    CLI::App* run_cmd = app.add_subcommand("run", "execute training phases in a workspace");
    run_cmd->add_option("--workspace", run.workspace, "workspace directory")
        ->envname("GANATTR_WORKSPACE");
    run_cmd->add_option("--phases", run.phase_tokens, "phases to execute, e.g. 1,2,3,4 or II,III")
        ->delimiter(',')
        ->capture_default_str();
    run_cmd->add_flag("--force", run.force, "retrain even when artifacts exist");
    std::vector<CLI::Option*> cfg_opts = {
        run_cmd->add_option("--image-size", run.cfg.image_size, "training resolution")
            ->capture_default_str(),
        run_cmd->add_option("--seeds", run.cfg.model_seeds, "model seeds, one run each")
            ->delimiter(',')
            ->capture_default_str(),
        run_cmd->add_option("--representations", run.rep_names, "input forms: pixel, dct")
            ->delimiter(',')
            ->capture_default_str(),
        run_cmd->add_option("--variants", run.variant_names,
                            "individually augmented variants: blur, crop, jpeg, noise")
            ->delimiter(',')
            ->capture_default_str(),
        run_cmd->add_flag("--baselines,!--no-baselines", run.cfg.with_baselines,
                          "train comparison baselines"),
        run_cmd->add_option("--batch-size", run.cfg.batch_size, "minibatch size")
            ->capture_default_str(),
        run_cmd->add_option("--max-epochs", run.cfg.max_epochs, "epoch cap per training")
            ->capture_default_str(),
        run_cmd->add_option("--patience", run.cfg.patience, "early-stop patience")
            ->capture_default_str(),
        run_cmd->add_option("--augment-seed", run.cfg.augment_seed, "dataset materialization seed")
            ->capture_default_str(),
    };

    EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score a bundle against a dataset manifest");
    eval_cmd->add_option("--bundle", eval.bundle_path, "trained .gab bundle");
    eval_cmd->add_option("--manifest", eval.manifest_path, "dataset manifest");
    eval_cmd->add_option("--from-records", eval.records_in,
                         "recompute the report from persisted prediction records");
    eval_cmd->add_option("--split", eval.splits, "splits to score")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--out", eval.out_path, "write the report as JSON");
    eval_cmd->add_option("--records", eval.records_out, "persist per-image prediction records");
    eval_cmd->add_option("--batch-size", eval.batch, "scoring batch size")->capture_default_str();

    ProbeArgs probe;
    CLI::App* probe_cmd = app.add_subcommand("probe", "score individual images");
    probe_cmd->add_option("--bundle", probe.bundle_path, "trained .gab bundle")->required();
    probe_cmd->add_option("images", probe.images, "image files to probe")->required();
    probe_cmd->add_flag("--cam", probe.cam, "emit saliency heatmaps per output");
    probe_cmd->add_option("--out-dir", probe.out_dir, "heatmap output directory")
        ->capture_default_str();
    probe_cmd->add_option("--alpha", probe.alpha, "heatmap blend weight")->capture_default_str();

    GridArgs grid;
    CLI::App* grid_cmd =
        app.add_subcommand("cam-grid", "render saliency grids per image source");
    grid_cmd->add_option("--bundle", grid.bundle_path, "trained .gab bundle")->required();
    grid_cmd->add_option("--manifest", grid.manifest_path, "dataset manifest")->required();
    grid_cmd->add_option("--split", grid.split, "split to sample from")->capture_default_str();
    grid_cmd->add_option("--per-source", grid.per_source, "images per source")
        ->capture_default_str();
    grid_cmd->add_option("--out-dir", grid.out_dir, "grid output directory")->capture_default_str();
    grid_cmd->add_option("--alpha", grid.alpha, "heatmap blend weight")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // --help exits clean, everything else is usage
    }

    try {
        if (threads > 0) set_global_thread_budget(threads);
        for (CLI::Option* opt : cfg_opts) run.config_touched |= opt->count() > 0;
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (run_cmd->parsed()) return cmd_run(run);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (probe_cmd->parsed()) return cmd_probe(probe);
        if (grid_cmd->parsed()) return cmd_cam_grid(grid);
        return 1;
    } catch (const ComputeError& e) {
        std::cerr << "compute error: " << e.what() << "\n";
        return 3;
    } catch (const ValueError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const StateError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
