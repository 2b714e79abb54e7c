#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganattr/augment.hpp"
#include "ganattr/graph.hpp"

namespace ganattr {

// Experiment-wide knobs, frozen into the workspace at initialization so every
// phase trains against the same digested configuration.
struct PhaseConfig {
    int image_size = 64;
    std::vector<std::uint64_t> model_seeds = {2021, 1000};
    std::vector<Representation> representations = {Representation::Pixel};
    // Individually augmented variants to materialize and train against; the
    // multi-augmented set is always produced.
    std::vector<AugmentKind> variants = {AugmentKind::Blur, AugmentKind::Crop,
                                         AugmentKind::Jpeg, AugmentKind::Noise};
    bool with_baselines = true;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 5;
    // Zero keeps the per-task defaults (1e-3 detection, 1e-4 attribution).
    real detection_lr = 0.0;
    real attribution_lr = 0.0;
    std::uint64_t augment_seed = 0;
};

// Materializes the augmented dataset variants next to <workspace>/data/clean
// and writes config.json. The clean set must already be in place (fixture
// generator output or equivalent manifest layout).
void init_workspace(const std::string& workspace, const PhaseConfig& cfg);
PhaseConfig load_workspace_config(const std::string& workspace);
// Digest of the canonical config.json text, stamped into every lineage entry.
std::string workspace_config_digest(const std::string& workspace);

// One trained model inside an artifact, condensed for the lineage record.
struct TrainingSummary {
    std::string model;  // "primary", "secondary:<source>", "baseline:<name>"
    int epochs = 0;
    int best_epoch = 0;
    real best_val_loss = 0.0;
    bool stopped_early = false;
    bool stagnant = false;  // all-negative collapse seen in some epoch
};

struct LineageEntry {
    std::string artifact;  // workspace-relative .gab path
    int phase = 0;
    std::string kind;  // "primary", "attribution", "baseline"
    std::string representation;
    std::uint64_t seed = 0;
    std::string variant;  // "", "multi", or an augmentation name
    std::string data_path;
    std::string data_digest;
    std::vector<std::string> parents;  // artifacts this one was grown from
    std::string artifact_digest;       // sha-256 of the bundle file
    std::string config_digest;
    std::vector<TrainingSummary> training;
};

std::vector<LineageEntry> load_lineage(const std::string& workspace);

struct PhaseOutcome {
    int phase = 0;
    bool skipped = false;                // artifacts were already complete
    std::vector<std::string> artifacts;  // workspace-relative, creation order
};

// The four-stage schedule. 1: detection on clean data from fresh init, one
// primary per representation and model seed. 2: each phase-1 primary refit on
// the multi-augmented set, plus one retrain per individually augmented
// variant. 3: attribution heads for every fake source, attached to the
// seed-matched multi-refit primary and trained on clean data; multiclass
// baselines from scratch. 4: the phase-3 heads refit on multi-augmented
// data, fresh heads per variant on the matching phase-2 primary, and
// baseline refits. Prerequisite artifacts are checked up front; reruns are
// no-ops while the outputs are complete unless force is set.
PhaseOutcome run_phase(const std::string& workspace, int phase, bool force = false);

}  // namespace ganattr
