#pragma once

#include <string>
#include <vector>

#include "ganattr/dct.hpp"
#include "ganattr/graph.hpp"

namespace ganattr {

// Detector trunk: 8 conv layers 3x3, channels (16,16,32,32,64,64,128,128),
// strides (1,2,1,2,1,2,1,2), LeakyReLU(0.2) everywhere, batchnorm on convs
// 2-8. Pixel variant closes with GAP + dense(128->1) and supports activation
// maps; spectrum variant closes with flatten + dense(->1).
ModelGraph build_primary(Representation representation, int input_size);

// Attribution head for one source: consumes the primary's branch features
// (after conv block 4) and replicates conv blocks 5-8 plus a fresh head.
// Weights are freshly initialized later, never copied from the primary.
ModelGraph build_secondary(ModelGraph& primary, const std::string& name);

// Reference topologies for comparison runs; names are pinned identifiers.
ModelGraph build_baseline(const std::string& name, DecisionKind decision, int classes,
                          Representation representation, int input_size);

struct ModelBundle {
    ModelGraph primary;
    std::vector<ModelGraph> secondaries;  // unique names
    SpectrumStats stats;                  // empty unless the spectrum path is in use

    ModelGraph* find_secondary(const std::string& name);
    const ModelGraph* find_secondary(const std::string& name) const;
    void add_secondary(ModelGraph graph);
};

// Container layout (extension .gab): magic "GANATTRB", u32 format version,
// u32-length JSON topology header, named tensors (u16 name length, name, u8
// rank, u32 dims, little-endian f32 payload), and a trailing SHA-256 over
// everything before it. Tensors are stored at 32-bit precision; the in-memory
// model is quantized accordingly on save.
void save_bundle(ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace ganattr
