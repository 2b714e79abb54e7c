#pragma once

#include <map>
#include <string>
#include <vector>

namespace ganattr {

// One dataset row. Paths are stored relative to the manifest's directory.
struct ManifestRow {
    std::string path;
    std::string label;   // "real" or "fake"
    std::string source;  // "real" or a generator id
    std::string split;   // "train", "val", "test", or "external"
};

struct DatasetManifest {
    std::map<std::string, std::string> header;  // free-form run metadata
    std::vector<ManifestRow> rows;
    std::string base_dir;  // directory the row paths resolve against

    std::string resolve(const ManifestRow& row) const;
    std::vector<std::string> sources_in(const std::string& split) const;
    int count(const std::string& split, const std::string& source = "") const;
};

// Line-oriented text, tab-separated columns path/label/source/split, led by
// a "# ganattr-manifest v1" version line and "# key=value" metadata lines.
std::string manifest_to_text(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Schema invariants: known labels/splits, fake <=> non-real source, unique
// paths, and external sources absent from train/val. Throws DataError.
void validate_manifest(const DatasetManifest& m);
// Additionally requires every referenced file to exist.
void validate_manifest_files(const DatasetManifest& m);

std::string manifest_digest(const DatasetManifest& m);

}  // namespace ganattr
