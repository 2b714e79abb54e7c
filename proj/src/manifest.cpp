#include "ganattr/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ganattr/digest.hpp"
#include "ganattr/errors.hpp"

namespace fs = std::filesystem;

namespace ganattr {

namespace {

constexpr const char* kVersionLine = "# ganattr-manifest v1";

const std::set<std::string>& known_labels() {
    static const std::set<std::string> s{"real", "fake"};
    return s;
}

const std::set<std::string>& known_splits() {
    static const std::set<std::string> s{"train", "val", "test", "external"};
    return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

}  // namespace

std::string DatasetManifest::resolve(const ManifestRow& row) const {
    if (base_dir.empty()) return row.path;
    return (fs::path(base_dir) / row.path).string();
}

std::vector<std::string> DatasetManifest::sources_in(const std::string& split) const {
    std::set<std::string> seen;
    for (const auto& row : rows)
        if (row.split == split) seen.insert(row.source);
    return {seen.begin(), seen.end()};
}

int DatasetManifest::count(const std::string& split, const std::string& source) const {
    int n = 0;
    for (const auto& row : rows)
        if (row.split == split && (source.empty() || row.source == source)) ++n;
    return n;
}

std::string manifest_to_text(const DatasetManifest& m) {
    std::ostringstream out;
    out << kVersionLine << "\n";
    for (const auto& [key, value] : m.header) {
        if (key.find('=') != std::string::npos || key.find('\n') != std::string::npos ||
            value.find('\n') != std::string::npos)
            throw ValueError("manifest header entries must be single-line and '='-free keys");
        out << "# " << key << "=" << value << "\n";
    }
    for (const auto& row : m.rows) {
        for (const std::string* field : {&row.path, &row.label, &row.source, &row.split})
            if (field->find('\t') != std::string::npos || field->find('\n') != std::string::npos)
                throw ValueError("manifest fields must not contain tabs or newlines");
        out << row.path << '\t' << row.label << '\t' << row.source << '\t' << row.split << "\n";
    }
    return out.str();
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::string text = manifest_to_text(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open manifest for writing: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing manifest: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + path);

    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();

    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kVersionLine)
        throw DataError("unrecognized manifest version line: \"" + line + "\"");

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            // "# key=value" metadata; anything without '=' is a comment.
            std::string body = line.substr(1);
            if (!body.empty() && body[0] == ' ') body.erase(0, 1);
            std::size_t eq = body.find('=');
            if (eq != std::string::npos && eq > 0)
                m.header[body.substr(0, eq)] = body.substr(eq + 1);
            continue;
        }
        std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != 4)
            throw DataError("manifest line " + std::to_string(lineno) + " has " +
                            std::to_string(fields.size()) + " fields, expected 4");
        m.rows.push_back({fields[0], fields[1], fields[2], fields[3]});
    }
    return m;
}

void validate_manifest(const DatasetManifest& m) {
    if (m.rows.empty()) throw DataError("manifest has no rows");

    std::set<std::string> paths;
    std::set<std::string> external_sources;
    std::set<std::string> trainval_sources;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const ManifestRow& row = m.rows[i];
        std::string where = "manifest row " + std::to_string(i) + " (" + row.path + ")";
        if (row.path.empty()) throw DataError(where + ": empty path");
        if (!known_labels().count(row.label))
            throw DataError(where + ": unknown label \"" + row.label + "\"");
        if (!known_splits().count(row.split))
            throw DataError(where + ": unknown split \"" + row.split + "\"");
        bool is_fake = row.label == "fake";
        bool real_source = row.source == "real";
        if (is_fake == real_source)
            throw DataError(where + ": label \"" + row.label +
                            "\" conflicts with source \"" + row.source + "\"");
        if (!paths.insert(row.path).second)
            throw DataError(where + ": duplicate path");
        if (row.split == "external") external_sources.insert(row.source);
        if (row.split == "train" || row.split == "val") trainval_sources.insert(row.source);
    }
    for (const std::string& src : external_sources)
        if (trainval_sources.count(src))
            throw DataError("source \"" + src +
                            "\" appears in both external and train/val splits");
}

void validate_manifest_files(const DatasetManifest& m) {
    validate_manifest(m);
    for (const auto& row : m.rows) {
        std::string full = m.resolve(row);
        if (!fs::exists(full)) throw DataError("manifest references missing file: " + full);
    }
}

std::string manifest_digest(const DatasetManifest& m) {
    return sha256_hex(manifest_to_text(m));
}

}  // namespace ganattr
