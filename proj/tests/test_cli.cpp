// End-to-end checks of the command-line binary: every case shells out to the
// real executable and inspects exit codes, streams, and emitted files.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ganattr/digest.hpp"
#include "ganattr/image.hpp"
#include "ganattr/manifest.hpp"
#include "json.hpp"

#ifndef GANATTR_CLI
#error "GANATTR_CLI must point at the built command-line binary"
#endif

namespace fs = std::filesystem;
using namespace ganattr;
using nlohmann::ordered_json;

namespace {

fs::path scratch_root() {
    fs::path dir = fs::temp_directory_path() / "ganattr-cli-tests";
    fs::create_directories(dir);
    return dir;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult cli(const std::string& args) {
    static int counter = 0;
    fs::path out = scratch_root() / ("stream-" + std::to_string(++counter) + ".out");
    fs::path err = scratch_root() / ("stream-" + std::to_string(counter) + ".err");
    std::string cmd =
        std::string(GANATTR_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    int rc = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::size_t count_token(const std::string& text, const std::string& token) {
    std::size_t hits = 0;
    for (std::size_t at = text.find(token); at != std::string::npos;
         at = text.find(token, at + token.size()))
        ++hits;
    return hits;
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

// One trained workspace shared by the read-only cases. Tiny on purpose: the
// point is plumbing, not model quality.
const fs::path& smoke_workspace() {
    static const fs::path ws = [] {
        fs::path root = scratch_root() / "smoke-ws";
        fs::remove_all(root);
        CliResult synth = cli("synth --out " + (root / "data" / "clean").string() +
                              " --size 64 --sources 2 --per-source 8 --seed 5");
        REQUIRE(synth.code == 0);
        CliResult run = cli("run --workspace " + root.string() +
                            " --phases 1,2,3,4 --seeds 2021 --variants jpeg"
                            " --max-epochs 1 --batch-size 16");
        REQUIRE(run.code == 0);
        return root;
    }();
    return ws;
}

std::string smoke_bundle() {
    return (smoke_workspace() / "phase3" / "seed-2021" / "attribution-pixel.gab").string();
}

std::string smoke_manifest() {
    return (smoke_workspace() / "data" / "clean" / "manifest.tsv").string();
}

}  // namespace

TEST_CASE("cli: synth generates a valid deterministic dataset") {
    fs::path a = scratch_root() / "synth-a";
    fs::path b = scratch_root() / "synth-b";
    fs::remove_all(a);
    fs::remove_all(b);

    std::string flags = " --size 32 --sources 3 --per-source 5 --seed 9";
    CliResult first = cli("synth --out " + a.string() + flags);
    REQUIRE(first.code == 0);
    CHECK(first.out.find("manifest:") != std::string::npos);
    CHECK(first.out.find("digest:") != std::string::npos);

    DatasetManifest m = load_manifest((a / "manifest.tsv").string());
    validate_manifest_files(m);
    CHECK(m.count("train", "gm1") > 0);
    CHECK(m.count("train", "gm3") > 0);
    CHECK(m.count("external", "gmx") > 0);
    CHECK(m.count("train", "gmx") == 0);
    CHECK(m.count("val", "gmx") == 0);

    CliResult second = cli("synth --out " + b.string() + flags);
    REQUIRE(second.code == 0);
    CHECK(sha256_file_hex((a / "manifest.tsv").string()) ==
          sha256_file_hex((b / "manifest.tsv").string()));
}

TEST_CASE("cli: run is ordered, idempotent, and reproducible under --force") {
    const fs::path& ws = smoke_workspace();
    CHECK(fs::exists(ws / "lineage.json"));
    CHECK(fs::exists(ws / "phase4" / "seed-2021" / "attribution-pixel-jpeg.gab"));
    CHECK(fs::exists(ws / "phase3" / "seed-2021" / "baseline-gandct-conv.gab"));

    SUBCASE("rerunning completed phases is a no-op") {
        CliResult rerun = cli("run --workspace " + ws.string() + " --phases 1,2,3,4");
        CHECK(rerun.code == 0);
        CHECK(count_token(rerun.out, "skipped") == 4);
    }

    SUBCASE("a forced retrain reproduces the artifact bit for bit") {
        std::string artifact = (ws / "phase1" / "seed-2021" / "primary-pixel.gab").string();
        std::string before = sha256_file_hex(artifact);
        CliResult forced = cli("run --workspace " + ws.string() + " --phases 1 --force");
        CHECK(forced.code == 0);
        CHECK(forced.out.find("trained") != std::string::npos);
        CHECK(sha256_file_hex(artifact) == before);
    }

    SUBCASE("phases must be requested in ascending order") {
        CliResult bad = cli("run --workspace " + ws.string() + " --phases 2,1");
        CHECK(bad.code == 1);
        CHECK(bad.err.find("ascending") != std::string::npos);
    }

    SUBCASE("missing prerequisites name the phase that must come first") {
        fs::path fresh = scratch_root() / "fresh-ws";
        fs::remove_all(fresh);
        fs::create_directories(fresh / "data");
        fs::copy(ws / "data" / "clean", fresh / "data" / "clean", fs::copy_options::recursive);
        CliResult jump = cli("run --workspace " + fresh.string() +
                             " --phases 2 --seeds 2021 --variants jpeg --max-epochs 1");
        CHECK(jump.code == 2);
        CHECK(jump.err.find("phase 1") != std::string::npos);
    }
}

TEST_CASE("cli: eval reports metrics and replays identically from records") {
    fs::path report = scratch_root() / "report.json";
    fs::path replayed = scratch_root() / "report-replayed.json";
    fs::path records = scratch_root() / "records.jsonl";

    CliResult live = cli("eval --bundle " + smoke_bundle() + " --manifest " + smoke_manifest() +
                         " --split test,external --out " + report.string() + " --records " +
                         records.string());
    REQUIRE(live.code == 0);
    CHECK(live.out.find("== split test ==") != std::string::npos);
    CHECK(live.out.find("detection:") != std::string::npos);

    ordered_json doc = ordered_json::parse(slurp(report));
    REQUIRE(doc.contains("splits"));
    REQUIRE(doc["splits"].contains("test"));
    const auto& test = doc["splits"]["test"];
    CHECK(test.contains("detection"));
    CHECK(test["detection"].contains("f1"));
    CHECK(test["sources"].contains("gm1"));
    CHECK(test["sources"].contains("gm2"));
    CHECK(test.contains("multiclass_accuracy"));
    CHECK(test.contains("contradiction_rate"));
    CHECK(doc["splits"]["external"].contains("exa"));

    CliResult replay = cli("eval --from-records " + records.string() +
                           " --split test,external --out " + replayed.string());
    REQUIRE(replay.code == 0);
    ordered_json doc2 = ordered_json::parse(slurp(replayed));
    CHECK(doc["splits"] == doc2["splits"]);
}

TEST_CASE("cli: eval scores multiclass baselines by argmax") {
    fs::path report = scratch_root() / "baseline-report.json";
    std::string bundle =
        (smoke_workspace() / "phase3" / "seed-2021" / "baseline-ganfp-postpool.gab").string();
    CliResult r = cli("eval --bundle " + bundle + " --manifest " + smoke_manifest() +
                      " --split test --out " + report.string());
    REQUIRE(r.code == 0);
    ordered_json doc = ordered_json::parse(slurp(report));
    const auto& test = doc["splits"]["test"];
    CHECK(test.contains("multiclass_accuracy"));
    CHECK(test["classes"].contains("real"));
    CHECK(test["classes"].contains("gm1"));
    CHECK(test["classes"].contains("gm2"));

    // Probing is a detector-bundle operation; baselines have no per-source heads.
    CliResult probe = cli("probe --bundle " + bundle + " " + smoke_manifest());
    CHECK(probe.code == 1);
}

TEST_CASE("cli: probe continues past decode failures and emits heatmaps") {
    DatasetManifest m = load_manifest(smoke_manifest());
    std::vector<std::string> images;
    for (const auto& row : m.rows) {
        if (row.split != "test") continue;
        images.push_back(m.resolve(row));
        if (images.size() == 2) break;
    }
    REQUIRE(images.size() == 2);

    fs::path out_dir = scratch_root() / "probe-out";
    fs::remove_all(out_dir);
    CliResult r = cli("probe --bundle " + smoke_bundle() + " --cam --out-dir " + out_dir.string() +
                      " " + images[0] + " " + images[1] + " " +
                      (scratch_root() / "missing.png").string());
    CHECK(r.code == 2);
    CHECK(count_token(r.out, "primary=") == 2);
    CHECK(count_token(r.out, "flags=") == 2);
    CHECK(r.err.find("missing.png") != std::string::npos);
    CHECK(r.err.find("1 of 3") != std::string::npos);

    // Two probed images, three outputs each: primary plus both secondaries.
    std::size_t heatmaps = 0;
    for (const auto& entry : fs::directory_iterator(out_dir))
        if (entry.path().extension() == ".png") ++heatmaps;
    CHECK(heatmaps == 6);
    CHECK(count_lines(out_dir / "records.jsonl") == 6);

    CliResult clean = cli("probe --bundle " + smoke_bundle() + " " + images[0]);
    CHECK(clean.code == 0);
    CHECK(count_token(clean.out, "primary=") == 1);
}

TEST_CASE("cli: cam-grid renders one montage per source") {
    fs::path out_dir = scratch_root() / "grid-out";
    fs::remove_all(out_dir);
    CliResult r = cli("cam-grid --bundle " + smoke_bundle() + " --manifest " + smoke_manifest() +
                      " --split test --per-source 2 --out-dir " + out_dir.string());
    REQUIRE(r.code == 0);
    CHECK(fs::exists(out_dir / "grid-real.png"));
    CHECK(fs::exists(out_dir / "grid-gm1.png"));
    CHECK(fs::exists(out_dir / "grid-gm2.png"));
    CHECK(fs::exists(out_dir / "records.jsonl"));

    // Panel columns: the input image, the detector map, one map per source.
    ImageU8 grid = load_image((out_dir / "grid-real.png").string());
    CHECK(grid.width == 4 * 64);
    CHECK(grid.height % 64 == 0);
    CHECK(grid.channels == 3);

    std::size_t verdicts = count_token(r.out, "primary=");
    CHECK(count_lines(out_dir / "records.jsonl") == verdicts * 3);
}

TEST_CASE("cli: failures map onto the documented exit codes") {
    CHECK(cli("--definitely-not-a-flag").code == 1);
    CHECK(cli("eval --split test").code == 1);  // neither --bundle nor --from-records
    CHECK(cli("eval --bundle " + (scratch_root() / "no-such.gab").string() + " --manifest " +
              smoke_manifest())
              .code == 2);
    CHECK(cli("run --phases 7 --workspace " + smoke_workspace().string()).code == 1);

    fs::path broken = scratch_root() / "broken-manifest.tsv";
    std::ofstream(broken) << "# ganattr-manifest v1\nnot\tenough\tcolumns\n";
    CHECK(cli("eval --bundle " + smoke_bundle() + " --manifest " + broken.string()).code == 2);
}
