#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "json.hpp"

#include "ganattr/digest.hpp"
#include "ganattr/errors.hpp"
#include "ganattr/model_zoo.hpp"

namespace ganattr {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'G', 'A', 'N', 'A', 'T', 'T', 'R', 'B'};
constexpr std::uint32_t kVersion = 1;

json layer_to_json(const Layer& l) {
    json j;
    j["name"] = l.name;
    switch (l.kind) {
        case LayerKind::Conv2d:
            j["kind"] = "conv2d";
            j["in"] = l.weight.dim(1);
            j["out"] = l.weight.dim(0);
            j["stride"] = l.stride;
            j["bias"] = l.has_bias;
            break;
        case LayerKind::BatchNorm2d:
            j["kind"] = "batchnorm2d";
            j["channels"] = l.gamma.dim(0);
            j["momentum"] = l.momentum;
            j["epsilon"] = l.epsilon;
            break;
        case LayerKind::LeakyRelu:
            j["kind"] = "leaky_relu";
            j["alpha"] = l.alpha;
            break;
        case LayerKind::AvgPool2d:
            j["kind"] = "avg_pool2d";
            j["pool"] = l.pool_size;
            break;
        case LayerKind::GlobalAvgPool:
            j["kind"] = "global_avg_pool";
            break;
        case LayerKind::Dense:
            j["kind"] = "dense";
            j["in"] = l.weight.dim(1);
            j["out"] = l.weight.dim(0);
            break;
    }
    return j;
}

Layer layer_from_json(const json& j) {
    const std::string kind = j.at("kind");
    const std::string name = j.at("name");
    if (kind == "conv2d")
        return Layer::conv2d(name, j.at("in"), j.at("out"), j.at("stride"), j.at("bias"));
    if (kind == "batchnorm2d") {
        Layer l = Layer::batchnorm2d(name, j.at("channels"));
        l.momentum = j.at("momentum");
        l.epsilon = j.at("epsilon");
        return l;
    }
    if (kind == "leaky_relu") return Layer::leaky_relu(name, j.at("alpha"));
    if (kind == "avg_pool2d") return Layer::avg_pool2d(name, j.at("pool"));
    if (kind == "global_avg_pool") return Layer::global_avg_pool(name);
    if (kind == "dense") return Layer::dense(name, j.at("in"), j.at("out"));
    throw FormatError("bundle header names unknown layer kind '" + kind + "'");
}

json graph_to_json(const ModelGraph& g) {
    json j;
    j["name"] = g.name;
    j["channels"] = g.input.channels;
    j["resolution"] = g.input.resolution;
    j["representation"] = g.input.representation == Representation::Pixel ? "pixel" : "dct";
    j["head"] = g.head == HeadKind::GapCam ? "gap_cam" : "flatten_dense";
    j["decision"] = g.decision == DecisionKind::Sigmoid ? "sigmoid" : "softmax";
    j["classes"] = g.classes;
    j["branch_conv_index"] = g.branch_conv_index;
    j["frozen"] = g.frozen;
    json layers = json::array();
    for (const auto& l : g.layers) layers.push_back(layer_to_json(l));
    j["layers"] = layers;
    return j;
}

ModelGraph graph_from_json(const json& j) {
    ModelGraph g;
    g.name = j.at("name");
    g.input.channels = j.at("channels");
    g.input.resolution = j.at("resolution");
    const std::string rep = j.at("representation");
    if (rep != "pixel" && rep != "dct")
        throw FormatError("bundle header names unknown representation '" + rep + "'");
    g.input.representation = rep == "pixel" ? Representation::Pixel : Representation::Dct;
    const std::string head = j.at("head");
    g.head = head == "gap_cam" ? HeadKind::GapCam : HeadKind::FlattenDense;
    const std::string dec = j.at("decision");
    g.decision = dec == "sigmoid" ? DecisionKind::Sigmoid : DecisionKind::Softmax;
    g.classes = j.at("classes");
    g.branch_conv_index = j.at("branch_conv_index");
    g.frozen = j.at("frozen");
    for (const auto& lj : j.at("layers")) g.layers.push_back(layer_from_json(lj));
    return g;
}

void put_u16(std::string& buf, std::uint16_t v) { buf.append(reinterpret_cast<char*>(&v), 2); }
void put_u32(std::string& buf, std::uint32_t v) { buf.append(reinterpret_cast<char*>(&v), 4); }

void put_tensor(std::string& buf, const std::string& name, const Tensor& t) {
    if (name.size() > 0xFFFF) throw ValueError("tensor name too long for the container");
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.append(name);
    buf.push_back(static_cast<char>(t.ndim()));
    for (int d : t.shape) put_u32(buf, static_cast<std::uint32_t>(d));
    for (real v : t.data) {
        const float f = static_cast<float>(v);
        buf.append(reinterpret_cast<const char*>(&f), 4);
    }
}

// Sequential reader with explicit bounds checks; any overrun means the file
// was cut short.
struct Reader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t k) const {
        if (off + k > n) throw FormatError("bundle is truncated");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v;
        std::memcpy(&v, p + off, 2);
        off += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, p + off, 4);
        off += 4;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return p[off++];
    }
    std::string bytes(std::size_t k) {
        need(k);
        std::string s(reinterpret_cast<const char*>(p + off), k);
        off += k;
        return s;
    }
};

void read_tensor_into(Reader& r, const std::string& want_name, Tensor& dst) {
    const std::uint16_t len = r.u16();
    const std::string name = r.bytes(len);
    if (name != want_name)
        throw FormatError("bundle tensor order mismatch: expected '" + want_name + "', found '" +
                          name + "'");
    const int nd = r.u8();
    std::vector<int> dims;
    for (int i = 0; i < nd; ++i) dims.push_back(static_cast<int>(r.u32()));
    if (dims != dst.shape)
        throw FormatError("bundle tensor '" + name + "' has an unexpected shape");
    for (auto& v : dst.data) {
        float f;
        r.need(4);
        std::memcpy(&f, r.p + r.off, 4);
        r.off += 4;
        v = static_cast<real>(f);
    }
}

// Quantizes in place to the container's storage precision so that what's in
// memory after a save equals what a reload would produce.
void quantize_graph(ModelGraph& g) {
    for (auto& p : g.all_state())
        for (auto& v : p.value->data) v = static_cast<real>(static_cast<float>(v));
}

}  // namespace

void save_bundle(ModelBundle& bundle, const std::string& path) {
    json header;
    header["primary"] = graph_to_json(bundle.primary);
    json secs = json::array();
    for (const auto& s : bundle.secondaries) secs.push_back(graph_to_json(s));
    header["secondaries"] = secs;
    header["stats_samples"] = bundle.stats.samples;
    const std::string header_text = header.dump();

    quantize_graph(bundle.primary);
    for (auto& s : bundle.secondaries) quantize_graph(s);

    std::string buf;
    buf.append(kMagic, sizeof kMagic);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(header_text.size()));
    buf.append(header_text);
    for (const auto& p : bundle.primary.all_state()) put_tensor(buf, "primary/" + p.name, *p.value);
    for (auto& s : bundle.secondaries)
        for (const auto& p : s.all_state())
            put_tensor(buf, "secondary/" + s.name + "/" + p.name, *p.value);
    if (bundle.stats.samples > 0) {
        Tensor mean = bundle.stats.mean, stddev = bundle.stats.stddev;
        for (auto& v : mean.data) v = static_cast<real>(static_cast<float>(v));
        for (auto& v : stddev.data) v = static_cast<real>(static_cast<float>(v));
        bundle.stats.mean = mean;
        bundle.stats.stddev = stddev;
        put_tensor(buf, "stats/mean", mean);
        put_tensor(buf, "stats/stddev", stddev);
    }

    const auto digest = sha256_bytes(buf.data(), buf.size());
    buf.append(reinterpret_cast<const char*>(digest.data()), digest.size());

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write bundle '" + path + "'");
    const std::size_t wr = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (wr != buf.size()) throw IoError("short write on bundle '" + path + "'");
}

ModelBundle load_bundle(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open bundle '" + path + "'");
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    const std::size_t rd = std::fread(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (rd != buf.size()) throw IoError("short read on bundle '" + path + "'");

    if (buf.size() < sizeof kMagic + 4 + 4 + 32) throw FormatError("bundle is truncated");
    if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
        throw FormatError("'" + path + "' is not a weight bundle (bad magic)");

    // Structure is parsed first with bounds checks so truncation reports as
    // such; the trailing digest is verified before any data is handed back.
    const std::size_t body = buf.size() - 32;
    Reader r{buf.data(), body, sizeof kMagic};
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError("bundle format version " + std::to_string(version) + " is not supported");
    const std::uint32_t header_len = r.u32();
    json header;
    try {
        header = json::parse(r.bytes(header_len));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bundle header is not valid JSON: ") + e.what());
    }

    ModelBundle bundle;
    try {
        bundle.primary = graph_from_json(header.at("primary"));
        for (const auto& sj : header.at("secondaries"))
            bundle.secondaries.push_back(graph_from_json(sj));
        bundle.stats.samples = header.at("stats_samples");
    } catch (const json::exception& e) {
        throw FormatError(std::string("bundle header is incomplete: ") + e.what());
    }

    for (const auto& p : bundle.primary.all_state())
        read_tensor_into(r, "primary/" + p.name, *p.value);
    for (auto& s : bundle.secondaries)
        for (const auto& p : s.all_state())
            read_tensor_into(r, "secondary/" + s.name + "/" + p.name, *p.value);
    if (bundle.stats.samples > 0) {
        const int res = bundle.primary.input.resolution;
        bundle.stats.mean = Tensor({1, res, res});
        bundle.stats.stddev = Tensor({1, res, res});
        read_tensor_into(r, "stats/mean", bundle.stats.mean);
        read_tensor_into(r, "stats/stddev", bundle.stats.stddev);
    }
    if (r.off != body) throw FormatError("bundle has trailing bytes after the tensor section");

    const auto want = sha256_bytes(buf.data(), body);
    if (std::memcmp(buf.data() + body, want.data(), 32) != 0)
        throw DigestError("bundle '" + path + "' failed its integrity check");
    return bundle;
}

}  // namespace ganattr
