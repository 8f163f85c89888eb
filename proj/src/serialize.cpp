#include "protoseg/serialize.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <system_error>

namespace protoseg {

using nlohmann::json;

namespace {

constexpr const char* kEpisodeFormat = "protoseg-episodes";
constexpr const char* kNetFormat = "protoseg-threshold-net";
constexpr int kFormatVersion = 1;
constexpr char kBinaryMagic[4] = {'P', 'S', 'E', 'P'};

json feature_map_to_json(const FeatureMap& f) {
    return json{{"height", f.height()},
                {"width", f.width()},
                {"dim", f.dim()},
                {"values", f.values()}};
}

FeatureMap feature_map_from_json(const json& j) {
    return FeatureMap(j.at("height").get<int>(), j.at("width").get<int>(), j.at("dim").get<int>(),
                      j.at("values").get<std::vector<double>>());
}

json masks_to_json(const std::map<int, BinaryMask>& masks) {
    json out = json::array();
    for (const auto& [cls, mask] : masks) {
        json entry;
        entry["class"] = cls;
        entry["height"] = mask.height();
        entry["width"] = mask.width();
        entry["values"] = mask.values();
        out.push_back(std::move(entry));
    }
    return out;
}

std::map<int, BinaryMask> masks_from_json(const json& j) {
    std::map<int, BinaryMask> out;
    for (const json& entry : j) {
        out.emplace(entry.at("class").get<int>(),
                    BinaryMask(entry.at("height").get<int>(), entry.at("width").get<int>(),
                               entry.at("values").get<std::vector<std::uint8_t>>()));
    }
    return out;
}

// --- binary encoding helpers (little-endian) ---

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

struct Reader {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw IoError("binary episode file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string out = data.substr(pos, n);
        pos += n;
        return out;
    }
};

void put_feature_map(std::string& out, const FeatureMap& f) {
    put_u32(out, static_cast<std::uint32_t>(f.height()));
    put_u32(out, static_cast<std::uint32_t>(f.width()));
    put_u32(out, static_cast<std::uint32_t>(f.dim()));
    for (double v : f.values()) put_f64(out, v);
}

FeatureMap get_feature_map(Reader& r) {
    const int h = static_cast<int>(r.u32());
    const int w = static_cast<int>(r.u32());
    const int d = static_cast<int>(r.u32());
    if (h < 1 || w < 1 || d < 1 || static_cast<long long>(h) * w * d > (1LL << 28)) {
        throw IoError("binary episode file: implausible feature map shape");
    }
    std::vector<double> values(static_cast<std::size_t>(h) * w * d);
    for (double& v : values) v = r.f64();
    return FeatureMap(h, w, d, std::move(values));
}

void put_masks(std::string& out, const std::map<int, BinaryMask>& masks) {
    put_u32(out, static_cast<std::uint32_t>(masks.size()));
    for (const auto& [cls, mask] : masks) {
        put_i32(out, cls);
        put_u32(out, static_cast<std::uint32_t>(mask.height()));
        put_u32(out, static_cast<std::uint32_t>(mask.width()));
        for (std::uint8_t v : mask.values()) out.push_back(static_cast<char>(v));
    }
}

std::map<int, BinaryMask> get_masks(Reader& r) {
    const std::uint32_t count = r.u32();
    std::map<int, BinaryMask> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const int cls = r.i32();
        const int h = static_cast<int>(r.u32());
        const int w = static_cast<int>(r.u32());
        const std::string raw = r.bytes(static_cast<std::size_t>(h) * w);
        std::vector<std::uint8_t> values(raw.begin(), raw.end());
        out.emplace(cls, BinaryMask(h, w, std::move(values)));
    }
    return out;
}

}  // namespace

json spec_to_json(const SyntheticSpec& spec) {
    return json{{"n", spec.n},
                {"k", spec.k},
                {"u", spec.u},
                {"q", spec.q},
                {"height", spec.height},
                {"width", spec.width},
                {"dim", spec.dim},
                {"class_means", spec.class_means},
                {"sigma", spec.sigma},
                {"separation", spec.separation},
                {"distractors_per_aux", spec.distractors_per_aux},
                {"blob",
                 {{"min_extent", spec.blob.min_extent},
                  {"max_extent", spec.blob.max_extent},
                  {"ellipse_prob", spec.blob.ellipse_prob}}},
                {"seed", spec.seed}};
}

SyntheticSpec spec_from_json(const json& j) {
    SyntheticSpec spec;
    spec.n = j.at("n").get<int>();
    spec.k = j.at("k").get<int>();
    spec.u = j.at("u").get<int>();
    spec.q = j.at("q").get<int>();
    spec.height = j.at("height").get<int>();
    spec.width = j.at("width").get<int>();
    spec.dim = j.at("dim").get<int>();
    spec.class_means = j.at("class_means").get<std::vector<std::vector<double>>>();
    spec.sigma = j.at("sigma").get<double>();
    spec.separation = j.at("separation").get<double>();
    spec.distractors_per_aux = j.at("distractors_per_aux").get<int>();
    const json& blob = j.at("blob");
    spec.blob.min_extent = blob.at("min_extent").get<double>();
    spec.blob.max_extent = blob.at("max_extent").get<double>();
    spec.blob.ellipse_prob = blob.at("ellipse_prob").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
}

json episode_to_json(const Episode& episode) {
    json support = json::array();
    for (const SupportImage& img : episode.support()) {
        support.push_back(json{{"features", feature_map_to_json(img.features)},
                               {"masks", masks_to_json(img.masks)}});
    }
    json aux = json::array();
    for (const AuxImage& img : episode.aux()) {
        aux.push_back(json{{"tag", img.tag}, {"features", feature_map_to_json(img.features)}});
    }
    json query = json::array();
    const auto& query_masks = episode.scoring_view().query_masks;
    for (std::size_t i = 0; i < episode.query_features().size(); ++i) {
        query.push_back(json{{"features", feature_map_to_json(episode.query_features()[i])},
                             {"masks", masks_to_json(query_masks[i])}});
    }
    return json{{"seed", episode.seed()},
                {"classes", episode.classes()},
                {"support", std::move(support)},
                {"aux", std::move(aux)},
                {"query", std::move(query)}};
}

Episode episode_from_json(const json& j) {
    std::vector<SupportImage> support;
    for (const json& img : j.at("support")) {
        support.push_back(SupportImage{feature_map_from_json(img.at("features")),
                                       masks_from_json(img.at("masks"))});
    }
    std::vector<AuxImage> aux;
    for (const json& img : j.at("aux")) {
        aux.push_back(AuxImage{feature_map_from_json(img.at("features")), img.at("tag").get<int>()});
    }
    std::vector<FeatureMap> query_features;
    std::vector<std::map<int, BinaryMask>> query_masks;
    for (const json& img : j.at("query")) {
        query_features.push_back(feature_map_from_json(img.at("features")));
        query_masks.push_back(masks_from_json(img.at("masks")));
    }
    return Episode(j.at("seed").get<std::uint64_t>(), j.at("classes").get<std::vector<int>>(),
                   std::move(support), std::move(aux), std::move(query_features),
                   std::move(query_masks));
}

json net_to_json(const ThresholdNet& net) {
    return json{{"format", kNetFormat},
                {"version", kFormatVersion},
                {"input_dim", ThresholdNet::kInputDim},
                {"hidden_dim", ThresholdNet::kHiddenDim},
                {"hidden_weights", net.hidden_weights},
                {"hidden_bias", net.hidden_bias},
                {"output_weights", net.output_weights},
                {"output_bias", net.output_bias}};
}

ThresholdNet net_from_json(const json& j) {
    if (j.at("format").get<std::string>() != kNetFormat) {
        throw IoError("threshold net file: unexpected format tag");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
        throw IoError("threshold net file: unsupported version");
    }
    if (j.at("input_dim").get<int>() != ThresholdNet::kInputDim ||
        j.at("hidden_dim").get<int>() != ThresholdNet::kHiddenDim) {
        throw IoError("threshold net file: dimension mismatch");
    }
    ThresholdNet net;
    net.hidden_weights = j.at("hidden_weights").get<std::vector<double>>();
    net.hidden_bias = j.at("hidden_bias").get<std::vector<double>>();
    net.output_weights = j.at("output_weights").get<std::vector<double>>();
    net.output_bias = j.at("output_bias").get<double>();
    if (net.hidden_weights.size() !=
            static_cast<std::size_t>(ThresholdNet::kHiddenDim * ThresholdNet::kInputDim) ||
        net.hidden_bias.size() != static_cast<std::size_t>(ThresholdNet::kHiddenDim) ||
        net.output_weights.size() != static_cast<std::size_t>(ThresholdNet::kHiddenDim)) {
        throw IoError("threshold net file: parameter array size mismatch");
    }
    return net;
}

void write_episode_file(const std::filesystem::path& path, const EpisodeFile& file,
                        EpisodeFileFormat format) {
    if (format == EpisodeFileFormat::json) {
        json j{{"format", kEpisodeFormat},
               {"version", kFormatVersion},
               {"spec", spec_to_json(file.spec)},
               {"episodes", json::array()}};
        for (const Episode& e : file.episodes) j["episodes"].push_back(episode_to_json(e));
        atomic_write(path, j.dump());
        return;
    }

    std::string out;
    out.append(kBinaryMagic, sizeof(kBinaryMagic));
    put_u32(out, kFormatVersion);
    const std::string spec_str = spec_to_json(file.spec).dump();
    put_u64(out, spec_str.size());
    out += spec_str;
    put_u64(out, file.episodes.size());
    for (const Episode& e : file.episodes) {
        put_u64(out, e.seed());
        put_u32(out, static_cast<std::uint32_t>(e.classes().size()));
        for (int c : e.classes()) put_i32(out, c);
        put_u32(out, static_cast<std::uint32_t>(e.support().size()));
        for (const SupportImage& img : e.support()) {
            put_feature_map(out, img.features);
            put_masks(out, img.masks);
        }
        put_u32(out, static_cast<std::uint32_t>(e.aux().size()));
        for (const AuxImage& img : e.aux()) {
            put_i32(out, img.tag);
            put_feature_map(out, img.features);
        }
        const auto& query_masks = e.scoring_view().query_masks;
        put_u32(out, static_cast<std::uint32_t>(e.query_features().size()));
        for (std::size_t i = 0; i < e.query_features().size(); ++i) {
            put_feature_map(out, e.query_features()[i]);
            put_masks(out, query_masks[i]);
        }
    }
    atomic_write(path, out);
}

EpisodeFile read_episode_file(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    if (content.size() >= 4 && std::memcmp(content.data(), kBinaryMagic, 4) == 0) {
        Reader r{content, 4};
        if (r.u32() != kFormatVersion) throw IoError("episode file: unsupported version");
        const std::uint64_t spec_len = r.u64();
        const std::string spec_str = r.bytes(spec_len);
        EpisodeFile file{spec_from_json(json::parse(spec_str)), {}};
        const std::uint64_t count = r.u64();
        for (std::uint64_t idx = 0; idx < count; ++idx) {
            const std::uint64_t seed = r.u64();
            const std::uint32_t n_classes = r.u32();
            std::vector<int> classes(n_classes);
            for (int& c : classes) c = r.i32();
            std::vector<SupportImage> support(r.u32(), SupportImage{FeatureMap(1, 1, 1), {}});
            for (SupportImage& img : support) {
                img.features = get_feature_map(r);
                img.masks = get_masks(r);
            }
            const std::uint32_t aux_count = r.u32();
            std::vector<AuxImage> aux;
            aux.reserve(aux_count);
            for (std::uint32_t i = 0; i < aux_count; ++i) {
                const int tag = r.i32();
                aux.push_back(AuxImage{get_feature_map(r), tag});
            }
            const std::uint32_t query_count = r.u32();
            std::vector<FeatureMap> query_features;
            std::vector<std::map<int, BinaryMask>> query_masks;
            for (std::uint32_t i = 0; i < query_count; ++i) {
                query_features.push_back(get_feature_map(r));
                query_masks.push_back(get_masks(r));
            }
            file.episodes.emplace_back(seed, std::move(classes), std::move(support),
                                       std::move(aux), std::move(query_features),
                                       std::move(query_masks));
        }
        return file;
    }

    json j;
    try {
        j = json::parse(content);
    } catch (const json::exception& e) {
        throw IoError("episode file: not valid JSON (" + std::string(e.what()) + ")");
    }
    if (j.at("format").get<std::string>() != kEpisodeFormat) {
        throw IoError("episode file: unexpected format tag");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
        throw IoError("episode file: unsupported version");
    }
    EpisodeFile file{spec_from_json(j.at("spec")), {}};
    for (const json& e : j.at("episodes")) file.episodes.push_back(episode_from_json(e));
    return file;
}

void write_net_file(const std::filesystem::path& path, const ThresholdNet& net) {
    atomic_write(path, net_to_json(net).dump(2) + "\n");
}

ThresholdNet read_net_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError("threshold net file: not valid JSON (" + std::string(e.what()) + ")");
    }
    return net_from_json(j);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("rename failed: " + path.string() + " (" + ec.message() + ")");
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return content;
}

}  // namespace protoseg
