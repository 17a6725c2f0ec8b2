#include "grounder/dual_encoder.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "grounder/binary_io.hpp"
#include "grounder/hash.hpp"
#include "grounder/kernels.hpp"

namespace grounder {

namespace {

constexpr std::string_view kModelMagic = "GDEM";
constexpr std::uint8_t kModelVersion = 1;

void write_params(io::Writer& w, const EncoderParams& p) {
    w.u8(static_cast<std::uint8_t>(p.variant));
    w.u64(p.weights.size());
    w.f32_array(p.weights);
}

EncoderParams read_params(io::Reader& r, std::size_t hash_dims, std::size_t dims) {
    EncoderParams p;
    const auto tag = r.u8();
    if (tag > 1) throw DataError("model: unknown encoder variant tag " + std::to_string(tag));
    p.variant = static_cast<EncoderVariant>(tag);
    p.hash_dims = hash_dims;
    p.dims = dims;
    const auto count = r.u64();
    if (count != hash_dims * dims) throw DataError("model: weight count does not match header");
    p.weights.resize(count);
    r.f32_array(p.weights);
    return p;
}

}  // namespace

Featurized featurize(std::string_view text, const FeatureConfig& config) {
    const auto tokens = tokenize(text);
    const auto counts = hash_features(tokens, config);
    const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, tokens.size()));
    Featurized out;
    out.index.reserve(counts.entries.size());
    out.value.reserve(counts.entries.size());
    for (const auto& [idx, count] : counts.entries) {
        out.index.push_back(idx);
        out.value.push_back(count * scale);
    }
    return out;
}

EncoderParams EncoderParams::random(EncoderVariant variant, std::size_t hash_dims, std::size_t dims, Rng& rng) {
    EncoderParams p{variant, hash_dims, dims, std::vector<float>(hash_dims * dims)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(hash_dims));
    for (auto& w : p.weights) w = static_cast<float>(rng.uniform(-bound, bound));
    return p;
}

void EncoderParams::validate() const {
    if (dims < 2) throw ArgumentError("embedding dims must be >= 2");
    if (weights.size() != hash_dims * dims) throw ArgumentError("weight matrix has wrong size");
    for (float w : weights) {
        if (!std::isfinite(w)) throw DataError("encoder weights contain non-finite values");
    }
}

Activation normalize_projection(std::vector<double> projected) {
    Activation act;
    double sq = 0.0;
    for (double v : projected) sq += v * v;
    act.norm = std::sqrt(sq);
    act.unit.assign(projected.size(), 0.0);
    if (act.norm == 0.0) {
        act.degenerate = true;
        if (!act.unit.empty()) act.unit[0] = 1.0;
    } else {
        for (std::size_t j = 0; j < projected.size(); ++j) act.unit[j] = projected[j] / act.norm;
    }
    act.projected = std::move(projected);
    return act;
}

std::vector<double> normalize_backward(const Activation& act, std::span<const double> grad_unit) {
    std::vector<double> grad(act.unit.size(), 0.0);
    if (act.degenerate) return grad;
    double dot = 0.0;
    for (std::size_t j = 0; j < grad.size(); ++j) dot += act.unit[j] * grad_unit[j];
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = (grad_unit[j] - act.unit[j] * dot) / act.norm;
    return grad;
}

EmbeddingVector to_embedding(const Activation& act) {
    EmbeddingVector e;
    e.values.reserve(act.unit.size());
    for (double v : act.unit) e.values.push_back(static_cast<float>(v));
    return e;
}

EmbeddingVector normalized(std::span<const double> values) {
    return to_embedding(normalize_projection(std::vector<double>(values.begin(), values.end())));
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dims() != b.dims()) {
        throw ArgumentError("embedding dimension mismatch: " + std::to_string(a.dims()) + " vs " +
                            std::to_string(b.dims()));
    }
    double dot = 0.0;
    for (std::size_t j = 0; j < a.dims(); ++j) dot += static_cast<double>(a.values[j]) * b.values[j];
    return dot;
}

EmbeddingVector encode(const EncoderParams& params, const FeatureConfig& features, std::string_view text) {
    const auto x = featurize(text, features);
    return to_embedding(encode_forward<float>(params.weights, params.dims, x));
}

DualEncoder::DualEncoder(FeatureConfig features, EncoderParams query, EncoderParams knowledge)
    : features_(features), query_(std::move(query)), knowledge_(std::move(knowledge)) {
    features_.validate();
    query_.validate();
    knowledge_.validate();
    if (query_.dims != knowledge_.dims || query_.hash_dims != knowledge_.hash_dims ||
        query_.hash_dims != features_.hash_dims) {
        throw ArgumentError("query and knowledge encoders must share V and d");
    }
    query_.variant = EncoderVariant::query;
    knowledge_.variant = EncoderVariant::knowledge;
}

DualEncoder DualEncoder::random(FeatureConfig features, std::size_t dims, std::uint64_t seed) {
    features.validate();
    if (dims < 2) throw ArgumentError("embedding dims must be >= 2");
    Rng rng(seed);
    auto q = EncoderParams::random(EncoderVariant::query, features.hash_dims, dims, rng);
    auto k = EncoderParams::random(EncoderVariant::knowledge, features.hash_dims, dims, rng);
    return DualEncoder(features, std::move(q), std::move(k));
}

EmbeddingVector DualEncoder::encode(EncoderVariant which, std::string_view text) const {
    return grounder::encode(params(which), features_, text);
}

std::vector<EmbeddingVector> DualEncoder::encode_batch(EncoderVariant which,
                                                       std::span<const std::string> texts) const {
    const auto& p = params(which);
    std::vector<Featurized> xs;
    xs.reserve(texts.size());
    for (const auto& t : texts) xs.push_back(featurize(t, features_));
    std::vector<kernels::SparseInput> inputs;
    inputs.reserve(xs.size());
    for (const auto& x : xs) inputs.push_back({x.index, x.value});
    std::vector<double> projected(texts.size() * p.dims);
    kernels::omp::project_batch(p.weights, p.dims, inputs, projected);

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto row = std::span<const double>(projected).subspan(i * p.dims, p.dims);
        out.push_back(to_embedding(normalize_projection({row.begin(), row.end()})));
    }
    return out;
}

// Layout: magic "GDEM", version u8, V u64, d u32, ngram_max u8, then the
// query and knowledge encoders as { variant u8, count u64, count x f32 }.
// Weights are feature-major: the d floats of feature f start at f * d.
std::vector<std::byte> DualEncoder::serialize() const {
    io::Writer w;
    w.magic(kModelMagic);
    w.u8(kModelVersion);
    w.u64(features_.hash_dims);
    w.u32(static_cast<std::uint32_t>(query_.dims));
    w.u8(static_cast<std::uint8_t>(features_.ngram_max));
    write_params(w, query_);
    write_params(w, knowledge_);
    const auto bytes = w.bytes();
    return {bytes.begin(), bytes.end()};
}

DualEncoder DualEncoder::deserialize(std::span<const std::byte> bytes, const std::string& what) {
    io::Reader r(bytes, what);
    r.expect_magic(kModelMagic);
    r.expect_version(kModelVersion);
    FeatureConfig features;
    features.hash_dims = r.u64();
    const std::size_t dims = r.u32();
    features.ngram_max = r.u8();
    try {
        features.validate();
    } catch (const ArgumentError& e) {
        throw DataError(what + ": " + e.what());
    }
    if (dims < 2) throw DataError(what + ": embedding dims must be >= 2");
    auto q = read_params(r, features.hash_dims, dims);
    auto k = read_params(r, features.hash_dims, dims);
    r.expect_end();
    if (q.variant != EncoderVariant::query || k.variant != EncoderVariant::knowledge) {
        throw DataError(what + ": encoder variant tags out of order");
    }
    return DualEncoder(features, std::move(q), std::move(k));
}

void DualEncoder::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

DualEncoder DualEncoder::load(const std::filesystem::path& path) {
    return deserialize(io::read_file(path), path.string());
}

std::string DualEncoder::fingerprint() const {
    const auto bytes = serialize();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::unordered_map<std::string, EmbeddingVector> load_embedding_sidecar(const std::filesystem::path& path,
                                                                       std::size_t dims) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embedding sidecar: " + path.string());
    std::unordered_map<std::string, EmbeddingVector> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        try {
            const auto j = nlohmann::json::parse(line);
            const auto values = j.at("embedding").get<std::vector<double>>();
            if (values.size() != dims) {
                throw DataError(where + ": embedding has " + std::to_string(values.size()) +
                                " dims, expected " + std::to_string(dims));
            }
            for (double v : values) {
                if (!std::isfinite(v)) throw DataError(where + ": non-finite embedding value");
            }
            out[j.at("id").get<std::string>()] = normalized(values);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    return out;
}

}  // namespace grounder
