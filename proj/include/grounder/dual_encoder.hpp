#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grounder/error.hpp"
#include "grounder/rng.hpp"
#include "grounder/text_features.hpp"

namespace grounder {

inline constexpr std::size_t kDefaultEmbeddingDims = 128;

enum class EncoderVariant : std::uint8_t { query = 0, knowledge = 1 };

// Unit-norm embedding. Stored in float, the precision of the index files.
struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dims() const { return values.size(); }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Scaled hashed features of one text: counts / max(1, token count).
// The scale makes the projection a mean over token positions.
struct Featurized {
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    bool empty() const { return index.empty(); }
};

Featurized featurize(std::string_view text, const FeatureConfig& config);

// Linear map from hashed features to R^d. Mathematically a d x V matrix;
// stored feature-major so the d weights of one feature are contiguous.
struct EncoderParams {
    EncoderVariant variant = EncoderVariant::query;
    std::size_t hash_dims = 0;
    std::size_t dims = 0;
    std::vector<float> weights;  // hash_dims * dims

    // Entries i.i.d. uniform in [-1/sqrt(V), 1/sqrt(V)].
    static EncoderParams random(EncoderVariant variant, std::size_t hash_dims, std::size_t dims, Rng& rng);

    std::span<const float> column(std::uint32_t feature) const {
        return std::span<const float>(weights).subspan(static_cast<std::size_t>(feature) * dims, dims);
    }

    void validate() const;

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

// Forward pass kept for backpropagation.
struct Activation {
    std::vector<double> projected;  // u = W x
    double norm = 0.0;              // ||u||
    std::vector<double> unit;       // u / ||u||, or e1 when u == 0
    bool degenerate = false;
};

// u = W x for any weight precision (double is used by the gradient checker).
template <class Real>
void project(std::span<const Real> weights, std::size_t dims, const Featurized& x, std::span<double> out) {
    for (auto& v : out) v = 0.0;
    for (std::size_t k = 0; k < x.index.size(); ++k) {
        const Real* column = weights.data() + static_cast<std::size_t>(x.index[k]) * dims;
        for (std::size_t j = 0; j < dims; ++j) out[j] += x.value[k] * static_cast<double>(column[j]);
    }
}

// Normalizes u into an Activation; the zero vector maps to e1.
Activation normalize_projection(std::vector<double> projected);

template <class Real>
Activation encode_forward(std::span<const Real> weights, std::size_t dims, const Featurized& x) {
    std::vector<double> u(dims);
    project<Real>(weights, dims, x, u);
    return normalize_projection(std::move(u));
}

// dL/du given dL/de for e = u / ||u||. Zero for degenerate activations.
std::vector<double> normalize_backward(const Activation& act, std::span<const double> grad_unit);

// Adds dL/dW = (dL/du) x^T into a feature-major gradient buffer.
template <class Real>
void accumulate_weight_grad(const Featurized& x, std::span<const double> grad_projected, std::size_t dims,
                            std::span<Real> grad_weights) {
    for (std::size_t k = 0; k < x.index.size(); ++k) {
        Real* column = grad_weights.data() + static_cast<std::size_t>(x.index[k]) * dims;
        for (std::size_t j = 0; j < dims; ++j) {
            column[j] += static_cast<Real>(x.value[k] * grad_projected[j]);
        }
    }
}

EmbeddingVector to_embedding(const Activation& act);

// Rescales to unit norm; the zero vector becomes e1.
EmbeddingVector normalized(std::span<const double> values);

// Dot product of unit vectors. Throws ArgumentError on dimension mismatch.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Query and knowledge encoders sharing one feature configuration.
class DualEncoder {
public:
    DualEncoder(FeatureConfig features, EncoderParams query, EncoderParams knowledge);

    static DualEncoder random(FeatureConfig features, std::size_t dims, std::uint64_t seed);
    static DualEncoder load(const std::filesystem::path& path);

    void save(const std::filesystem::path& path) const;
    std::vector<std::byte> serialize() const;
    static DualEncoder deserialize(std::span<const std::byte> bytes, const std::string& what = "model");

    // 16 hex digits of the FNV-1a hash of the serialized model.
    std::string fingerprint() const;

    EmbeddingVector encode(EncoderVariant which, std::string_view text) const;
    EmbeddingVector encode_query(std::string_view text) const { return encode(EncoderVariant::query, text); }
    EmbeddingVector encode_knowledge(std::string_view text) const {
        return encode(EncoderVariant::knowledge, text);
    }
    // Encodes many texts with the parallel projection kernel; row order = input order.
    std::vector<EmbeddingVector> encode_batch(EncoderVariant which, std::span<const std::string> texts) const;

    const FeatureConfig& features() const { return features_; }
    std::size_t dims() const { return query_.dims; }
    const EncoderParams& params(EncoderVariant which) const {
        return which == EncoderVariant::query ? query_ : knowledge_;
    }
    EncoderParams& params(EncoderVariant which) { return which == EncoderVariant::query ? query_ : knowledge_; }

    friend bool operator==(const DualEncoder&, const DualEncoder&) = default;

private:
    FeatureConfig features_;
    EncoderParams query_;
    EncoderParams knowledge_;
};

EmbeddingVector encode(const EncoderParams& params, const FeatureConfig& features, std::string_view text);

// Externally computed embeddings, JSONL {"id": str, "embedding": [d floats]}.
// Vectors are normalized on load. Throws DataError on bad rows or dims mismatch.
std::unordered_map<std::string, EmbeddingVector> load_embedding_sidecar(const std::filesystem::path& path,
                                                                       std::size_t dims);

}  // namespace grounder
