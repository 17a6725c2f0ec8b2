#include "grounder/dense_index.hpp"

#include <cmath>

#include "grounder/binary_io.hpp"
#include "grounder/error.hpp"
#include "grounder/kernels.hpp"

namespace grounder {

namespace {
constexpr std::string_view kMagic = "GDIX";
constexpr std::uint8_t kVersion = 1;
}  // namespace

DenseIndex::DenseIndex(std::vector<std::string> item_ids, std::size_t dims, std::vector<float> matrix,
                       std::string fingerprint)
    : item_ids_(std::move(item_ids)), dims_(dims), matrix_(std::move(matrix)), fingerprint_(std::move(fingerprint)) {
    if (dims_ < 1) throw ArgumentError("index dims must be >= 1");
    if (matrix_.size() != item_ids_.size() * dims_) throw ArgumentError("index matrix shape mismatch");
    if (fingerprint_.empty()) throw ArgumentError("index fingerprint must be non-empty");
}

DenseIndex DenseIndex::build(const DualEncoder& model, const Corpus& corpus,
                             const std::unordered_map<std::string, EmbeddingVector>* sidecar) {
    if (corpus.empty()) throw ArgumentError("cannot index an empty corpus");
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    for (const auto& t : corpus.tables()) {
        ids.push_back(t.table_id);
        texts.push_back(linearize_table(t));
    }
    const auto encoded = model.encode_batch(EncoderVariant::knowledge, texts);
    const std::size_t d = model.dims();
    std::vector<float> matrix;
    matrix.reserve(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const EmbeddingVector* e = &encoded[i];
        if (sidecar) {
            if (auto it = sidecar->find(ids[i]); it != sidecar->end()) e = &it->second;
        }
        if (e->dims() != d) throw DataError("sidecar embedding for '" + ids[i] + "' has wrong dimension");
        matrix.insert(matrix.end(), e->values.begin(), e->values.end());
    }
    return DenseIndex(std::move(ids), d, std::move(matrix), model.fingerprint());
}

void DenseIndex::save(const std::filesystem::path& path) const {
    io::Writer w;
    w.magic(kMagic);
    w.u8(kVersion);
    w.u64(item_ids_.size());
    w.u32(static_cast<std::uint32_t>(dims_));
    w.str(fingerprint_);
    w.f32_array(matrix_);
    for (const auto& id : item_ids_) w.str(id);
    w.save(path);
}

DenseIndex DenseIndex::load(const std::filesystem::path& path, const std::string& expected_fingerprint,
                            bool force) {
    const auto bytes = io::read_file(path);
    io::Reader r(bytes, path.string());
    r.expect_magic(kMagic);
    r.expect_version(kVersion);
    const auto n = r.u64();
    const std::size_t d = r.u32();
    auto fingerprint = r.str();
    if (d == 0 || n > bytes.size() / (sizeof(float) * d)) throw DataError(path.string() + ": corrupt or truncated");
    std::vector<float> matrix(n * d);
    r.f32_array(matrix);
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) ids.push_back(r.str());
    r.expect_end();
    for (float v : matrix) {
        if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite embedding value");
    }
    if (!force && !expected_fingerprint.empty() && fingerprint != expected_fingerprint) {
        throw DataError(path.string() + ": index was built by model " + fingerprint + ", not " +
                        expected_fingerprint + " (rebuild the index or pass --force)");
    }
    return DenseIndex(std::move(ids), d, std::move(matrix), std::move(fingerprint));
}

std::vector<float> DenseIndex::scores(const EmbeddingVector& query) const {
    if (query.dims() != dims_) {
        throw ArgumentError("query has " + std::to_string(query.dims()) + " dims, index has " +
                            std::to_string(dims_));
    }
    std::vector<float> out(size());
    kernels::omp::inner_product_scores({matrix_, size(), dims_}, query.values, out);
    return out;
}

RankedList<std::string> DenseIndex::search(const EmbeddingVector& query, std::size_t k) const {
    if (k == 0) throw ArgumentError("k must be >= 1");
    const auto s = scores(query);
    RankedList<std::string> out;
    for (std::size_t pos : select_top_k<float>(s, k)) out.items.push_back({item_ids_[pos], s[pos]});
    return out;
}

}  // namespace grounder
