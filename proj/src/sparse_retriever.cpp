#include "grounder/sparse_retriever.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "grounder/binary_io.hpp"
#include "grounder/error.hpp"
#include "grounder/text_features.hpp"

namespace grounder {

namespace {

constexpr std::string_view kMagic = "GBM2";
constexpr std::uint8_t kVersion = 1;

}  // namespace

Bm25Index Bm25Index::build(const Corpus& corpus, Bm25Params params) {
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    ids.reserve(corpus.size());
    texts.reserve(corpus.size());
    for (const auto& t : corpus.tables()) {
        ids.push_back(t.table_id);
        texts.push_back(linearize_table(t));
    }
    return build(std::move(ids), texts, params);
}

Bm25Index Bm25Index::build(std::vector<std::string> doc_ids, std::span<const std::string> texts,
                           Bm25Params params) {
    if (doc_ids.empty()) throw ArgumentError("cannot build BM25 index over an empty corpus");
    if (doc_ids.size() != texts.size()) throw ArgumentError("doc id / text count mismatch");

    Bm25Index idx;
    idx.params_ = params;
    idx.doc_ids_ = std::move(doc_ids);
    idx.doc_offsets_.push_back(0);
    std::uint64_t total_len = 0;
    for (const auto& text : texts) {
        const auto tokens = tokenize(text);
        std::map<std::uint32_t, std::uint32_t> counts;
        for (const auto& tok : tokens) {
            auto [it, inserted] = idx.vocab_.try_emplace(tok, static_cast<std::uint32_t>(idx.vocab_.size()));
            if (inserted) {
                idx.df_.push_back(0);
                idx.terms_.push_back(tok);
            }
            ++counts[it->second];
        }
        for (const auto& [term, count] : counts) {
            idx.term_ids_.push_back(term);
            idx.term_freqs_.push_back(count);
            ++idx.df_[term];
        }
        idx.doc_offsets_.push_back(idx.term_ids_.size());
        idx.doc_lens_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_len += tokens.size();
    }
    idx.avgdl_ = static_cast<double>(total_len) / static_cast<double>(idx.doc_ids_.size());
    return idx;
}

std::uint32_t Bm25Index::df(std::string_view token) const {
    auto it = vocab_.find(std::string(token));
    return it == vocab_.end() ? 0 : df_[it->second];
}

std::uint32_t Bm25Index::tf(std::size_t doc_pos, std::string_view token) const {
    auto it = vocab_.find(std::string(token));
    if (it == vocab_.end()) return 0;
    const auto first = term_ids_.begin() + static_cast<std::ptrdiff_t>(doc_offsets_.at(doc_pos));
    const auto last = term_ids_.begin() + static_cast<std::ptrdiff_t>(doc_offsets_.at(doc_pos + 1));
    const auto pos = std::lower_bound(first, last, it->second);
    if (pos == last || *pos != it->second) return 0;
    return term_freqs_[static_cast<std::size_t>(pos - term_ids_.begin())];
}

double Bm25Index::idf(std::string_view token) const {
    const double n = static_cast<double>(doc_ids_.size());
    const double dfv = df(token);
    return std::log(1.0 + (n - dfv + 0.5) / (dfv + 0.5));
}

// Query tokens present in the vocabulary, merged by term id; weight is
// idf times the token's multiplicity in the query. Unseen tokens cannot
// match any document and are dropped.
std::vector<std::pair<std::uint32_t, double>> Bm25Index::query_weights(std::string_view query) const {
    std::map<std::uint32_t, double> weights;
    for (const auto& tok : tokenize(query)) {
        auto it = vocab_.find(tok);
        if (it == vocab_.end()) continue;
        weights[it->second] += idf(tok);
    }
    return {weights.begin(), weights.end()};
}

kernels::PostingsView Bm25Index::postings() const {
    return {doc_offsets_, term_ids_, term_freqs_, doc_lens_, avgdl_, params_.k1, params_.b};
}

double Bm25Index::score(std::string_view query, std::size_t doc_pos) const {
    if (doc_pos >= size()) {
        throw ArgumentError("doc position " + std::to_string(doc_pos) + " out of range (N=" +
                            std::to_string(size()) + ")");
    }
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_lens_[doc_pos] / avgdl_);
    double total = 0.0;
    for (const auto& [term, weight] : query_weights(query)) {
        const double f = tf(doc_pos, terms_[term]);
        if (f == 0.0) continue;
        total += weight * f * (params_.k1 + 1.0) / (f + norm);
    }
    return total;
}

std::vector<double> Bm25Index::score_all(std::string_view query) const {
    std::vector<double> out(size());
    const auto weights = query_weights(query);
    kernels::omp::bm25_scores(postings(), weights, out);
    return out;
}

std::vector<double> Bm25Index::score_all_serial(std::string_view query) const {
    std::vector<double> out(size());
    const auto weights = query_weights(query);
    kernels::serial::bm25_scores(postings(), weights, out);
    return out;
}

RankedList<std::string> Bm25Index::search(std::string_view query, std::size_t k) const {
    if (k == 0) throw ArgumentError("k must be >= 1");
    const auto scores = score_all(query);
    RankedList<std::string> out;
    for (std::size_t pos : select_top_k<double>(scores, k)) out.items.push_back({doc_ids_[pos], scores[pos]});
    return out;
}

// Layout: magic "GBM2", version u8, then four u64-length-prefixed sections:
//   params:   k1 f64, b f64, avgdl f64
//   docs:     n u32, per doc { id str, len u32 }
//   vocab:    n u32, per term (in id order) { token str, df u32 }
//   postings: per doc { n u32, n x { term u32, tf u32 } }
void Bm25Index::save(const std::filesystem::path& path) const {
    io::Writer w;
    w.magic(kMagic);
    w.u8(kVersion);

    io::Writer params;
    params.f64(params_.k1);
    params.f64(params_.b);
    params.f64(avgdl_);
    w.section(params);

    io::Writer docs;
    docs.u32(static_cast<std::uint32_t>(doc_ids_.size()));
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        docs.str(doc_ids_[i]);
        docs.u32(doc_lens_[i]);
    }
    w.section(docs);

    io::Writer vocab;
    vocab.u32(static_cast<std::uint32_t>(terms_.size()));
    for (std::size_t id = 0; id < terms_.size(); ++id) {
        vocab.str(terms_[id]);
        vocab.u32(df_[id]);
    }
    w.section(vocab);

    io::Writer post;
    for (std::size_t doc = 0; doc < doc_ids_.size(); ++doc) {
        post.u32(static_cast<std::uint32_t>(doc_offsets_[doc + 1] - doc_offsets_[doc]));
        for (std::size_t k = doc_offsets_[doc]; k < doc_offsets_[doc + 1]; ++k) {
            post.u32(term_ids_[k]);
            post.u32(term_freqs_[k]);
        }
    }
    w.section(post);
    w.save(path);
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    io::Reader r(bytes, path.string());
    r.expect_magic(kMagic);
    r.expect_version(kVersion);

    Bm25Index idx;
    auto params = r.section();
    idx.params_.k1 = params.f64();
    idx.params_.b = params.f64();
    idx.avgdl_ = params.f64();
    params.expect_end();

    auto docs = r.section();
    const auto n_docs = docs.u32();
    for (std::uint32_t i = 0; i < n_docs; ++i) {
        idx.doc_ids_.push_back(docs.str());
        idx.doc_lens_.push_back(docs.u32());
    }
    docs.expect_end();

    auto vocab = r.section();
    const auto n_terms = vocab.u32();
    for (std::uint32_t id = 0; id < n_terms; ++id) {
        idx.terms_.push_back(vocab.str());
        if (!idx.vocab_.emplace(idx.terms_.back(), id).second) {
            throw DataError(path.string() + ": duplicate vocabulary entry");
        }
        idx.df_.push_back(vocab.u32());
    }
    vocab.expect_end();

    auto post = r.section();
    idx.doc_offsets_.push_back(0);
    for (std::uint32_t doc = 0; doc < n_docs; ++doc) {
        const auto n = post.u32();
        for (std::uint32_t k = 0; k < n; ++k) {
            const auto term = post.u32();
            if (term >= n_terms) throw DataError(path.string() + ": posting term id out of range");
            idx.term_ids_.push_back(term);
            idx.term_freqs_.push_back(post.u32());
        }
        idx.doc_offsets_.push_back(idx.term_ids_.size());
    }
    post.expect_end();
    r.expect_end();
    if (n_docs == 0) throw DataError(path.string() + ": index has no documents");
    return idx;
}

}  // namespace grounder
