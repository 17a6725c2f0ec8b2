#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace grounder {

inline constexpr std::size_t kDefaultHashDims = std::size_t{1} << 18;
inline constexpr int kDefaultNgramMax = 2;

// Sparse count vector in a hashed feature space of `dims` slots.
// Entries are sorted by index and never hold zero counts.
struct SparseVector {
    std::size_t dims = 0;
    std::vector<std::pair<std::uint32_t, double>> entries;

    double total() const;
    bool empty() const { return entries.empty(); }

    friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

struct FeatureConfig {
    std::size_t hash_dims = kDefaultHashDims;
    int ngram_max = kDefaultNgramMax;

    // Throws ArgumentError unless hash_dims is a power of two >= 2 and ngram_max in 1..3.
    void validate() const;

    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Lowercases and splits on whitespace and punctuation. Handles UTF-8; case
// folding covers ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
std::vector<std::string> tokenize(std::string_view text);

// Hashes every n-gram (n = 1..ngram_max, joined with "_") into `dims` slots.
SparseVector hash_features(std::span<const std::string> tokens, std::size_t dims, int ngram_max);
SparseVector hash_features(std::span<const std::string> tokens, const FeatureConfig& config);

std::uint32_t feature_index(std::string_view feature, std::size_t dims);

class StopwordList {
public:
    // Throws ArgumentError if empty or if any word is not lowercase.
    explicit StopwordList(std::unordered_set<std::string> words);
    StopwordList(std::initializer_list<std::string> words);

    // One word per line; blank lines and lines starting with '#' ignored.
    static StopwordList load(const std::filesystem::path& path);

    bool contains(std::string_view lowercase_word) const {
        return words_.contains(std::string(lowercase_word));
    }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

// Drops whitespace-delimited tokens whose lowercase form (surrounding
// punctuation ignored) is a stopword. Punctuation-only tokens survive.
std::string remove_stopwords(std::string_view text, const StopwordList& stopwords);

std::string to_lower(std::string_view text);

}  // namespace grounder
