#include "grounder/text_features.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "grounder/error.hpp"
#include "grounder/hash.hpp"

namespace grounder {

namespace {

// Decodes one code point starting at text[i]; advances i. Malformed bytes
// decode as themselves so the tokenizer never drops input.
char32_t next_code_point(std::string_view text, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    auto continuation = [&](std::size_t k) -> int {
        if (i + k >= text.size()) return -1;
        const auto b = static_cast<unsigned char>(text[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    }
    for (int k = 1; k < len; ++k) {
        const int c = continuation(static_cast<std::size_t>(k));
        if (c < 0) {
            len = 0;
            break;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    if (len == 0) {
        ++i;
        return 0xFFFD;
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_space(char32_t c) {
    return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200B) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
           c == 0x205F || c == 0x3000 || c == 0xFEFF;
}

bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
               (c >= 0x7B && c <= 0x7E) || c < 0x20 || c == 0x7F;
    }
    if (c >= 0xA1 && c <= 0xBF) {
        // ordinal indicators, micro sign, superscripts and vulgar fractions are word characters
        return !(c == 0xAA || c == 0xB5 || c == 0xBA || c == 0xB2 || c == 0xB3 || c == 0xB9 ||
                 (c >= 0xBC && c <= 0xBE));
    }
    return c == 0xD7 || c == 0xF7 || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
           (c >= 0x20A0 && c <= 0x20CF) || (c >= 0x3001 && c <= 0x303F) ||
           (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || c == 0xFFFD;
}

char32_t fold_case(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 0x20;
    if (c < 0xC0) return c;
    if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
    if (c >= 0x100 && c <= 0x17F) {
        if (c == 0x130) return 'i';
        if (c == 0x178) return 0xFF;
        const bool odd_upper = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
        const bool even_upper = (c <= 0x137) || (c >= 0x14A && c <= 0x177);
        if (odd_upper && (c & 1)) return c + 1;
        if (even_upper && !(c & 1)) return c + 1;
        return c;
    }
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
    if (c == 0x386) return 0x3AC;
    if (c >= 0x388 && c <= 0x38A) return c + 0x25;
    if (c == 0x38C) return 0x3CC;
    if (c == 0x38E || c == 0x38F) return c + 0x3F;
    if (c >= 0x410 && c <= 0x42F) return c + 0x20;
    if (c >= 0x400 && c <= 0x40F) return c + 0x50;
    return c;
}

bool is_punct_only(std::string_view token) {
    std::size_t i = 0;
    while (i < token.size()) {
        if (!is_punct(next_code_point(token, i))) return false;
    }
    return true;
}

// Lowercase core of a whitespace token with leading/trailing punctuation cut.
std::string match_key(std::string_view token) {
    std::vector<char32_t> cps;
    for (std::size_t i = 0; i < token.size();) cps.push_back(next_code_point(token, i));
    auto first = std::find_if_not(cps.begin(), cps.end(), is_punct);
    auto last = std::find_if_not(cps.rbegin(), std::make_reverse_iterator(first), is_punct).base();
    std::string key;
    for (auto it = first; it != last; ++it) append_utf8(key, fold_case(*it));
    return key;
}

}  // namespace

double SparseVector::total() const {
    double sum = 0.0;
    for (const auto& [_, count] : entries) sum += count;
    return sum;
}

void FeatureConfig::validate() const {
    if (hash_dims < 2 || (hash_dims & (hash_dims - 1)) != 0 || hash_dims > (std::size_t{1} << 31)) {
        throw ArgumentError("hash dims must be a power of two in [2, 2^31], got " +
                            std::to_string(hash_dims));
    }
    if (ngram_max < 1 || ngram_max > 3) {
        throw ArgumentError("ngram_max must be 1, 2 or 3, got " + std::to_string(ngram_max));
    }
}

std::string to_lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) append_utf8(out, fold_case(next_code_point(text, i)));
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (std::size_t i = 0; i < text.size();) {
        const char32_t cp = next_code_point(text, i);
        if (is_space(cp) || is_punct(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            append_utf8(current, fold_case(cp));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::uint32_t feature_index(std::string_view feature, std::size_t dims) {
    return static_cast<std::uint32_t>(fnv1a64(feature) & (dims - 1));
}

SparseVector hash_features(std::span<const std::string> tokens, std::size_t dims, int ngram_max) {
    FeatureConfig{dims, ngram_max}.validate();
    std::map<std::uint32_t, double> counts;
    std::string gram;
    for (std::size_t start = 0; start < tokens.size(); ++start) {
        gram.clear();
        for (int n = 1; n <= ngram_max && start + static_cast<std::size_t>(n) <= tokens.size(); ++n) {
            if (n > 1) gram += '_';
            gram += tokens[start + static_cast<std::size_t>(n) - 1];
            counts[feature_index(gram, dims)] += 1.0;
        }
    }
    SparseVector out{dims, {}};
    out.entries.assign(counts.begin(), counts.end());
    return out;
}

SparseVector hash_features(std::span<const std::string> tokens, const FeatureConfig& config) {
    return hash_features(tokens, config.hash_dims, config.ngram_max);
}

StopwordList::StopwordList(std::unordered_set<std::string> words) : words_(std::move(words)) {
    if (words_.empty()) throw ArgumentError("stopword list is empty");
    for (const auto& w : words_) {
        if (to_lower(w) != w) throw ArgumentError("stopword '" + w + "' is not lowercase");
    }
}

StopwordList::StopwordList(std::initializer_list<std::string> words)
    : StopwordList(std::unordered_set<std::string>(words)) {}

StopwordList StopwordList::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stopword list: " + path.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        words.insert(line);
    }
    try {
        return StopwordList(std::move(words));
    } catch (const ArgumentError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string remove_stopwords(std::string_view text, const StopwordList& stopwords) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        while (start < text.size()) {
            std::size_t probe = start;
            if (!is_space(next_code_point(text, probe))) break;
            start = probe;
        }
        if (start >= text.size()) break;
        std::size_t end = start;
        while (end < text.size()) {
            std::size_t probe = end;
            if (is_space(next_code_point(text, probe))) break;
            end = probe;
        }
        const auto token = text.substr(start, end - start);
        i = end;
        if (!is_punct_only(token) && stopwords.contains(match_key(token))) continue;
        if (!out.empty()) out += ' ';
        out += token;
    }
    return out;
}

}  // namespace grounder
