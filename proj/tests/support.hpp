#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "grounder/corpus.hpp"
#include "grounder/rng.hpp"

namespace grounder::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string pattern = (std::filesystem::temp_directory_path() / "grounder-test-XXXXXX").string();
        if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline TableDocument make_table(std::string id, std::string title, std::vector<std::string> headers,
                                const std::vector<std::vector<std::string>>& values) {
    TableDocument t;
    t.table_id = std::move(id);
    t.page_title = std::move(title);
    t.headers = std::move(headers);
    for (const auto& row : values) {
        std::vector<Cell> cells;
        for (const auto& v : row) cells.push_back({v, ""});
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline const std::vector<std::string>& small_vocabulary() {
    static const std::vector<std::string> words = {"red", "blue", "green", "river", "stone", "harbor", "north",
                                                   "south", "tower", "field", "club", "league", "1990", "2004"};
    return words;
}

// Random space-separated text drawn from a tiny vocabulary so terms repeat.
inline std::string random_text(Rng& rng, std::size_t min_words, std::size_t max_words) {
    const auto& words = small_vocabulary();
    const std::size_t n = min_words + rng.below(max_words - min_words + 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += words[rng.below(words.size())];
    }
    return out;
}

// Random rows x cols table; cells repeat often enough to create exact ties.
inline TableDocument random_table(Rng& rng, const std::string& id, std::size_t rows, std::size_t cols) {
    TableDocument t;
    t.table_id = id;
    t.page_title = random_text(rng, 1, 4);
    for (std::size_t c = 0; c < cols; ++c) t.headers.push_back(small_vocabulary()[rng.below(4)]);
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<Cell> row;
        for (std::size_t c = 0; c < cols; ++c) {
            row.push_back({random_text(rng, 1, 2), rng.below(3) == 0 ? random_text(rng, 1, 3) : ""});
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace grounder::test
