#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace grounder {

struct Cell {
    std::string value;
    std::string linked_text;  // hyperlinked passage, may be empty

    friend bool operator==(const Cell&, const Cell&) = default;
};

struct CellRef {
    std::string table_id;
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const CellRef&, const CellRef&) = default;
};

// Retrieval unit: one table plus the page/section text that surrounds it.
struct TableDocument {
    std::string table_id;
    std::string page_title;
    std::string page_intro;
    std::string section_title;
    std::string section_intro;
    std::vector<std::string> headers;
    std::vector<std::vector<Cell>> rows;

    std::size_t row_count() const { return rows.size(); }
    std::size_t col_count() const { return headers.size(); }
    std::size_t cell_count() const { return rows.size() * headers.size(); }

    // Throws DataError if the grid is ragged or headers are missing.
    void validate() const;

    friend bool operator==(const TableDocument&, const TableDocument&) = default;
};

struct Turn {
    std::string query;
    std::string response;
    std::vector<CellRef> gold_cells;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct DialogueRecord {
    std::string dialogue_id;
    std::string gold_table_id;
    std::vector<Turn> turns;

    friend bool operator==(const DialogueRecord&, const DialogueRecord&) = default;
};

// Immutable table collection with id lookup.
class Corpus {
public:
    Corpus() = default;
    // Throws DataError on duplicate ids or invalid tables.
    explicit Corpus(std::vector<TableDocument> tables);

    std::span<const TableDocument> tables() const { return tables_; }
    std::size_t size() const { return tables_.size(); }
    bool empty() const { return tables_.empty(); }
    const TableDocument& operator[](std::size_t i) const { return tables_[i]; }

    std::optional<std::size_t> position(std::string_view table_id) const;
    // Throws NotFoundError.
    const TableDocument& at(std::string_view table_id) const;

private:
    std::vector<TableDocument> tables_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// JSONL ingestion. Errors carry the 1-based line number.
std::vector<TableDocument> load_corpus(const std::filesystem::path& path);
std::vector<DialogueRecord> load_dialogues(const std::filesystem::path& path);

void save_corpus(std::span<const TableDocument> tables, const std::filesystem::path& path);
void save_dialogues(std::span<const DialogueRecord> dialogues, const std::filesystem::path& path);

// "page title | page intro | section title | section intro", empty fields skipped.
std::string linearize_table(const TableDocument& table);

// "[CELL] <header> is <value>" plus " ; <linked text>" when a link exists.
std::string linearize_cell(const TableDocument& table, const CellRef& ref);
std::string linearize_cell(const TableDocument& table, std::size_t row, std::size_t col);

// Row-major enumeration of every cell address in the table.
std::vector<CellRef> all_cells(const TableDocument& table);

nlohmann::json to_json(const TableDocument& table);
nlohmann::json to_json(const DialogueRecord& dialogue);
nlohmann::json to_json(const CellRef& ref);
TableDocument table_from_json(const nlohmann::json& j);
DialogueRecord dialogue_from_json(const nlohmann::json& j);
CellRef cell_ref_from_json(const nlohmann::json& j);

}  // namespace grounder
