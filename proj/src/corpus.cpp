#include "grounder/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include "grounder/error.hpp"

namespace grounder {

using nlohmann::json;

namespace {

std::string optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    return j.at(key).get<std::string>();
}

template <class Fn>
void for_each_jsonl_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(line));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

void TableDocument::validate() const {
    if (table_id.empty()) throw DataError("table_id is empty");
    if (headers.empty()) throw DataError("table '" + table_id + "' has no headers");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != headers.size()) {
            throw DataError("table '" + table_id + "' row " + std::to_string(r) + " has " +
                            std::to_string(rows[r].size()) + " cells, expected " +
                            std::to_string(headers.size()) + " (ragged grid)");
        }
    }
}

Corpus::Corpus(std::vector<TableDocument> tables) : tables_(std::move(tables)) {
    by_id_.reserve(tables_.size());
    for (std::size_t i = 0; i < tables_.size(); ++i) {
        tables_[i].validate();
        if (!by_id_.emplace(tables_[i].table_id, i).second) {
            throw DataError("duplicate table_id '" + tables_[i].table_id + "'");
        }
    }
}

std::optional<std::size_t> Corpus::position(std::string_view table_id) const {
    if (auto it = by_id_.find(std::string(table_id)); it != by_id_.end()) return it->second;
    return std::nullopt;
}

const TableDocument& Corpus::at(std::string_view table_id) const {
    if (auto pos = position(table_id)) return tables_[*pos];
    throw NotFoundError("unknown table '" + std::string(table_id) + "'");
}

json to_json(const CellRef& ref) {
    return {{"table_id", ref.table_id}, {"row", ref.row}, {"col", ref.col}};
}

CellRef cell_ref_from_json(const json& j) {
    const auto row = j.at("row").get<long long>();
    const auto col = j.at("col").get<long long>();
    if (row < 0 || col < 0) throw DataError("negative cell index");
    return {j.at("table_id").get<std::string>(), static_cast<std::size_t>(row),
            static_cast<std::size_t>(col)};
}

json to_json(const TableDocument& t) {
    json rows = json::array();
    for (const auto& row : t.rows) {
        json cells = json::array();
        for (const auto& c : row) cells.push_back({{"value", c.value}, {"linked_text", c.linked_text}});
        rows.push_back(std::move(cells));
    }
    return {{"table_id", t.table_id},         {"page_title", t.page_title},
            {"page_intro", t.page_intro},     {"section_title", t.section_title},
            {"section_intro", t.section_intro}, {"headers", t.headers},
            {"rows", std::move(rows)}};
}

TableDocument table_from_json(const json& j) {
    TableDocument t;
    t.table_id = j.at("table_id").get<std::string>();
    t.page_title = j.at("page_title").get<std::string>();
    t.page_intro = optional_string(j, "page_intro");
    t.section_title = optional_string(j, "section_title");
    t.section_intro = optional_string(j, "section_intro");
    t.headers = j.at("headers").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
        auto& cells = t.rows.emplace_back();
        for (const auto& c : row) {
            cells.push_back({c.at("value").get<std::string>(), optional_string(c, "linked_text")});
        }
    }
    t.validate();
    return t;
}

json to_json(const DialogueRecord& d) {
    json turns = json::array();
    for (const auto& turn : d.turns) {
        json gold = json::array();
        for (const auto& ref : turn.gold_cells) gold.push_back(to_json(ref));
        turns.push_back({{"query", turn.query}, {"response", turn.response}, {"gold_cells", gold}});
    }
    return {{"dialogue_id", d.dialogue_id}, {"gold_table_id", d.gold_table_id}, {"turns", turns}};
}

DialogueRecord dialogue_from_json(const json& j) {
    DialogueRecord d;
    d.dialogue_id = j.at("dialogue_id").get<std::string>();
    d.gold_table_id = j.at("gold_table_id").get<std::string>();
    for (const auto& t : j.at("turns")) {
        Turn turn;
        turn.query = t.at("query").get<std::string>();
        turn.response = optional_string(t, "response");
        if (t.contains("gold_cells")) {
            for (const auto& ref : t.at("gold_cells")) turn.gold_cells.push_back(cell_ref_from_json(ref));
        }
        d.turns.push_back(std::move(turn));
    }
    if (d.turns.empty()) throw DataError("dialogue '" + d.dialogue_id + "' has no turns");
    return d;
}

std::vector<TableDocument> load_corpus(const std::filesystem::path& path) {
    std::vector<TableDocument> tables;
    std::unordered_set<std::string> seen;
    for_each_jsonl_line(path, [&](const json& j) {
        auto t = table_from_json(j);
        if (!seen.insert(t.table_id).second) {
            throw DataError("duplicate table_id '" + t.table_id + "'");
        }
        tables.push_back(std::move(t));
    });
    return tables;
}

std::vector<DialogueRecord> load_dialogues(const std::filesystem::path& path) {
    std::vector<DialogueRecord> out;
    for_each_jsonl_line(path, [&](const json& j) { out.push_back(dialogue_from_json(j)); });
    return out;
}

namespace {

template <class Range>
void write_jsonl(const Range& items, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    for (const auto& item : items) out << to_json(item).dump() << '\n';
}

}  // namespace

void save_corpus(std::span<const TableDocument> tables, const std::filesystem::path& path) {
    write_jsonl(tables, path);
}

void save_dialogues(std::span<const DialogueRecord> dialogues, const std::filesystem::path& path) {
    write_jsonl(dialogues, path);
}

std::string linearize_table(const TableDocument& t) {
    std::string out;
    for (const std::string* field : {&t.page_title, &t.page_intro, &t.section_title, &t.section_intro}) {
        if (field->empty()) continue;
        if (!out.empty()) out += " | ";
        out += *field;
    }
    return out;
}

std::string linearize_cell(const TableDocument& t, std::size_t row, std::size_t col) {
    if (row >= t.row_count() || col >= t.col_count()) {
        throw ArgumentError("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") out of bounds for table '" + t.table_id + "'");
    }
    const Cell& cell = t.rows[row][col];
    std::string out = "[CELL] " + t.headers[col] + " is " + cell.value;
    if (!cell.linked_text.empty()) out += " ; " + cell.linked_text;
    return out;
}

std::string linearize_cell(const TableDocument& t, const CellRef& ref) {
    return linearize_cell(t, ref.row, ref.col);
}

std::vector<CellRef> all_cells(const TableDocument& t) {
    std::vector<CellRef> refs;
    refs.reserve(t.cell_count());
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        for (std::size_t c = 0; c < t.col_count(); ++c) refs.push_back({t.table_id, r, c});
    }
    return refs;
}

}  // namespace grounder
