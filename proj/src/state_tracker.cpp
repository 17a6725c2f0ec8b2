#include "grounder/state_tracker.hpp"

#include "grounder/error.hpp"
#include "grounder/kernels.hpp"

namespace grounder {

std::string history_text(const DialogueHistory& history, std::size_t max_turns) {
    const std::size_t n = history.turns.size();
    const std::size_t first = (max_turns == 0 || max_turns >= n) ? 0 : n - max_turns;
    std::string out;
    for (std::size_t i = first; i < n; ++i) {
        const auto& [q, r] = history.turns[i];
        out += "Q: " + q + " A: " + r + " ";
    }
    out += "Q: " + history.current_query;
    return out;
}

std::vector<EmbeddingVector> embed_cells(const DualEncoder& encoder, const TableDocument& table) {
    std::vector<std::string> texts;
    texts.reserve(table.cell_count());
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t c = 0; c < table.col_count(); ++c) texts.push_back(linearize_cell(table, r, c));
    }
    return encoder.encode_batch(EncoderVariant::knowledge, texts);
}

RankedList<CellRef> rank_cells_by_embedding(const EmbeddingVector& anchor, const TableDocument& table,
                                            std::span<const EmbeddingVector> cell_embeddings, std::size_t k) {
    if (table.cell_count() == 0) throw ArgumentError("table '" + table.table_id + "' has no cells");
    if (cell_embeddings.size() != table.cell_count()) throw ArgumentError("one embedding per cell required");
    if (k == 0) throw ArgumentError("k must be >= 1");
    const std::size_t d = anchor.dims();

    std::vector<float> matrix;
    matrix.reserve(cell_embeddings.size() * d);
    for (const auto& e : cell_embeddings) {
        if (e.dims() != d) throw ArgumentError("cell embedding dimension mismatch");
        matrix.insert(matrix.end(), e.values.begin(), e.values.end());
    }
    const std::vector<double> query(anchor.values.begin(), anchor.values.end());
    std::vector<double> distances(cell_embeddings.size());
    kernels::omp::l2_distances({matrix, cell_embeddings.size(), d}, query, distances);

    std::vector<double> scores(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i) scores[i] = -distances[i];

    RankedList<CellRef> out;
    const std::size_t cols = table.col_count();
    for (std::size_t pos : select_top_k<double>(scores, k)) {
        out.items.push_back({CellRef{table.table_id, pos / cols, pos % cols}, scores[pos]});
    }
    return out;
}

RankedList<CellRef> rank_cells(const DualEncoder& encoder, const TableDocument& table,
                               const DialogueHistory& history, std::size_t k, std::size_t max_turns) {
    if (history.current_query.empty()) throw ArgumentError("current query is empty");
    if (table.cell_count() == 0) throw ArgumentError("table '" + table.table_id + "' has no cells");
    const auto anchor = encoder.encode_query(history_text(history, max_turns));
    const auto cells = embed_cells(encoder, table);
    return rank_cells_by_embedding(anchor, table, cells, k);
}

}  // namespace grounder
