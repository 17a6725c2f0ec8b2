#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grounder/corpus.hpp"
#include "grounder/dual_encoder.hpp"
#include "grounder/ranked_list.hpp"

namespace grounder {

struct DialogueHistory {
    std::vector<std::pair<std::string, std::string>> turns;  // (query, response), oldest first
    std::string current_query;
};

// "Q: q1 A: r1 Q: q2 A: r2 Q: current", keeping only the most recent
// max_turns prior turns (0 keeps all).
std::string history_text(const DialogueHistory& history, std::size_t max_turns = 0);

// Ranks every cell of `table` by ascending Euclidean distance between the
// encoded history (query encoder) and the encoded cell (knowledge encoder).
// Scores are negative distances; ties keep row-major order. Returns
// min(k, cell count) cells. Throws ArgumentError on an empty table or query.
RankedList<CellRef> rank_cells(const DualEncoder& encoder, const TableDocument& table,
                               const DialogueHistory& history, std::size_t k, std::size_t max_turns = 0);

// Ranking core on precomputed embeddings; cell_embeddings is row-major over the table.
RankedList<CellRef> rank_cells_by_embedding(const EmbeddingVector& anchor, const TableDocument& table,
                                            std::span<const EmbeddingVector> cell_embeddings, std::size_t k);

// Row-major knowledge embeddings of every cell.
std::vector<EmbeddingVector> embed_cells(const DualEncoder& encoder, const TableDocument& table);

}  // namespace grounder
