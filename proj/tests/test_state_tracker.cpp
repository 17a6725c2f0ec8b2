#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "grounder/error.hpp"
#include "grounder/optimizer.hpp"
#include "grounder/state_tracker.hpp"
#include "support.hpp"

using namespace grounder;

namespace {

const FeatureConfig kFeatures{2048, 2};

DialogueHistory history_with(std::vector<std::pair<std::string, std::string>> turns, std::string query) {
    return {std::move(turns), std::move(query)};
}

}  // namespace

TEST(HistoryText, SpecExamples) {
    EXPECT_EQ(history_text(history_with({}, "Who won?")), "Q: Who won?");
    EXPECT_EQ(history_text(history_with({{"q1", "r1"}}, "q2")), "Q: q1 A: r1 Q: q2");
    const auto five = history_with({{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "4"}, {"e", "5"}}, "f");
    EXPECT_EQ(history_text(five, 2), "Q: d A: 4 Q: e A: 5 Q: f");
    EXPECT_EQ(history_text(five, 0), "Q: a A: 1 Q: b A: 2 Q: c A: 3 Q: d A: 4 Q: e A: 5 Q: f");
    EXPECT_EQ(history_text(five, 9), history_text(five, 0));
}

TEST(RankCells, SingleCellTableAlwaysFirst) {
    const auto model = DualEncoder::random(kFeatures, 8, 1);
    const auto t = test::make_table("t", "T", {"Team"}, {{"EB/Streymur"}});
    for (const char* q : {"who", "completely unrelated words", "Team"}) {
        const auto r = rank_cells(model, t, history_with({}, q), 3);
        ASSERT_EQ(r.size(), 1u);
        EXPECT_EQ(r[0].id, (CellRef{"t", 0, 0}));
    }
}

TEST(RankCells, AnchorEqualToCellEmbeddingRanksItFirstAtDistanceZero) {
    const auto model = DualEncoder::random(kFeatures, 8, 2);
    Rng rng(3);
    const auto t = test::random_table(rng, "t", 3, 3);
    const auto cells = embed_cells(model, t);
    const auto r = rank_cells_by_embedding(cells[4], t, cells, 9);
    EXPECT_EQ(r[0].score, 0.0);
    // Another cell may share the embedding exactly; then the earlier one wins.
    const auto first_equal =
        static_cast<std::size_t>(std::find(cells.begin(), cells.end(), cells[4]) - cells.begin());
    EXPECT_EQ(r[0].id, (CellRef{"t", first_equal / 3, first_equal % 3}));
}

TEST(RankCells, MatchesBruteForceDistanceSort) {
    Rng rng(41);
    const auto model = DualEncoder::random(kFeatures, 8, 4);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t rows = 1 + rng.below(5), cols = 1 + rng.below(4);
        const auto t = test::random_table(rng, "t", rows, cols);
        const auto history = history_with({{test::random_text(rng, 1, 4), test::random_text(rng, 1, 4)}},
                                          test::random_text(rng, 1, 5));
        const auto anchor = model.encode_query(history_text(history));
        std::vector<double> dist;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const auto e = model.encode_knowledge(linearize_cell(t, r, c));
                double s = 0;
                for (std::size_t j = 0; j < e.dims(); ++j) {
                    const double diff = static_cast<double>(e.values[j]) - anchor.values[j];
                    s += diff * diff;
                }
                dist.push_back(std::sqrt(s));
            }
        }
        std::vector<std::size_t> order(dist.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
        const std::size_t k = 1 + rng.below(rows * cols + 2);
        const auto got = rank_cells(model, t, history, k);
        ASSERT_EQ(got.size(), std::min(k, rows * cols));
        for (std::size_t i = 0; i < got.size(); ++i) {
            ASSERT_EQ(got[i].id, (CellRef{"t", order[i] / cols, order[i] % cols})) << "trial " << trial;
            ASSERT_EQ(got[i].score, -dist[order[i]]);
        }
    }
}

TEST(RankCells, Properties) {
    Rng rng(42);
    const auto model = DualEncoder::random(kFeatures, 8, 5);
    for (int trial = 0; trial < 100; ++trial) {
        auto t = test::random_table(rng, "orig", 4, 3);
        const auto h = history_with({}, test::random_text(rng, 1, 4));
        const auto r = rank_cells(model, t, h, 5);
        std::set<std::pair<std::size_t, std::size_t>> distinct;
        const auto anchor = model.encode_query(history_text(h));
        double prev = -1;
        for (const auto& item : r) {
            distinct.insert({item.id.row, item.id.col});
            const double d = l2_distance(anchor, model.encode_knowledge(linearize_cell(t, item.id)));
            EXPECT_GE(d, prev);
            prev = d;
        }
        EXPECT_EQ(distinct.size(), r.size());

        // Relabeling the table id changes nothing but the ids.
        t.table_id = "relabeled";
        const auto r2 = rank_cells(model, t, h, 5);
        for (std::size_t i = 0; i < r.size(); ++i) {
            EXPECT_EQ(r2[i].id.row, r[i].id.row);
            EXPECT_EQ(r2[i].id.col, r[i].id.col);
            EXPECT_EQ(r2[i].id.table_id, "relabeled");
        }
    }
}

TEST(RankCells, DistanceOrderingMatchesCosineOrderingOnUnitVectors) {
    Rng rng(43);
    const auto model = DualEncoder::random(kFeatures, 16, 6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = test::random_table(rng, "t", 4, 3);
        const auto h = history_with({}, test::random_text(rng, 1, 4));
        const auto anchor = model.encode_query(history_text(h));
        const auto r = rank_cells(model, t, h, 12);
        for (std::size_t i = 1; i < r.size(); ++i) {
            const double c_prev = similarity(anchor, model.encode_knowledge(linearize_cell(t, r[i - 1].id)));
            const double c_here = similarity(anchor, model.encode_knowledge(linearize_cell(t, r[i].id)));
            EXPECT_GE(c_prev, c_here - 1e-6);  // d^2 = 2 - 2 cos up to float rounding
        }
    }
}

TEST(RankCells, Errors) {
    const auto model = DualEncoder::random(kFeatures, 8, 1);
    const auto t = test::make_table("t", "T", {"a"}, {{"1"}});
    EXPECT_THROW(rank_cells(model, t, history_with({}, ""), 1), ArgumentError);
    EXPECT_THROW(rank_cells(model, t, history_with({}, "q"), 0), ArgumentError);
    const auto empty = test::make_table("e", "E", {"a"}, {});
    EXPECT_THROW(rank_cells(model, empty, history_with({}, "q"), 1), ArgumentError);
}
