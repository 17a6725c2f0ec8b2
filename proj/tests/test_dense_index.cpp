#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "grounder/dense_index.hpp"
#include "grounder/error.hpp"
#include "support.hpp"

using namespace grounder;

namespace {

std::vector<std::string> ids_of(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("item" + std::to_string(i));
    return ids;
}

// Values on a coarse grid so that distinct rows often tie exactly.
float grid_value(Rng& rng) { return static_cast<float>(static_cast<int>(rng.below(5)) - 2) * 0.25f; }

}  // namespace

TEST(DenseIndex, OrthonormalExample) {
    const DenseIndex idx(ids_of(3), 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, "fp");
    const auto r = idx.search(EmbeddingVector{{0, 1, 0}}, 1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].id, "item1");
    EXPECT_EQ(r[0].score, 1.0);
    EXPECT_EQ(idx.search(EmbeddingVector{{0, 1, 0}}, 10).size(), 3u);
    EXPECT_THROW(idx.search(EmbeddingVector{{0, 1}}, 1), ArgumentError);
    EXPECT_THROW(idx.search(EmbeddingVector{{0, 1, 0}}, 0), ArgumentError);
}

TEST(DenseIndex, MatchesBruteForceOracle) {
    Rng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(100), d = 1 + rng.below(16);
        std::vector<float> m(n * d);
        for (auto& v : m) v = grid_value(rng);
        EmbeddingVector q;
        for (std::size_t j = 0; j < d; ++j) q.values.push_back(grid_value(rng));
        const DenseIndex idx(ids_of(n), d, m, "fp");

        std::vector<float> oracle(n);
        for (std::size_t i = 0; i < n; ++i) {
            float acc = 0.0f;
            for (std::size_t j = 0; j < d; ++j) acc += m[i * d + j] * q.values[j];
            oracle[i] = acc;
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return oracle[a] > oracle[b]; });
        const std::size_t k = 1 + rng.below(n + 3);
        const auto got = idx.search(q, k);
        ASSERT_EQ(got.size(), std::min(k, n));
        for (std::size_t r = 0; r < got.size(); ++r) {
            ASSERT_EQ(got[r].id, "item" + std::to_string(order[r])) << "trial " << trial;
            ASSERT_EQ(got[r].score, oracle[order[r]]);
        }
    }
}

TEST(DenseIndex, FullSearchIsPermutationWithNonIncreasingScores) {
    Rng rng(32);
    const std::size_t n = 60, d = 8;
    std::vector<float> m(n * d);
    for (auto& v : m) v = static_cast<float>(rng.uniform(-1, 1));
    const DenseIndex idx(ids_of(n), d, m, "fp");
    EmbeddingVector q;
    for (std::size_t j = 0; j < d; ++j) q.values.push_back(static_cast<float>(rng.uniform(-1, 1)));
    const auto r = idx.search(q, n);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < r.size(); ++i) {
        ids.push_back(r[i].id);
        if (i) EXPECT_GE(r[i - 1].score, r[i].score);
    }
    std::sort(ids.begin(), ids.end());
    auto expected = ids_of(n);
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(ids, expected);
}

TEST(DenseIndex, BuildFromModel) {
    Rng rng(33);
    std::vector<TableDocument> tables;
    for (int i = 0; i < 3; ++i) tables.push_back(test::random_table(rng, "t" + std::to_string(i), 2, 2));
    tables[2].page_title = tables[0].page_title;  // same linearized content
    const Corpus corpus(tables);
    const auto model = DualEncoder::random({1024, 2}, 8, 1);
    const auto idx = DenseIndex::build(model, corpus);
    EXPECT_EQ(idx.size(), 3u);
    EXPECT_EQ(idx.dims(), 8u);
    EXPECT_EQ(idx.fingerprint(), model.fingerprint());
    const auto again = DenseIndex::build(model, corpus);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_TRUE(std::ranges::equal(idx.row(i), again.row(i)));
    }
    EXPECT_TRUE(std::ranges::equal(idx.row(0), idx.row(2)));
    const auto e = model.encode_knowledge(linearize_table(tables[1]));
    EXPECT_TRUE(std::ranges::equal(idx.row(1), e.values));
    EXPECT_THROW(DenseIndex::build(model, Corpus{}), ArgumentError);
}

TEST(DenseIndex, SidecarOverridesEncoder) {
    Rng rng(34);
    const Corpus corpus({test::random_table(rng, "a", 1, 1), test::random_table(rng, "b", 1, 1)});
    const auto model = DualEncoder::random({1024, 2}, 4, 1);
    std::unordered_map<std::string, EmbeddingVector> sidecar{{"b", {{0, 0, 1, 0}}}};
    const auto idx = DenseIndex::build(model, corpus, &sidecar);
    EXPECT_TRUE(std::ranges::equal(idx.row(1), sidecar["b"].values));
    EXPECT_EQ(idx.search(EmbeddingVector{{0, 0, 1, 0}}, 1)[0].id, "b");
    sidecar["b"] = EmbeddingVector{{1, 0}};
    EXPECT_THROW(DenseIndex::build(model, corpus, &sidecar), DataError);
}

TEST(DenseIndex, SaveLoadFingerprintAndCorruption) {
    Rng rng(35);
    std::vector<float> m(20 * 6);
    for (auto& v : m) v = static_cast<float>(rng.uniform(-1, 1));
    const DenseIndex idx(ids_of(20), 6, m, "aaaa");
    test::TempDir dir;
    idx.save(dir / "i.gdix");
    const auto back = DenseIndex::load(dir / "i.gdix", "aaaa");
    EXPECT_EQ(back.item_ids(), idx.item_ids());
    const EmbeddingVector q{{1, 0, 0, 0, 0, 0}};
    const auto r1 = idx.search(q, 20), r2 = back.search(q, 20);
    for (std::size_t i = 0; i < 20; ++i) {
        EXPECT_EQ(r1[i].id, r2[i].id);
        EXPECT_EQ(r1[i].score, r2[i].score);
    }

    try {
        DenseIndex::load(dir / "i.gdix", "bbbb");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("--force"), std::string::npos);
    }
    EXPECT_EQ(DenseIndex::load(dir / "i.gdix", "bbbb", true).fingerprint(), "aaaa");

    auto bytes = test::read_text(dir / "i.gdix");
    test::write_text(dir / "t.gdix", bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(DenseIndex::load(dir / "t.gdix"), DataError);
    bytes[0] = 'Q';
    test::write_text(dir / "m.gdix", bytes);
    EXPECT_THROW(DenseIndex::load(dir / "m.gdix"), VersionError);
}
