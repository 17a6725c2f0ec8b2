#include <gtest/gtest.h>

#include <cmath>

#include "grounder/error.hpp"
#include "grounder/synthetic.hpp"
#include "grounder/training.hpp"
#include "support.hpp"

using namespace grounder;

namespace {

TrainConfig small_config() {
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 8;
    c.lr_peak = 1e-2;
    c.warmup_steps = 2;
    c.hash_dims = 4096;
    c.dims = 16;
    c.seed = 5;
    return c;
}

struct SmallData {
    SyntheticData data;
    Corpus corpus;
};

const SmallData& small_data() {
    static const SmallData d = [] {
        SyntheticConfig sc;
        sc.topics = 2;
        sc.cities = 4;
        auto data = generate_synthetic(sc);
        Corpus corpus(data.tables);
        return SmallData{std::move(data), std::move(corpus)};
    }();
    return d;
}

}  // namespace

TEST(TrainRetriever, LossDecreasesOnSeparableTopics) {
    const auto& d = small_data();
    auto config = small_config();
    config.epochs = 8;
    std::vector<double> seen;
    const auto r = train_retriever(initial_model(config), d.data.retrieval_train, d.corpus, config,
                                   [&](std::size_t, double loss) { seen.push_back(loss); });
    ASSERT_EQ(r.epoch_losses.size(), 8u);
    EXPECT_EQ(seen, r.epoch_losses);
    EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front());
    EXPECT_EQ(r.examples, d.data.retrieval_train.size());
}

TEST(TrainRetriever, ZeroLearningRateLeavesParametersUnchanged) {
    const auto& d = small_data();
    auto config = small_config();
    config.lr_peak = 0.0;
    const auto init = initial_model(config);
    EXPECT_EQ(train_retriever(init, d.data.retrieval_train, d.corpus, config).model, init);
}

TEST(TrainRetriever, IdenticalPairsKeepLossAtLogB) {
    const auto& d = small_data();
    auto config = small_config();
    config.batch_size = 4;
    config.epochs = 2;
    const std::vector<RetrievalPair> same(8, {"soccer sides", d.corpus[0].table_id});
    const auto r = train_retriever(initial_model(config), same, d.corpus, config);
    for (double loss : r.epoch_losses) EXPECT_NEAR(loss, std::log(4.0), 1e-9);
}

TEST(TrainRetriever, DeterministicForSeed) {
    const auto& d = small_data();
    const auto config = small_config();
    const auto a = train_retriever(initial_model(config), d.data.retrieval_train, d.corpus, config);
    const auto b = train_retriever(initial_model(config), d.data.retrieval_train, d.corpus, config);
    EXPECT_EQ(a.model.serialize(), b.model.serialize());
    EXPECT_EQ(a.epoch_losses, b.epoch_losses);
    auto other = config;
    other.seed = 6;
    EXPECT_NE(train_retriever(initial_model(other), d.data.retrieval_train, d.corpus, other).model.fingerprint(),
              a.model.fingerprint());
}

TEST(TrainRetriever, Errors) {
    const auto& d = small_data();
    const auto config = small_config();
    const std::vector<RetrievalPair> one{{"q", d.corpus[0].table_id}};
    EXPECT_THROW(train_retriever(initial_model(config), one, d.corpus, config), ArgumentError);
    const std::vector<RetrievalPair> unknown{{"q", "nope"}, {"r", "nope"}};
    EXPECT_THROW(train_retriever(initial_model(config), unknown, d.corpus, config), DataError);
}

TEST(TrainRanker, LossDecreasesAndIsDeterministic) {
    const auto& d = small_data();
    auto config = small_config();
    config.epochs = 6;
    const auto a = train_ranker(initial_model(config), d.data.dialogues_train, d.corpus, config);
    EXPECT_LT(a.epoch_losses.back(), a.epoch_losses.front());
    EXPECT_EQ(a.skipped_turns, 0u);
    EXPECT_EQ(a.examples, d.data.dialogues_train.size() * 3);
    const auto b = train_ranker(initial_model(config), d.data.dialogues_train, d.corpus, config);
    EXPECT_EQ(a.model.serialize(), b.model.serialize());
}

TEST(TrainRanker, ZeroLearningRateLeavesParametersUnchanged) {
    const auto& d = small_data();
    auto config = small_config();
    config.lr_peak = 0.0;
    const auto init = initial_model(config);
    EXPECT_EQ(train_ranker(init, d.data.dialogues_train, d.corpus, config).model, init);
}

TEST(TrainRanker, AllCellsGoldMeansNoTrainableTurns) {
    const auto t = test::make_table("t", "T", {"a"}, {{"1"}, {"2"}});
    const Corpus corpus({t});
    const std::vector<DialogueRecord> dialogues{
        {"d", "t", {{"q1", "r1", {}}, {"q2", "r2", {{"t", 0, 0}, {"t", 1, 0}}}}}};
    const auto config = small_config();
    const auto init = initial_model(config);
    const auto r = train_ranker(init, dialogues, corpus, config);
    EXPECT_EQ(r.examples, 0u);
    EXPECT_EQ(r.skipped_turns, 1u);
    EXPECT_EQ(r.model, init);

    const std::vector<DialogueRecord> bad{{"d", "t", {{"q", "r", {{"t", 5, 0}}}}}};
    EXPECT_THROW(train_ranker(init, bad, corpus, config), DataError);
}

TEST(TrainConfigJson, ParsesValidatesAndRejectsUnknownKeys) {
    const auto c = TrainConfig::from_json(
        {{"epochs", 3}, {"batch_size", 16}, {"lr_peak", 1e-3}, {"d", 32}, {"V", 1024}, {"margin", 0.5}});
    EXPECT_EQ(c.epochs, 3u);
    EXPECT_EQ(c.dims, 32u);
    EXPECT_EQ(c.hash_dims, 1024u);
    EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
    EXPECT_THROW(TrainConfig::from_json({{"epoch", 3}}), ArgumentError);
    EXPECT_THROW(TrainConfig::from_json({{"batch_size", 1}}), ArgumentError);
    EXPECT_THROW(TrainConfig::from_json({{"V", 1000}}), ArgumentError);
    EXPECT_THROW(TrainConfig::from_json({{"margin", 0}}), ArgumentError);
    EXPECT_THROW(TrainConfig::from_json({{"epochs", "three"}}), ArgumentError);
}

TEST(RetrievalPairs, LoadAndFirstTurns) {
    test::TempDir dir;
    test::write_text(dir / "p.jsonl", R"({"query":"a","gold_id":"t1"})"
                                      "\n\n"
                                      R"({"query":"b","gold_id":"t2"})"
                                      "\n");
    const auto pairs = load_retrieval_pairs(dir / "p.jsonl");
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_EQ(pairs[1].table_id, "t2");
    test::write_text(dir / "bad.jsonl", R"({"query":"a","gold_id":"t1"})"
                                        "\n"
                                        R"({"query":"a"})"
                                        "\n");
    try {
        load_retrieval_pairs(dir / "bad.jsonl");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }

    const std::vector<DialogueRecord> ds{{"d", "t9", {{"first", "r", {}}, {"second", "r", {}}}}};
    const auto first = first_turn_pairs(ds);
    ASSERT_EQ(first.size(), 1u);
    EXPECT_EQ(first[0].query, "first");
    EXPECT_EQ(first[0].table_id, "t9");
}
