#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "grounder/cli.hpp"
#include "grounder/synthetic.hpp"
#include "support.hpp"

using namespace grounder;
using nlohmann::json;

namespace {

const std::filesystem::path kSource = GROUNDER_SOURCE_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;

    std::vector<json> lines() const {
        std::vector<json> v;
        std::istringstream s(out);
        for (std::string line; std::getline(s, line);) {
            if (!line.empty()) v.push_back(json::parse(line));
        }
        return v;
    }
};

Run run(std::vector<std::string> args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

// A tiny corpus and fast training settings in a scratch directory.
class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new test::TempDir();
        SyntheticConfig sc;
        sc.topics = 3;
        sc.cities = 4;
        write_synthetic(generate_synthetic(sc), dir_->path() / "data");
        json cfg = {
            {"seed", 3},
            {"paths",
             {{"tables", "data/tables.jsonl"},
              {"retrieval_train", "data/retrieval_train.jsonl"},
              {"retrieval_test", "data/retrieval_test.jsonl"},
              {"dialogues_train", "data/dialogues_train.jsonl"},
              {"dialogues_test", "data/dialogues_test.jsonl"},
              {"stopwords", (kSource / "data/stopwords.txt").string()},
              {"few_shot", (kSource / "data/fewshot.json").string()},
              {"artifacts", "artifacts"}}},
            {"retriever", {{"epochs", 3}, {"batch_size", 8}, {"d", 16}, {"V", 4096}}},
            {"ranker", {{"epochs", 2}, {"batch_size", 8}, {"d", 16}, {"V", 4096}}},
            {"service", {{"data_dir", "var"}}}};
        test::write_text(config(), cfg.dump(2));
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static std::string config() { return (dir_->path() / "grounder.json").string(); }
    static std::vector<std::string> with_config(std::vector<std::string> args) {
        args.insert(args.begin(), {"-c", config()});
        return args;
    }
    static test::TempDir* dir_;
};

test::TempDir* CliPipeline::dir_ = nullptr;

}  // namespace

TEST(Cli, HelpAllMatchesSnapshot) {
    const auto r = run({"--help-all"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, test::read_text(kSource / "docs/cli-help.txt"));
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run({"retrieve"}).code, kExitUsage);  // --query is required
    EXPECT_EQ(run({"retrieve", "--query", "x", "-k", "many"}).code, kExitUsage);
}

TEST(Cli, MissingConfigIsDataError) {
    test::TempDir dir;
    const auto r = run({"-c", (dir / "none.json").string(), "ingest"});
    EXPECT_EQ(r.code, kExitData);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliPipeline, MissingArtifactsNameTheCommand) {
    test::TempDir empty;
    test::write_text(empty / "grounder.json", R"({"paths":{"artifacts":"a"}})");
    const auto r = run({"-c", (empty / "grounder.json").string(), "retrieve", "--query", "x"});
    EXPECT_EQ(r.code, kExitData);
    EXPECT_NE(r.err.find("grounder ingest"), std::string::npos);
}

TEST_F(CliPipeline, EndToEnd) {
    auto ingest = run(with_config({"ingest", "--dialogues", (dir_->path() / "data/dialogues_train.jsonl").string()}));
    ASSERT_EQ(ingest.code, 0) << ingest.err;
    EXPECT_EQ(ingest.lines().front(), (json{{"command", "ingest"}, {"seed", 3}}));

    auto tr = run(with_config({"train-retriever"}));
    ASSERT_EQ(tr.code, 0) << tr.err;
    const auto tr_lines = tr.lines();
    EXPECT_EQ(tr_lines[1]["epoch"], 1);
    EXPECT_TRUE(std::filesystem::exists(dir_->path() / "artifacts/retriever_train_log.jsonl"));

    auto tk = run(with_config({"train-ranker"}));
    ASSERT_EQ(tk.code, 0) << tk.err;
    ASSERT_EQ(run(with_config({"build-index"})).code, 0);

    auto dense = run(with_config({"retrieve", "--query", "football", "-k", "2"}));
    ASSERT_EQ(dense.code, 0) << dense.err;
    const auto result = dense.lines().back();
    EXPECT_EQ(result["retriever"], "dense");
    EXPECT_EQ(result["results"].size(), 2u);
    EXPECT_EQ(result["results"][0]["rank"], 1);

    auto sparse = run(with_config({"retrieve", "--query", "football", "--sparse"}));
    ASSERT_EQ(sparse.code, 0) << sparse.err;
    EXPECT_EQ(sparse.lines().back()["retriever"], "bm25");

    auto er = run(with_config({"eval-retrieval", "--format", "json"}));
    ASSERT_EQ(er.code, 0) << er.err;
    const auto er_lines = er.lines();
    ASSERT_EQ(er_lines.size(), 3u);  // header plus dense and bm25 reports
    EXPECT_EQ(er_lines[1]["labels"]["TR"], "dense");
    EXPECT_EQ(er_lines[2]["labels"]["TR"], "bm25");

    auto ed = run(with_config({"eval-dialogue", "--mode", "all", "--format", "json"}));
    ASSERT_EQ(ed.code, 0) << ed.err;
    EXPECT_EQ(ed.lines().size(), 4u);

    auto chat = run(with_config({"chat", "--mode", "top1"}), "football clubs\nwho is the coach?\n/reset\nfootball\n/quit\n");
    ASSERT_EQ(chat.code, 0) << chat.err;
    const auto chat_lines = chat.lines();
    ASSERT_EQ(chat_lines.size(), 4u);
    EXPECT_EQ(chat_lines[1]["table_id"], chat_lines[2]["table_id"]);
    EXPECT_EQ(chat_lines[2]["knowledge"].size(), 1u);

    // A differently seeded retriever no longer matches the index.
    ASSERT_EQ(run(with_config({"--seed", "99", "train-retriever", "--epochs", "1"})).code, 0);
    auto stale = run(with_config({"retrieve", "--query", "football"}));
    EXPECT_EQ(stale.code, kExitData);
    EXPECT_NE(stale.err.find("--force"), std::string::npos);
    EXPECT_EQ(run(with_config({"--force", "retrieve", "--query", "football"})).code, 0);
}

TEST_F(CliPipeline, ProviderFailureExitsThree) {
    ASSERT_EQ(run(with_config({"ingest"})).code, 0);
    ASSERT_EQ(run(with_config({"train-ranker", "--epochs", "1"})).code, 0);
    ::setenv("GROUNDER_LLM_BASE_URL", "http://127.0.0.1:1", 1);
    const auto r = run(with_config({"eval-dialogue", "--mode", "top1", "--provider", "http"}));
    ::unsetenv("GROUNDER_LLM_BASE_URL");
    EXPECT_EQ(r.code, kExitProvider) << r.err;
}

TEST_F(CliPipeline, BadArgumentValuesExitOne) {
    EXPECT_EQ(run(with_config({"eval-dialogue", "--mode", "top0"})).code, kExitUsage);
    EXPECT_EQ(run(with_config({"eval-retrieval", "--tr", "gold"})).code, kExitUsage);
}
