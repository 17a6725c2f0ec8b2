// Regenerates the shipped synthetic corpus (data/synthetic by default).
#include <cstdint>
#include <iostream>

#include <CLI11.hpp>

#include "grounder/error.hpp"
#include "grounder/synthetic.hpp"

int main(int argc, char** argv) {
    grounder::SyntheticConfig config;
    std::string out_dir = "data/synthetic";
    CLI::App app{"Write the synthetic tables, retrieval pairs and dialogues", "grounder_synth"};
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", config.seed, "Generator seed")->capture_default_str();
    app.add_option("--topics", config.topics, "Topics (at most 20)")->capture_default_str();
    app.add_option("--cities", config.cities, "Cities per topic")->capture_default_str();
    app.add_option("--rows", config.rows, "Rows per table")->capture_default_str();
    app.add_option("--train-dialogues", config.train_dialogues_per_table, "Training dialogues per table")
        ->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    try {
        const auto data = grounder::generate_synthetic(config);
        grounder::write_synthetic(data, out_dir);
        std::cout << "wrote " << data.tables.size() << " tables, " << data.retrieval_train.size() << "/"
                  << data.retrieval_test.size() << " retrieval pairs, " << data.dialogues_train.size() << "/"
                  << data.dialogues_test.size() << " dialogues to " << out_dir << "\n";
    } catch (const grounder::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
