#include "grounder/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "grounder/error.hpp"
#include "grounder/rng.hpp"
#include "grounder/text_features.hpp"

namespace grounder {

namespace {

enum class Ask { when, who, how_many, what };
enum class Value { year, person, count, place, category };

struct Attribute {
    std::string header;
    std::vector<std::string> cues;  // question words; each ends the follow-up query
    Ask ask;
    Value value;
    std::string suffix;  // unit or place suffix
    std::vector<std::string> categories;
    int lo = 0;
    int hi = 0;
};

struct Topic {
    std::string title;     // table page title stem
    std::string singular;  // used by linked passages
    std::vector<std::string> synonyms;  // query-side only; never in table text
    std::string key;
    std::vector<Attribute> attributes;
};

Attribute year(std::string header, std::vector<std::string> cues) {
    return {std::move(header), std::move(cues), Ask::when, Value::year, "", {}, 1850, 2015};
}
Attribute person(std::string header, std::vector<std::string> cues) {
    return {std::move(header), std::move(cues), Ask::who, Value::person, "", {}, 0, 0};
}
Attribute count(std::string header, std::vector<std::string> cues, Ask ask, int lo, int hi, std::string unit = "") {
    return {std::move(header), std::move(cues), ask, Value::count, std::move(unit), {}, lo, hi};
}
Attribute place(std::string header, std::vector<std::string> cues, std::string suffix) {
    return {std::move(header), std::move(cues), Ask::what, Value::place, std::move(suffix), {}, 0, 0};
}
Attribute category(std::string header, std::vector<std::string> cues, std::vector<std::string> values) {
    return {std::move(header), std::move(cues), Ask::what, Value::category, "", std::move(values), 0, 0};
}

std::vector<Topic> builtin_topics() {
    const auto founded = year("Founded", {"founded", "established"});
    const auto opened = year("Opened", {"opened", "inaugurated"});
    const auto director = person("Director", {"director", "chief"});
    const auto owner = person("Owner", {"owner", "proprietor"});
    const auto architect = person("Architect", {"architect", "planner"});
    return {
        {"Football clubs", "football club", {"soccer sides", "footy outfits", "kickabout squads"}, "Club",
         {place("Stadium", {"stadium", "ground"}, "Arena"), founded, person("Manager", {"manager", "coach"})}},
        {"Hospitals", "hospital", {"infirmaries", "sickbays", "sanatoriums"}, "Hospital",
         {count("Beds", {"beds", "cots"}, Ask::how_many, 40, 900), opened, director}},
        {"Museums", "museum", {"galleries", "exhibition halls", "heritage collections"}, "Museum",
         {person("Curator", {"curator", "keeper"}), opened,
          count("Visitors", {"visitors", "guests"}, Ask::how_many, 1000, 90000)}},
        {"Universities", "university", {"colleges", "academies", "campuses"}, "University",
         {count("Students", {"students", "pupils"}, Ask::how_many, 800, 40000), founded,
          person("Rector", {"rector", "dean"})}},
        {"Airports", "airport", {"airfields", "aerodromes", "airstrips"}, "Airport",
         {count("Runways", {"runways", "strips"}, Ask::how_many, 1, 6), opened,
          count("Passengers", {"passengers", "travellers"}, Ask::how_many, 20000, 900000)}},
        {"Bridges", "bridge", {"viaducts", "overpasses", "river crossings"}, "Bridge",
         {count("Length", {"length", "span"}, Ask::what, 40, 2500, "m"), opened,
          person("Engineer", {"engineer", "designer"})}},
        {"Libraries", "library", {"book lenders", "archives", "reading salons"}, "Library",
         {count("Volumes", {"volumes", "books"}, Ask::how_many, 5000, 900000), founded,
          person("Librarian", {"librarian", "custodian"})}},
        {"Newspapers", "newspaper", {"dailies", "gazettes", "tabloids"}, "Newspaper",
         {person("Editor", {"editor", "publisher"}), founded,
          count("Circulation", {"circulation", "readership"}, Ask::what, 2000, 300000)}},
        {"Radio stations", "radio station", {"broadcasters", "fm channels", "airwave outlets"}, "Station",
         {count("Frequency", {"frequency", "dial"}, Ask::what, 88, 108, "MHz"),
          year("Launched", {"launched", "debuted"}), owner}},
        {"Restaurants", "restaurant", {"eateries", "diners", "bistros"}, "Restaurant",
         {person("Chef", {"chef", "cook"}),
          category("Cuisine", {"cuisine", "food"}, {"Nordic", "Italian", "Thai", "Georgian", "Peruvian", "Basque"}),
          opened}},
        {"Hotels", "hotel", {"inns", "lodgings", "guesthouses"}, "Hotel",
         {count("Rooms", {"rooms", "suites"}, Ask::how_many, 12, 600), opened, owner}},
        {"Parks", "park", {"green spaces", "gardens", "recreation grounds"}, "Park",
         {count("Area", {"area", "size"}, Ask::what, 2, 900, "hectares"), opened,
          place("Address", {"address", "entrance"}, "Road")}},
        {"Churches", "church", {"cathedrals", "chapels", "worship halls"}, "Church",
         {category("Denomination", {"denomination", "faith"},
                   {"Lutheran", "Catholic", "Orthodox", "Baptist", "Methodist", "Anglican"}),
          year("Built", {"built", "constructed"}), architect}},
        {"Railway stations", "railway station", {"train depots", "rail terminals", "halts"}, "Station",
         {count("Platforms", {"platforms", "tracks"}, Ask::how_many, 1, 14), opened,
          place("Operator", {"operator", "company"}, "Rail")}},
        {"Theatres", "theatre", {"playhouses", "drama venues", "stages"}, "Theatre",
         {count("Seats", {"seats", "places"}, Ask::how_many, 90, 2400), opened, director}},
        {"Breweries", "brewery", {"alehouses", "beer makers", "brewhouses"}, "Brewery",
         {person("Founder", {"founder", "creator"}), founded,
          count("Output", {"output", "production"}, Ask::what, 500, 90000, "hectolitres")}},
        {"Stadiums", "stadium", {"ballparks", "coliseums", "sporting bowls"}, "Stadium",
         {count("Capacity", {"capacity", "spectators"}, Ask::what, 3000, 80000), opened,
          place("Tenant", {"tenant", "occupant"}, "Rovers")}},
        {"Skyscrapers", "skyscraper", {"tall buildings", "high rises", "towers"}, "Building",
         {count("Height", {"height", "elevation"}, Ask::what, 90, 540, "m"),
          year("Completed", {"completed", "finished"}), architect}},
        {"Festivals", "festival", {"carnivals", "fairs", "celebrations"}, "Festival",
         {category("Month", {"month", "season"},
                   {"January", "March", "May", "June", "August", "October", "December"}),
          year("Started", {"started", "held"}), count("Attendance", {"attendance", "crowd"}, Ask::what, 500, 250000)}},
        {"Banks", "bank", {"financial institutions", "credit unions", "savings firms"}, "Bank",
         {place("Headquarters", {"headquarters", "office"}, "Street"), founded,
          person("Chairman", {"chairman", "president"})}},
    };
}

const std::vector<std::string> kFirstNames = {"Ada",  "Bruno", "Clara", "Dmitri", "Elin",  "Farid", "Greta",
                                              "Hugo", "Ines",  "Jonas", "Katya",  "Luca",  "Mira",  "Nils",
                                              "Olga", "Pavel", "Rosa",  "Sven",   "Talia", "Viktor"};

// Pronounceable invented words, unique and disjoint from the fixed vocabulary.
std::vector<std::string> invented_words(Rng& rng, std::size_t n, const std::set<std::string>& reserved) {
    static const std::vector<std::string> onsets = {"b", "d", "k", "l", "m", "n", "r", "s", "t", "v",
                                                    "z", "br", "dr", "gl", "kr", "th", "st", "f", "g", "h"};
    static const std::vector<std::string> vowels = {"a", "e", "i", "o", "u", "ae", "ei", "ou"};
    static const std::vector<std::string> codas = {"n", "r", "l", "s", "th", "v", "m", "rn", "sk", "nd"};
    std::set<std::string> seen(reserved);
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string w;
        const std::size_t syllables = 2 + rng.below(2);
        for (std::size_t s = 0; s < syllables; ++s) {
            w += onsets[rng.below(onsets.size())];
            w += vowels[rng.below(vowels.size())];
        }
        w += codas[rng.below(codas.size())];
        if (!seen.insert(w).second) continue;
        w[0] = static_cast<char>(w[0] - 'a' + 'A');
        out.push_back(w);
    }
    return out;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& items) {
    return items[rng.below(items.size())];
}

std::string question(const Attribute& a, const std::string& cue) {
    switch (a.ask) {
        case Ask::when: return "When was it " + cue + "?";
        case Ask::who: return "Who is the " + cue + "?";
        case Ask::how_many: return "How many " + cue + "?";
        case Ask::what: return "What is the " + cue + "?";
    }
    return cue;
}

std::string answer(Rng& rng, const Attribute& a, const std::string& value) {
    if (a.value == Value::year) {
        static const std::vector<std::string> t = {"In ", "That was in ", "Back in "};
        return pick(rng, t) + value + ".";
    }
    if (a.value == Value::person) {
        static const std::vector<std::string> t = {"That would be ", "It's ", "That's "};
        return pick(rng, t) + value + ".";
    }
    static const std::vector<std::string> t = {"It's ", "The answer is ", "That would be "};
    return pick(rng, t) + value + ".";
}

const std::vector<std::string> kOpeners = {"What about {E}?", "Tell me more about {E}.", "Let's talk about {E}.",
                                           "I'm curious about {E}."};
const std::vector<std::string> kFollowers = {"And ", "Also, ", "OK. ", "Thanks. "};
const std::vector<std::string> kTableQueries = {"{S} in {C}", "show me {S} in {C}", "which {S} are there in {C}",
                                                "list the {S} of {C}", "{C} {S}"};

std::string fill(std::string tmpl, const std::string& key, const std::string& value) {
    for (auto at = tmpl.find(key); at != std::string::npos; at = tmpl.find(key, at + value.size())) {
        tmpl.replace(at, key.size(), value);
    }
    return tmpl;
}

std::string lower_first(std::string s) {
    if (!s.empty() && s[0] >= 'A' && s[0] <= 'Z') s[0] = static_cast<char>(s[0] - 'A' + 'a');
    return s;
}

struct TableFacts {
    std::size_t topic = 0;
    std::string city;
    std::vector<std::string> entities;           // per row
    std::vector<std::vector<std::string>> values;  // per row, per attribute
};

DialogueRecord make_dialogue(Rng& rng, const Topic& topic, const TableDocument& table, const TableFacts& facts,
                             std::size_t row, const std::string& opening, std::string id) {
    DialogueRecord d;
    d.dialogue_id = std::move(id);
    d.gold_table_id = table.table_id;
    d.turns.push_back({opening, "Sure, here are the " + lower_first(topic.title) + " in " + facts.city + ".", {}});

    std::vector<std::size_t> order(topic.attributes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& attr = topic.attributes[order[i]];
        const auto q = question(attr, pick(rng, attr.cues));
        const std::string query = i == 0 ? fill(pick(rng, kOpeners), "{E}", facts.entities[row]) + " " + q
                                         : pick(rng, kFollowers) + lower_first(q);
        const auto& value = facts.values[row][order[i]];
        d.turns.push_back({query, answer(rng, attr, value), {CellRef{table.table_id, row, order[i] + 1}}});
    }
    return d;
}

std::string table_query(Rng& rng, const std::string& synonym, const std::string& city) {
    return fill(fill(pick(rng, kTableQueries), "{S}", synonym), "{C}", city);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config) {
    const auto topics = builtin_topics();
    if (config.topics == 0 || config.topics > topics.size()) {
        throw ArgumentError("topics must be in [1, " + std::to_string(topics.size()) + "]");
    }
    if (config.cities == 0) throw ArgumentError("cities must be >= 1");
    if (config.rows < 2) throw ArgumentError("rows must be >= 2");
    if (config.train_dialogues_per_table >= config.rows) {
        throw ArgumentError("train_dialogues_per_table must leave one row for the test dialogue");
    }

    Rng rng(config.seed);
    std::set<std::string> reserved;
    for (const auto& t : topics) {
        for (const auto& tok : tokenize(t.title + " " + t.singular + " " + t.key)) reserved.insert(tok);
        for (const auto& s : t.synonyms) {
            for (const auto& tok : tokenize(s)) reserved.insert(tok);
        }
        for (const auto& a : t.attributes) {
            for (const auto& c : a.cues) reserved.insert(c);
        }
    }
    const std::size_t entity_pool = 50;
    auto words = invented_words(rng, config.cities + entity_pool + 40 + 40, reserved);
    const std::vector<std::string> cities(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(config.cities));
    auto cursor = words.begin() + static_cast<std::ptrdiff_t>(config.cities);
    const std::vector<std::string> entities(cursor, cursor + static_cast<std::ptrdiff_t>(entity_pool));
    cursor += static_cast<std::ptrdiff_t>(entity_pool);
    const std::vector<std::string> surnames(cursor, cursor + 40);
    cursor += 40;
    const std::vector<std::string> stems(cursor, cursor + 40);
    if (config.rows > entity_pool) throw ArgumentError("rows must be <= " + std::to_string(entity_pool));

    SyntheticData data;
    std::vector<TableFacts> facts;
    for (std::size_t t = 0; t < config.topics; ++t) {
        const auto& topic = topics[t];
        for (std::size_t c = 0; c < config.cities; ++c) {
            const auto& city = cities[c];
            TableDocument table;
            table.table_id = "syn-" + std::to_string(t * config.cities + c);
            table.page_title = topic.title + " in " + city;
            table.page_intro = "This is a list of " + lower_first(topic.title) + " based in " + city + ".";
            table.section_title = topic.title;
            table.section_intro = "Notable " + lower_first(topic.title) + " ordered by name.";
            table.headers.push_back(topic.key);
            for (const auto& a : topic.attributes) table.headers.push_back(a.header);

            TableFacts f{t, city, {}, {}};
            std::vector<std::size_t> pool(entity_pool);
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(pool));
            std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.rows),
                      [&](std::size_t a, std::size_t b) { return entities[a] < entities[b]; });
            for (std::size_t r = 0; r < config.rows; ++r) {
                const auto& entity = entities[pool[r]];
                const std::string link = entity + " is a " + topic.singular + " in " + city + ".";
                std::vector<Cell> row{{entity, ""}};
                std::vector<std::string> vals;
                for (const auto& a : topic.attributes) {
                    std::string v;
                    switch (a.value) {
                        case Value::year:
                        case Value::count:
                            v = std::to_string(a.lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(a.hi - a.lo + 1))));
                            if (!a.suffix.empty()) v += " " + a.suffix;
                            break;
                        case Value::person: v = pick(rng, kFirstNames) + " " + pick(rng, surnames); break;
                        case Value::place: v = pick(rng, stems) + " " + a.suffix; break;
                        case Value::category: v = pick(rng, a.categories); break;
                    }
                    row.push_back({v, link});
                    vals.push_back(v);
                }
                table.rows.push_back(std::move(row));
                f.entities.push_back(entity);
                f.values.push_back(std::move(vals));
            }
            data.tables.push_back(std::move(table));
            facts.push_back(std::move(f));
        }
    }

    for (std::size_t i = 0; i < data.tables.size(); ++i) {
        const auto& table = data.tables[i];
        const auto& f = facts[i];
        const auto& topic = topics[f.topic];
        const std::size_t city_index = i % config.cities;
        const std::size_t held_out = city_index % topic.synonyms.size();

        std::vector<std::string> train_phrases;
        for (std::size_t s = 0; s < topic.synonyms.size(); ++s) {
            if (s != held_out) train_phrases.push_back(topic.synonyms[s]);
        }
        std::vector<std::string> train_queries;
        for (const auto& phrase : train_phrases) {
            std::vector<std::size_t> templates(kTableQueries.size());
            std::iota(templates.begin(), templates.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(templates));
            for (std::size_t k = 0; k < 2; ++k) {
                train_queries.push_back(fill(fill(kTableQueries[templates[k]], "{S}", phrase), "{C}", f.city));
            }
        }
        for (const auto& q : train_queries) data.retrieval_train.push_back({q, table.table_id});
        const auto test_query = table_query(rng, topic.synonyms[held_out], f.city);
        data.retrieval_test.push_back({test_query, table.table_id});

        std::vector<std::size_t> rows(config.rows);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(rows));
        for (std::size_t k = 0; k < config.train_dialogues_per_table; ++k) {
            data.dialogues_train.push_back(make_dialogue(rng, topic, table, f, rows[k], pick(rng, train_queries),
                                                         table.table_id + "-train-" + std::to_string(k)));
        }
        data.dialogues_test.push_back(make_dialogue(rng, topic, table, f, rows[config.train_dialogues_per_table],
                                                    test_query, table.table_id + "-test"));
    }
    return data;
}

void save_retrieval_pairs(std::span<const RetrievalPair> pairs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    for (const auto& p : pairs) out << nlohmann::json{{"query", p.query}, {"gold_id", p.table_id}}.dump() << "\n";
    if (!out) throw DataError("write failed: " + path.string());
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_corpus(data.tables, dir / "tables.jsonl");
    save_retrieval_pairs(data.retrieval_train, dir / "retrieval_train.jsonl");
    save_retrieval_pairs(data.retrieval_test, dir / "retrieval_test.jsonl");
    save_dialogues(data.dialogues_train, dir / "dialogues_train.jsonl");
    save_dialogues(data.dialogues_test, dir / "dialogues_test.jsonl");
}

}  // namespace grounder
