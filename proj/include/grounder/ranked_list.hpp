#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace grounder {

template <class Id>
struct Scored {
    Id id;
    double score = 0.0;
};

// Items in descending score order; equal scores keep insertion order.
template <class Id>
struct RankedList {
    std::vector<Scored<Id>> items;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    const Scored<Id>& operator[](std::size_t i) const { return items[i]; }
    auto begin() const { return items.begin(); }
    auto end() const { return items.end(); }
};

// Positions of the k best scores: descending score, ascending position on ties.
template <class Score>
std::vector<std::size_t> select_top_k(std::span<const Score> scores, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    k = std::min(k, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
    order.resize(k);
    return order;
}

}  // namespace grounder
