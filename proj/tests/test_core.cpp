#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "mansim/core.hpp"

using namespace mansim;

TEST_CASE("rank comparison is lexicographic") {
    CHECK(rank_compare(Rank{0, 1}, Rank{0, 2}) == std::strong_ordering::less);
    CHECK(rank_compare(Rank{1, 0}, Rank{0, 99}) == std::strong_ordering::greater);
    CHECK(rank_compare(Rank{3, 7}, Rank{3, 7}) == std::strong_ordering::equal);
}

TEST_CASE("rank order matches the pair order on random samples") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        Rank a{static_cast<std::uint32_t>(rng() % 5), static_cast<std::uint32_t>(rng() % 50)};
        Rank b{static_cast<std::uint32_t>(rng() % 5), static_cast<std::uint32_t>(rng() % 50)};
        auto expect = std::make_pair(a.view, a.round) <=> std::make_pair(b.view, b.round);
        CHECK(rank_compare(a, b) == expect);
        // strict total order sanity
        CHECK((a < b) == (b > a));
        CHECK((a == b) == !(a < b || b < a));
    }
}

TEST_CASE("leader_of is round-robin") {
    CHECK(leader_of(0, 5) == 0);
    CHECK(leader_of(7, 5) == 2);
    for (std::uint32_t v = 0; v < 40; ++v)
        for (std::uint32_t n = 1; n <= 7; ++n) CHECK(leader_of(v, n) == leader_of(v + n, n));
}

TEST_CASE("block ids are deterministic and field-sensitive") {
    CmndsVector cut{3, 2, 1, 1, 1};
    Block a = Block::make(Rank{0, 1}, kLevelSync, 42, 0, cut);
    Block b = Block::make(Rank{0, 1}, kLevelSync, 42, 0, cut);
    CHECK(a.id == b.id);

    std::set<BlockId> ids;
    ids.insert(a.id);
    ids.insert(Block::make(Rank{0, 2}, kLevelSync, 42, 0, cut).id);
    ids.insert(Block::make(Rank{0, 1}, kLevelAsync1, 42, 0, cut).id);
    ids.insert(Block::make(Rank{0, 1}, kLevelSync, 43, 0, cut).id);
    ids.insert(Block::make(Rank{0, 1}, kLevelSync, 42, 1, cut).id);
    ids.insert(Block::make(Rank{0, 1}, kLevelSync, 42, 0, CmndsVector{3, 2, 1, 1, 2}).id);
    CHECK(ids.size() == 6);
}

TEST_CASE("genesis block shape") {
    Block g = genesis_block(5);
    CHECK(g.rank == Rank{0, 0});
    CHECK(g.level == kLevelSync);
    CHECK(g.proposer == 0);
    CHECK(g.cmnds == CmndsVector(5, 0));
    CHECK(genesis_block(5).id == g.id);
}

TEST_CASE("extends: reflexive, genesis-reaching, fork-separating") {
    BlockStore store(5);
    const Block& g = store.genesis();
    CmndsVector cut(5, 0);
    Block b1 = Block::make(Rank{0, 1}, kLevelSync, g.id, 0, cut);
    Block b2 = Block::make(Rank{0, 2}, kLevelSync, b1.id, 0, cut);
    // a diverging async branch off b1
    Block fork = Block::make(Rank{0, 2}, kLevelAsync1, b1.id, 3, cut);
    store.insert(b1);
    store.insert(b2);
    store.insert(fork);

    CHECK(store.extends(b2.id, b2.id) == ExtendsResult::kYes);
    CHECK(store.extends(b2.id, g.id) == ExtendsResult::kYes);
    CHECK(store.extends(fork.id, g.id) == ExtendsResult::kYes);

    // brute-force oracle: walk parents and collect the path
    auto path_of = [&](BlockId from) {
        std::set<BlockId> path;
        BlockId cur = from;
        while (true) {
            path.insert(cur);
            if (cur == g.id) break;
            cur = store.find(cur)->parent;
        }
        return path;
    };
    CHECK(path_of(b2.id).count(fork.id) == 0);
    CHECK(store.extends(b2.id, fork.id) == ExtendsResult::kNo);
    CHECK(store.extends(fork.id, b2.id) == ExtendsResult::kNo);
    CHECK(store.extends(b2.id, b1.id) == ExtendsResult::kYes);
}

TEST_CASE("extends reports unresolved history") {
    BlockStore store(3);
    CmndsVector cut(3, 0);
    Block b1 = Block::make(Rank{0, 1}, kLevelSync, store.genesis_id(), 0, cut);
    Block b2 = Block::make(Rank{0, 2}, kLevelSync, b1.id, 0, cut);
    store.insert(b2);  // parent b1 missing
    CHECK(store.extends(b2.id, store.genesis_id()) == ExtendsResult::kUnresolvedParent);
}

TEST_CASE("duplicate insert keeps one copy") {
    BlockStore store(3);
    Block b1 = Block::make(Rank{0, 1}, kLevelSync, store.genesis_id(), 0, CmndsVector(3, 0));
    CHECK(store.insert(b1));
    CHECK(!store.insert(b1));
    CHECK(store.size() == 2);
}
