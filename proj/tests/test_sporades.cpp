#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <memory>
#include <set>

#include "mansim/sporades.hpp"

using namespace mansim;
using namespace mansim::sporades;

namespace {

Config cfg5(bool fallback = true, std::uint64_t seed = 1) {
    return Config{5, 2, fallback, seed};
}

CmndsVector zeros() { return CmndsVector(5, 0); }

// Scripted FIFO cluster: no delays, explicit stepping, optional crash set.
struct Cluster {
    Config cfg;
    std::vector<std::unique_ptr<Engine>> eng;
    std::deque<std::pair<ReplicaId, Message>> wire;  // (to, msg)
    std::vector<std::vector<Block>> commits;
    std::vector<bool> timer_armed;
    std::set<ReplicaId> crashed;

    explicit Cluster(Config c = cfg5()) : cfg(c), commits(c.n), timer_armed(c.n, false) {
        for (ReplicaId i = 0; i < cfg.n; ++i)
            eng.push_back(std::make_unique<Engine>(cfg, i, [] { return CmndsVector(5, 0); }));
    }

    void collect(ReplicaId from, Actions& a) {
        for (const Block& b : a.commits) commits[from].push_back(b);
        if (a.cancel_timer) timer_armed[from] = false;
        if (a.arm_timer) timer_armed[from] = true;
        if (crashed.count(from)) return;  // omissions: nothing leaves
        for (const Message& m : a.broadcasts)
            for (ReplicaId to = 0; to < cfg.n; ++to) wire.emplace_back(to, m);
        for (const auto& s : a.sends) wire.emplace_back(s.to, s.msg);
    }

    void start() {
        for (ReplicaId i = 0; i < cfg.n; ++i) {
            if (crashed.count(i)) continue;
            Actions a;
            eng[i]->start(a);
            collect(i, a);
        }
    }

    bool step() {
        if (wire.empty()) return false;
        auto [to, msg] = wire.front();
        wire.pop_front();
        if (crashed.count(to)) return true;
        Actions a;
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, ProposeMsg>) eng[to]->on_propose(m, a);
                else if constexpr (std::is_same_v<T, VoteMsg>) eng[to]->on_vote(m, a);
                else if constexpr (std::is_same_v<T, TimeoutMsg>) eng[to]->on_timeout_msg(m, a);
                else if constexpr (std::is_same_v<T, ProposeAsyncMsg>)
                    eng[to]->on_propose_async(m, a);
                else if constexpr (std::is_same_v<T, VoteAsyncMsg>) eng[to]->on_vote_async(m, a);
                else if constexpr (std::is_same_v<T, AsyncCompleteMsg>)
                    eng[to]->on_async_complete(m, a);
            },
            msg);
        collect(to, a);
        return true;
    }

    void run(int max_steps) {
        for (int i = 0; i < max_steps && step(); ++i) {
        }
    }

    void expire_timer(ReplicaId r) {
        if (crashed.count(r) || !timer_armed[r]) return;
        timer_armed[r] = false;
        Actions a;
        eng[r]->on_timer_expired(a);
        collect(r, a);
    }
};

Block mk(std::uint32_t view, std::uint32_t round, std::int8_t level, BlockId parent,
         ReplicaId proposer) {
    return Block::make(Rank{view, round}, level, parent, proposer, CmndsVector(5, 0));
}

}  // namespace

TEST_CASE("coin: deterministic, in range, roughly uniform") {
    CoinConfig a{42, 5}, b{42, 5};
    for (std::uint32_t v = 0; v < 100; ++v) CHECK(common_coin_flip(a, v) == common_coin_flip(b, v));
    std::vector<int> freq(5, 0);
    for (std::uint32_t v = 0; v < 1000; ++v) {
        ReplicaId w = common_coin_flip(a, v);
        REQUIRE(w < 5);
        ++freq[w];
    }
    for (int f : freq) {
        CHECK(f >= 150);
        CHECK(f <= 250);
    }
    // different seeds disagree somewhere
    CoinConfig c{43, 5};
    bool differs = false;
    for (std::uint32_t v = 0; v < 100; ++v)
        if (common_coin_flip(a, v) != common_coin_flip(c, v)) differs = true;
    CHECK(differs);
}

TEST_CASE("bootstrap: leader proposes (0,1), everyone commits it") {
    Cluster cl;
    cl.start();
    // one proposal round trip plus the follow-up propose that carries the commit
    cl.run(60);
    for (ReplicaId i = 0; i < 5; ++i) {
        REQUIRE(cl.commits[i].size() >= 1);
        CHECK(cl.commits[i][0].rank == Rank{0, 1});
        CHECK(cl.commits[i][0].level == kLevelSync);
        CHECK(cl.commits[i][0].proposer == 0);
    }
}

TEST_CASE("chain self-clocks: commits advance round by round with agreement") {
    Cluster cl;
    cl.start();
    cl.run(600);
    REQUIRE(cl.commits[0].size() >= 5);
    for (ReplicaId i = 0; i < 5; ++i) {
        for (std::size_t k = 0; k < cl.commits[i].size(); ++k) {
            CHECK(cl.commits[i][k].rank.round == k + 1);
            CHECK(cl.commits[i][k].rank.view == 0);
            if (k > 0) CHECK(cl.commits[i][k].parent == cl.commits[i][k - 1].id);
        }
        std::size_t common = std::min(cl.commits[0].size(), cl.commits[i].size());
        for (std::size_t k = 0; k < common; ++k)
            CHECK(cl.commits[i][k].id == cl.commits[0][k].id);
    }
}

TEST_CASE("stale or non-leader proposals are ignored") {
    Engine e(cfg5(), 1, zeros);
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block good = mk(0, 1, kLevelSync, probe.genesis_id(), 0);

    Actions first;
    e.on_propose(ProposeMsg{good, probe.genesis_id()}, first);
    REQUIRE(first.sends.size() == 1);  // vote to leader 0
    CHECK(std::holds_alternative<VoteMsg>(first.sends[0].msg));
    CHECK(e.rank() == Rank{0, 1});

    Actions replay;
    e.on_propose(ProposeMsg{good, probe.genesis_id()}, replay);
    CHECK(replay.sends.empty());  // rank not greater

    Block wrong_leader = mk(0, 2, kLevelSync, good.id, 3);
    Actions bad;
    e.on_propose(ProposeMsg{wrong_leader, good.id}, bad);
    CHECK(bad.sends.empty());
}

TEST_CASE("timeout fires once per rank and carries block_high") {
    Engine e(cfg5(), 1, zeros);
    Actions a;
    e.start(a);
    Actions t1;
    e.on_timer_expired(t1);
    REQUIRE(t1.broadcasts.size() == 1);
    const auto& tm = std::get<TimeoutMsg>(t1.broadcasts[0]);
    CHECK(tm.view == 0);
    CHECK(tm.block_high.rank == Rank{0, 0});
    Actions t2;
    e.on_timer_expired(t2);
    CHECK(t2.broadcasts.empty());  // once per (view, round)
}

TEST_CASE("quorum of timeouts enters async extending the highest block_high") {
    Engine e(cfg5(), 4, zeros);
    Actions a;
    e.start(a);

    BlockStore probe(5);
    Block b1 = mk(0, 1, kLevelSync, probe.genesis_id(), 0);
    Block b2 = mk(0, 2, kLevelSync, b1.id, 0);
    Block b3 = mk(0, 3, kLevelSync, b2.id, 0);

    Actions s1, s2, s3;
    e.on_timeout_msg(TimeoutMsg{0, 3, b3, 1}, s1);
    CHECK(!e.is_async());
    e.on_timeout_msg(TimeoutMsg{0, 3, b3, 2}, s2);
    CHECK(!e.is_async());  // two timeouts are not enough
    e.on_timeout_msg(TimeoutMsg{0, 2, b2, 3}, s3);
    CHECK(e.is_async());

    REQUIRE(s3.broadcasts.size() == 1);
    const auto& pa = std::get<ProposeAsyncMsg>(s3.broadcasts[0]);
    CHECK(pa.height == 1);
    CHECK(pa.block.rank == Rank{0, 4});       // highest round 3, plus one
    CHECK(pa.block.parent == b3.id);          // extends the round-3 block
    CHECK(pa.block.level == kLevelAsync1);
    CHECK(s3.cancel_timer);

    // stale timeout for an old view after advancing is ignored
    Actions stale;
    e.on_timeout_msg(TimeoutMsg{0, 3, b3, 0}, stale);
    CHECK(stale.broadcasts.empty());
}

TEST_CASE("async voting tests rank against the replica rank, once per block") {
    Engine e(cfg5(), 4, zeros);
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block b3 = mk(0, 3, kLevelSync, probe.genesis_id(), 0);
    for (ReplicaId s = 0; s < 3; ++s) {
        Actions t;
        e.on_timeout_msg(TimeoutMsg{0, 3, b3, s}, t);
    }
    REQUIRE(e.is_async());

    Block h1_a = mk(0, 4, kLevelAsync1, b3.id, 1);
    Block h1_b = mk(0, 4, kLevelAsync1, b3.id, 2);

    Actions va, vb, dup;
    e.on_propose_async(ProposeAsyncMsg{h1_a, 1, 1}, va);
    REQUIRE(va.sends.size() == 1);
    CHECK(va.sends[0].to == 1);
    CHECK(std::get<VoteAsyncMsg>(va.sends[0].msg).block == h1_a.id);

    // a second height-1 block of the same rank from another sender also gets
    // a vote: the test is against the replica's own rank, not a running max
    e.on_propose_async(ProposeAsyncMsg{h1_b, 2, 1}, vb);
    REQUIRE(vb.sends.size() == 1);
    CHECK(vb.sends[0].to == 2);

    // redelivery of an already-voted block does not vote again
    e.on_propose_async(ProposeAsyncMsg{h1_a, 1, 1}, dup);
    CHECK(dup.sends.empty());

    // a height-2 block at the next round passes the test too
    Block h2 = mk(0, 5, kLevelAsync2, h1_a.id, 1);
    Actions vh2;
    e.on_propose_async(ProposeAsyncMsg{h2, 1, 2}, vh2);
    // one vote, plus this replica adopts the certified parent for its own h2
    bool voted = false;
    for (const auto& s : vh2.sends)
        if (std::holds_alternative<VoteAsyncMsg>(s.msg)) voted = true;
    CHECK(voted);
}

TEST_CASE("own height-1 quorum builds the height-2 block; its quorum completes") {
    Engine e(cfg5(), 4, zeros);
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block b3 = mk(0, 3, kLevelSync, probe.genesis_id(), 0);
    Actions entry;
    for (ReplicaId s = 0; s < 3; ++s) {
        Actions t;
        e.on_timeout_msg(TimeoutMsg{0, 3, b3, s}, t);
        if (e.is_async()) entry = std::move(t);
    }
    const auto& h1 = std::get<ProposeAsyncMsg>(entry.broadcasts[0]).block;

    Actions v1, v2, v3, extra;
    e.on_vote_async(VoteAsyncMsg{h1.id, 1, 0, 0}, v1);
    e.on_vote_async(VoteAsyncMsg{h1.id, 1, 1, 0}, v2);
    CHECK(v2.broadcasts.empty());
    e.on_vote_async(VoteAsyncMsg{h1.id, 1, 2, 0}, v3);
    REQUIRE(v3.broadcasts.size() == 1);
    const auto& h2msg = std::get<ProposeAsyncMsg>(v3.broadcasts[0]);
    CHECK(h2msg.height == 2);
    CHECK(h2msg.block.rank == Rank{0, 5});
    CHECK(h2msg.block.parent == h1.id);
    CHECK(h2msg.block.level == kLevelAsync2);

    // further height-1 votes change nothing: one height-2 block per view
    e.on_vote_async(VoteAsyncMsg{h1.id, 1, 3, 0}, extra);
    CHECK(extra.broadcasts.empty());

    Actions w1, w2, w3, late;
    e.on_vote_async(VoteAsyncMsg{h2msg.block.id, 2, 0, 0}, w1);
    e.on_vote_async(VoteAsyncMsg{h2msg.block.id, 2, 1, 0}, w2);
    e.on_vote_async(VoteAsyncMsg{h2msg.block.id, 2, 2, 0}, w3);
    REQUIRE(w3.broadcasts.size() == 1);
    const auto& done = std::get<AsyncCompleteMsg>(w3.broadcasts[0]);
    CHECK(done.view == 0);
    CHECK(done.block.id == h2msg.block.id);
    e.on_vote_async(VoteAsyncMsg{h2msg.block.id, 2, 3, 0}, late);
    CHECK(late.broadcasts.empty());  // once per view
}

TEST_CASE("async completion: coin winner in the first n-f commits and exits") {
    // choose a seed whose view-0 coin lands on replica 2
    std::uint64_t seed = 0;
    for (std::uint64_t s = 1; s < 200; ++s)
        if (common_coin_flip(CoinConfig{s, 5}, 0) == 2) {
            seed = s;
            break;
        }
    REQUIRE(seed != 0);

    Engine e(cfg5(true, seed), 4, zeros);
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block b3 = mk(0, 3, kLevelSync, probe.genesis_id(), 0);
    for (ReplicaId s = 0; s < 3; ++s) {
        Actions t;
        e.on_timeout_msg(TimeoutMsg{0, 3, b3, s}, t);
    }
    REQUIRE(e.is_async());

    Block h1_2 = mk(0, 4, kLevelAsync1, b3.id, 2);
    Block h2_2 = mk(0, 5, kLevelAsync2, h1_2.id, 2);
    Block h1_1 = mk(0, 4, kLevelAsync1, b3.id, 1);
    Block h2_1 = mk(0, 5, kLevelAsync2, h1_1.id, 1);
    Block h1_3 = mk(0, 4, kLevelAsync1, b3.id, 3);
    Block h2_3 = mk(0, 5, kLevelAsync2, h1_3.id, 3);

    // the height-1 proposals were broadcast to everyone; deliver them so the
    // commit walk can resolve its history
    for (const auto& [h1, s] : {std::pair{h1_1, 1u}, {h1_2, 2u}, {h1_3, 3u}}) {
        Actions tmp;
        e.on_propose_async(ProposeAsyncMsg{h1, s, 1}, tmp);
    }

    Actions c1, c2, c3, late;
    e.on_async_complete(AsyncCompleteMsg{h2_1, 0, 1}, c1);
    e.on_async_complete(AsyncCompleteMsg{h2_2, 0, 2}, c2);
    CHECK(e.is_async());
    e.on_async_complete(AsyncCompleteMsg{h2_3, 0, 3}, c3);

    CHECK(!e.is_async());
    CHECK(e.view() == 1);
    // winner 2 was among the first three senders: its height-2 block commits
    bool committed_h2 = false;
    for (const Block& b : c3.commits)
        if (b.id == h2_2.id) committed_h2 = true;
    CHECK(committed_h2);
    CHECK(e.block_high() == h2_2.id);
    CHECK(c3.arm_timer);
    REQUIRE(c3.sends.size() == 1);
    CHECK(c3.sends[0].to == leader_of(1, 5));
    const auto& exit_vote = std::get<VoteMsg>(c3.sends[0].msg);
    CHECK(exit_vote.view == 1);
    CHECK(exit_vote.block_high.id == h2_2.id);

    // completes arriving after the quorum was processed are ignored
    Block h1_0 = mk(0, 4, kLevelAsync1, b3.id, 0);
    Block h2_0 = mk(0, 5, kLevelAsync2, h1_0.id, 0);
    e.on_async_complete(AsyncCompleteMsg{h2_0, 0, 0}, late);
    CHECK(late.commits.empty());
    CHECK(e.view() == 1);
}

TEST_CASE("async completion: winner outside the first n-f adopts without committing") {
    // seed whose view-0 coin lands on replica 0
    std::uint64_t seed = 0;
    for (std::uint64_t s = 1; s < 200; ++s)
        if (common_coin_flip(CoinConfig{s, 5}, 0) == 0) {
            seed = s;
            break;
        }
    REQUIRE(seed != 0);

    Engine e(cfg5(true, seed), 4, zeros);
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block b3 = mk(0, 3, kLevelSync, probe.genesis_id(), 0);
    for (ReplicaId s = 1; s < 4; ++s) {
        Actions t;
        e.on_timeout_msg(TimeoutMsg{0, 3, b3, s}, t);
    }
    REQUIRE(e.is_async());

    Block h1_0 = mk(0, 4, kLevelAsync1, b3.id, 0);
    Block h2_0 = mk(0, 5, kLevelAsync2, h1_0.id, 0);
    // the winner's height-2 block was witnessed via its proposal only
    Actions w;
    e.on_propose_async(ProposeAsyncMsg{h2_0, 0, 2}, w);

    Block h1_1 = mk(0, 4, kLevelAsync1, b3.id, 1);
    Block h2_1 = mk(0, 5, kLevelAsync2, h1_1.id, 1);
    Block h1_2 = mk(0, 4, kLevelAsync1, b3.id, 2);
    Block h2_2 = mk(0, 5, kLevelAsync2, h1_2.id, 2);
    Block h1_3 = mk(0, 4, kLevelAsync1, b3.id, 3);
    Block h2_3 = mk(0, 5, kLevelAsync2, h1_3.id, 3);

    Actions c1, c2, c3;
    e.on_async_complete(AsyncCompleteMsg{h2_1, 0, 1}, c1);
    e.on_async_complete(AsyncCompleteMsg{h2_2, 0, 2}, c2);
    e.on_async_complete(AsyncCompleteMsg{h2_3, 0, 3}, c3);

    CHECK(!e.is_async());
    CHECK(c3.commits.empty());          // nothing committed this episode
    CHECK(e.block_high() == h2_0.id);   // but the winner's block is adopted
    CHECK(e.view() == 1);
}

TEST_CASE("new-view votes: quorum with block_highs at round 5 proposes (1,6)") {
    Engine e(cfg5(), 1, zeros);  // leader of view 1
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block b5 = mk(0, 5, kLevelSync, probe.genesis_id(), 0);

    Actions v1, v2, v3;
    e.on_vote(VoteMsg{1, 5, b5, 2}, v1);
    CHECK(v1.broadcasts.empty());  // two votes are not enough
    e.on_vote(VoteMsg{1, 5, b5, 3}, v2);
    CHECK(v2.broadcasts.empty());
    e.on_vote(VoteMsg{1, 5, b5, 4}, v3);
    REQUIRE(v3.broadcasts.size() == 1);
    const auto& pm = std::get<ProposeMsg>(v3.broadcasts[0]);
    CHECK(pm.block.rank == Rank{1, 6});
    CHECK(pm.block.parent == b5.id);
    CHECK(pm.block.level == kLevelSync);

    // votes for an older view are ignored afterwards
    Actions stale;
    e.on_vote(VoteMsg{1, 5, b5, 0}, stale);
    CHECK(stale.broadcasts.empty());
}

TEST_CASE("fallback disabled: timeout quorum jumps to the next view, no async blocks") {
    Engine e(cfg5(false), 4, zeros);
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block b2 = mk(0, 2, kLevelSync, probe.genesis_id(), 0);
    Actions s1, s2, s3;
    e.on_timeout_msg(TimeoutMsg{0, 2, b2, 0}, s1);
    e.on_timeout_msg(TimeoutMsg{0, 2, b2, 1}, s2);
    e.on_timeout_msg(TimeoutMsg{0, 2, b2, 2}, s3);
    CHECK(!e.is_async());
    CHECK(e.view() == 1);
    CHECK(s3.broadcasts.empty());  // no propose-async
    CHECK(s3.arm_timer);
    REQUIRE(s3.sends.size() == 1);
    CHECK(s3.sends[0].to == leader_of(1, 5));
    CHECK(std::holds_alternative<VoteMsg>(s3.sends[0].msg));
}

TEST_CASE("async replica ignores synchronous proposals") {
    Engine e(cfg5(), 4, zeros);
    Actions a;
    e.start(a);
    BlockStore probe(5);
    Block b3 = mk(0, 3, kLevelSync, probe.genesis_id(), 0);
    for (ReplicaId s = 0; s < 3; ++s) {
        Actions t;
        e.on_timeout_msg(TimeoutMsg{0, 3, b3, s}, t);
    }
    REQUIRE(e.is_async());
    Block b4 = mk(0, 9, kLevelSync, b3.id, 0);
    Actions p;
    e.on_propose(ProposeMsg{b4, b3.id}, p);
    CHECK(p.sends.empty());  // no sync vote while async
}

TEST_CASE("full crashed-leader episode: everyone exits and agrees") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL, 6ULL}) {
        Cluster cl(cfg5(true, seed));
        cl.crashed.insert(0);  // leader of view 0 never speaks
        cl.start();
        for (ReplicaId r = 1; r < 5; ++r) cl.expire_timer(r);
        cl.run(4000);
        // everyone exited the fallback; the new leader of view 1 resumed
        for (ReplicaId r = 1; r < 5; ++r) {
            CHECK(!cl.eng[r]->is_async());
            CHECK(cl.eng[r]->view() >= 1);
        }
        // log agreement across live replicas on the common prefix
        for (ReplicaId r = 2; r < 5; ++r) {
            std::size_t common = std::min(cl.commits[1].size(), cl.commits[r].size());
            for (std::size_t k = 0; k < common; ++k)
                CHECK(cl.commits[1][k].id == cl.commits[r][k].id);
        }
        // rounds stay consecutive through the mode switch
        for (std::size_t k = 0; k < cl.commits[1].size(); ++k)
            CHECK(cl.commits[1][k].rank.round == k + 1);
        // commits continue after the fallback (view >= 1 sync blocks exist)
        bool post_async_commit = false;
        for (const Block& b : cl.commits[1])
            if (b.rank.view >= 1 && b.level == kLevelSync) post_async_commit = true;
        CHECK(post_async_commit);
    }
}
