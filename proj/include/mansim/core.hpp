#pragma once

#include <compare>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "mansim/hash.hpp"

namespace mansim {

using ReplicaId = std::uint32_t;
using BlockId = std::uint64_t;
using SimTime = std::int64_t;  // simulated milliseconds

// cmnds cut: per-replica count of dissemination-chain rounds covered.
using CmndsVector = std::vector<std::uint32_t>;

// (view, round), compared lexicographically: view first, then round.
struct Rank {
    std::uint32_t view = 0;
    std::uint32_t round = 0;

    friend constexpr auto operator<=>(const Rank&, const Rank&) = default;
};

inline std::strong_ordering rank_compare(const Rank& a, const Rank& b) { return a <=> b; }

// Round-robin view leadership, fixed at bootstrap.
inline ReplicaId leader_of(std::uint32_t view, std::uint32_t n) { return view % n; }

inline constexpr std::int8_t kLevelSync = -1;
inline constexpr std::int8_t kLevelAsync1 = 1;
inline constexpr std::int8_t kLevelAsync2 = 2;

struct Block {
    BlockId id = 0;
    Rank rank;
    std::int8_t level = kLevelSync;  // -1 sync, 1/2 async heights
    BlockId parent = 0;
    ReplicaId proposer = 0;
    CmndsVector cmnds;

    // Id is a pure function of the remaining fields, so logically identical
    // blocks get identical ids on every replica.
    static BlockId derive_id(const Rank& rank, std::int8_t level, BlockId parent,
                             ReplicaId proposer, const CmndsVector& cmnds);
    static Block make(const Rank& rank, std::int8_t level, BlockId parent,
                      ReplicaId proposer, CmndsVector cmnds);
};

Block genesis_block(std::uint32_t n);

enum class ExtendsResult { kNo, kYes, kUnresolvedParent };

// Per-replica block storage with parent links. Single-writer: owned by one
// replica's execution stream, never shared across replicas.
class BlockStore {
  public:
    explicit BlockStore(std::uint32_t n);

    BlockId genesis_id() const { return genesis_id_; }
    const Block& genesis() const { return *find(genesis_id_); }

    // Returns true if newly inserted. Re-inserting the same id is a no-op.
    bool insert(const Block& b);
    bool contains(BlockId id) const { return blocks_.count(id) != 0; }
    const Block* find(BlockId id) const;
    std::size_t size() const { return blocks_.size(); }

    // True iff b lies on the parent path from a back to genesis (a == b counts).
    ExtendsResult extends(BlockId a, BlockId b) const;

  private:
    std::unordered_map<BlockId, Block> blocks_;
    BlockId genesis_id_ = 0;
};

}  // namespace mansim
