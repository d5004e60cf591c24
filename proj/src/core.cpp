#include "mansim/core.hpp"

namespace mansim {

BlockId Block::derive_id(const Rank& rank, std::int8_t level, BlockId parent,
                         ReplicaId proposer, const CmndsVector& cmnds) {
    std::uint64_t h = 0x6d616e73696d0001ULL;  // domain tag
    h = hash_combine(h, rank.view);
    h = hash_combine(h, rank.round);
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(level)));
    h = hash_combine(h, parent);
    h = hash_combine(h, proposer);
    h = hash_combine(h, cmnds.size());
    for (std::uint32_t c : cmnds) h = hash_combine(h, c);
    if (h == 0) h = 1;  // 0 is the null/absent id
    return h;
}

Block Block::make(const Rank& rank, std::int8_t level, BlockId parent,
                  ReplicaId proposer, CmndsVector cmnds) {
    Block b;
    b.rank = rank;
    b.level = level;
    b.parent = parent;
    b.proposer = proposer;
    b.cmnds = std::move(cmnds);
    b.id = derive_id(b.rank, b.level, b.parent, b.proposer, b.cmnds);
    return b;
}

Block genesis_block(std::uint32_t n) {
    return Block::make(Rank{0, 0}, kLevelSync, 0, 0, CmndsVector(n, 0));
}

BlockStore::BlockStore(std::uint32_t n) {
    Block g = genesis_block(n);
    genesis_id_ = g.id;
    blocks_.emplace(g.id, std::move(g));
}

bool BlockStore::insert(const Block& b) {
    return blocks_.emplace(b.id, b).second;
}

const Block* BlockStore::find(BlockId id) const {
    auto it = blocks_.find(id);
    return it == blocks_.end() ? nullptr : &it->second;
}

ExtendsResult BlockStore::extends(BlockId a, BlockId b) const {
    BlockId cur = a;
    while (true) {
        if (cur == b) return ExtendsResult::kYes;
        const Block* blk = find(cur);
        if (blk == nullptr) return ExtendsResult::kUnresolvedParent;
        if (blk->id == genesis_id_) return ExtendsResult::kNo;
        cur = blk->parent;
    }
}

}  // namespace mansim
