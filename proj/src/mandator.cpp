#include "mansim/mandator.hpp"

#include <algorithm>

namespace mansim::mandator {

std::uint64_t MandatorBatch::derive_id(ReplicaId creator, std::uint32_t round,
                                       const std::vector<RequestId>& requests) {
    std::uint64_t h = 0x6d616e73696d0002ULL;
    h = hash_combine(h, creator);
    h = hash_combine(h, round);
    h = hash_combine(h, requests.size());
    for (RequestId r : requests) h = hash_combine(h, r);
    if (h == 0) h = 1;
    return h;
}

MandatorBatch MandatorBatch::make(ReplicaId creator, std::uint32_t round,
                                  std::vector<RequestId> requests) {
    MandatorBatch b;
    b.creator = creator;
    b.round = round;
    b.requests = std::move(requests);
    b.batch_id = derive_id(b.creator, b.round, b.requests);
    return b;
}

ChainsState::ChainsState(Config cfg, ReplicaId self)
    : cfg_(cfg),
      self_(self),
      chains_(cfg.n),
      confirmed_(cfg.n, 0),
      committed_(cfg.n, 0),
      last_ack_round_(cfg.n, 0) {}

std::uint32_t ChainsState::chain_len(ReplicaId creator) const {
    const auto& c = chains_[creator];
    return c.empty() ? 0 : c.rbegin()->first;
}

bool ChainsState::has_batch(ReplicaId creator, std::uint32_t round) const {
    return chains_[creator].count(round) != 0;
}

const MandatorBatch* ChainsState::batch(ReplicaId creator, std::uint32_t round) const {
    auto it = chains_[creator].find(round);
    return it == chains_[creator].end() ? nullptr : &it->second;
}

std::set<ReplicaId> ChainsState::voters(ReplicaId creator, std::uint32_t round) const {
    auto it = votes_.find({creator, round});
    return it == votes_.end() ? std::set<ReplicaId>{} : it->second;
}

std::vector<WriteComplete> ChainsState::advance_confirmed(ReplicaId creator) {
    std::vector<WriteComplete> out;
    while (true) {
        std::uint32_t next = confirmed_[creator] + 1;
        auto it = votes_.find({creator, next});
        if (it == votes_.end() || it->second.size() < cfg_.quorum()) break;
        confirmed_[creator] = next;
        out.push_back(WriteComplete{creator, next});
    }
    return out;
}

std::vector<WriteComplete> ChainsState::on_vote(ReplicaId voter, ReplicaId creator,
                                                std::uint32_t round) {
    votes_[{creator, round}].insert(voter);
    if (creator == self_ && voter != self_)
        last_ack_round_[voter] = std::max(last_ack_round_[voter], round);
    return advance_confirmed(creator);
}

std::optional<ChainsState::CreateResult> ChainsState::create_batch(
    std::vector<RequestId> requests) {
    std::uint32_t round = own_next_round();
    if (round > 1 && confirmed_[self_] < round - 1) return std::nullopt;  // not ready

    MandatorBatch b = MandatorBatch::make(self_, round, std::move(requests));
    chains_[self_].emplace(round, b);

    CreateResult res;
    res.self_vote = VoteIntent{self_, round};
    ack_sent_.insert({self_, round});
    res.completed = on_vote(self_, self_, round);

    res.intent.batch = std::move(b);
    for (ReplicaId t : selective_targets())
        if (t != self_) res.intent.targets.push_back(t);
    return res;
}

ChainsState::OnBatchResult ChainsState::on_batch(const MandatorBatch& b) {
    OnBatchResult res;
    auto it = chains_[b.creator].find(b.round);
    if (it != chains_[b.creator].end()) {
        if (it->second.batch_id != b.batch_id) {
            // A different payload at an occupied slot breaks the
            // no-equivocation model; the run must stop.
            res.status = StoreStatus::kConflict;
            return res;
        }
        res.status = StoreStatus::kDuplicate;
        return res;
    }
    chains_[b.creator].emplace(b.round, b);
    res.status = StoreStatus::kStored;
    if (ack_sent_.insert({b.creator, b.round}).second) {
        res.vote = VoteIntent{b.creator, b.round};
        res.completed = on_vote(self_, b.creator, b.round);
    }
    return res;
}

ChainsState::CommitResult ChainsState::commit_cut(const CmndsVector& cut) {
    CommitResult res;
    for (ReplicaId c = 0; c < cfg_.n; ++c) {
        std::uint32_t upto = std::max(cut[c], committed_[c]);
        for (std::uint32_t r = committed_[c] + 1; r <= upto; ++r)
            if (!has_batch(c, r)) res.missing.push_back(MissingBatch{c, r});
    }
    if (!res.missing.empty()) return res;

    for (ReplicaId c = 0; c < cfg_.n; ++c) {
        std::uint32_t upto = std::max(cut[c], committed_[c]);
        for (std::uint32_t r = committed_[c] + 1; r <= upto; ++r)
            res.batches.push_back(*batch(c, r));
        committed_[c] = upto;
    }
    return res;
}

std::vector<ReplicaId> ChainsState::selective_targets() const {
    std::vector<ReplicaId> out;
    if (!cfg_.selective_broadcast) {
        for (ReplicaId i = 0; i < cfg_.n; ++i) out.push_back(i);
        return out;
    }
    std::uint32_t majority = (cfg_.n + 2) / 2;  // ceil((n+1)/2)
    std::vector<ReplicaId> peers;
    for (ReplicaId i = 0; i < cfg_.n; ++i)
        if (i != self_) peers.push_back(i);
    std::stable_sort(peers.begin(), peers.end(), [this](ReplicaId a, ReplicaId b) {
        if (last_ack_round_[a] != last_ack_round_[b])
            return last_ack_round_[a] > last_ack_round_[b];
        return a < b;
    });
    out.push_back(self_);
    for (std::uint32_t i = 0; i + 1 < majority && i < peers.size(); ++i)
        out.push_back(peers[i]);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<PullIntent> ChainsState::fetch_missing(const std::vector<MissingBatch>& wanted) {
    std::vector<PullIntent> out;
    for (const MissingBatch& m : wanted) {
        if (has_batch(m.creator, m.round)) continue;
        // Creator first; retries cycle through replicas whose ack proves
        // possession.
        std::vector<ReplicaId> candidates{m.creator};
        for (ReplicaId v : voters(m.creator, m.round))
            if (v != m.creator && v != self_) candidates.push_back(v);
        std::uint32_t attempt = fetch_attempts_[{m.creator, m.round}]++;
        ReplicaId target = candidates[attempt % candidates.size()];
        out.push_back(PullIntent{target, m.creator, m.round});
    }
    return out;
}

std::uint32_t ChainsState::oldest_unconfirmed_own_round() const {
    std::uint32_t len = chain_len(self_);
    if (confirmed_[self_] >= len) return 0;
    return confirmed_[self_] + 1;
}

}  // namespace mansim::mandator
