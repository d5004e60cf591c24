#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "mansim/core.hpp"

namespace mansim::mandator {

using RequestId = std::uint64_t;

struct MandatorBatch {
    ReplicaId creator = 0;
    std::uint32_t round = 0;  // position in the creator's chain, 1-based
    std::vector<RequestId> requests;  // empty only for heartbeat fillers
    std::uint64_t batch_id = 0;

    static std::uint64_t derive_id(ReplicaId creator, std::uint32_t round,
                                   const std::vector<RequestId>& requests);
    static MandatorBatch make(ReplicaId creator, std::uint32_t round,
                              std::vector<RequestId> requests);
};

struct Config {
    std::uint32_t n = 0;
    std::uint32_t f = 0;
    bool selective_broadcast = true;

    std::uint32_t quorum() const { return n - f; }
};

// Message intents returned to the driver. The driver owns actual delivery.
struct BatchIntent {
    MandatorBatch batch;
    std::vector<ReplicaId> targets;  // excludes self; self stores at creation
    bool rebroadcast = false;
};
struct VoteIntent {  // acknowledgement, broadcast so every replica tracks watermarks
    ReplicaId creator = 0;
    std::uint32_t round = 0;
};
struct PullIntent {
    ReplicaId target = 0;
    ReplicaId creator = 0;
    std::uint32_t round = 0;
};
struct WriteComplete {  // round confirmed: n-f acknowledgements observed
    ReplicaId creator = 0;
    std::uint32_t round = 0;
};
struct MissingBatch {
    ReplicaId creator = 0;
    std::uint32_t round = 0;
    friend bool operator==(const MissingBatch&, const MissingBatch&) = default;
};

// Per-replica dissemination state: n append-only chains of request batches,
// acknowledgement tallies, confirmed watermarks and the committed-cut
// watermark. Owned by a single replica's execution stream.
class ChainsState {
  public:
    ChainsState(Config cfg, ReplicaId self);

    struct CreateResult {
        BatchIntent intent;
        VoteIntent self_vote;                 // broadcast like any other ack
        std::vector<WriteComplete> completed; // n=1 degenerate case
    };
    // Appends the next batch to the own chain. Round r requires round r-1
    // confirmed (or r == 1); returns nullopt when not ready yet.
    std::optional<CreateResult> create_batch(std::vector<RequestId> requests);

    enum class StoreStatus { kStored, kDuplicate, kConflict };
    struct OnBatchResult {
        StoreStatus status = StoreStatus::kStored;
        std::optional<VoteIntent> vote;       // at most one per (creator, round) ever
        std::vector<WriteComplete> completed; // from recording the own ack
    };
    OnBatchResult on_batch(const MandatorBatch& b);

    // Records an acknowledgement; buffers votes for batches not yet received.
    std::vector<WriteComplete> on_vote(ReplicaId voter, ReplicaId creator, std::uint32_t round);

    // The proposer's view of write-complete prefixes.
    CmndsVector current_cut() const { return confirmed_; }

    struct CommitResult {
        std::vector<MandatorBatch> batches;   // creator asc, round asc
        std::vector<MissingBatch> missing;    // non-empty => nothing was applied
    };
    // Expands the delta between the committed watermark and `cut` into the
    // execution order. Componentwise-max semantics: stale cuts are harmless.
    CommitResult commit_cut(const CmndsVector& cut);

    // Self plus the most up-to-date peers, at least a majority. With
    // selective broadcast off, all n replicas.
    std::vector<ReplicaId> selective_targets() const;

    std::vector<PullIntent> fetch_missing(const std::vector<MissingBatch>& wanted);

    // Oldest own round lacking a quorum, for timed rebroadcast. 0 when none.
    std::uint32_t oldest_unconfirmed_own_round() const;
    const MandatorBatch* batch(ReplicaId creator, std::uint32_t round) const;
    bool has_batch(ReplicaId creator, std::uint32_t round) const;

    std::uint32_t chain_len(ReplicaId creator) const;
    std::uint32_t own_next_round() const { return chain_len(self_) + 1; }
    const CmndsVector& confirmed() const { return confirmed_; }
    const CmndsVector& committed_cut() const { return committed_; }
    std::set<ReplicaId> voters(ReplicaId creator, std::uint32_t round) const;
    const Config& config() const { return cfg_; }
    ReplicaId self() const { return self_; }

  private:
    std::vector<WriteComplete> advance_confirmed(ReplicaId creator);

    Config cfg_;
    ReplicaId self_;
    // Sparse per-creator chains; gaps are legal above the confirmed watermark.
    std::vector<std::map<std::uint32_t, MandatorBatch>> chains_;
    std::map<std::pair<ReplicaId, std::uint32_t>, std::set<ReplicaId>> votes_;
    CmndsVector confirmed_;
    CmndsVector committed_;
    // Last ack round received from each peer for the own chain; drives the
    // selective-broadcast ranking.
    std::vector<std::uint32_t> last_ack_round_;
    std::set<std::pair<ReplicaId, std::uint32_t>> ack_sent_;
    std::map<std::pair<ReplicaId, std::uint32_t>, std::uint32_t> fetch_attempts_;
};

}  // namespace mansim::mandator
