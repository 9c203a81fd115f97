#pragma once

#include "statefuzz/Corpus.h"

#include <json.hpp>

namespace statefuzz {

constexpr uint64_t kW2Const = 4;    // flat bonus for branches guarding risky instructions
constexpr uint64_t kRefundNew = 2;  // units given back when an execution covers something new

struct BranchWeight {
    uint64_t nestedScore = 0;  // position of the branch along the pre-fuzz path's guard chain
    uint64_t w1 = 0;           // nesting weight (= nestedScore)
    uint64_t w2 = 0;           // vulnerability weight ∈ {0, w2Const}
    uint64_t allocated = 0;
    uint64_t spent = 0;

    uint64_t weight() const { return w1 + w2; }
    uint64_t remaining() const { return allocated - spent; }
};

/* One row per static CFG edge. Rows the pre-fuzz path never exercised keep
 * weight 0 but still receive a floor allocation so no branch starves. */
struct BranchWeightTable {
    std::map<BranchId, BranchWeight> rows;

    uint64_t unitsLeft() const;
    nlohmann::json toJson() const;
};

/* Over-approximate forward closure: every instruction pc reachable in the
 * CFG from `fromBlock`, ignoring branch conditions. */
std::set<uint32_t> prefixInference(const ContractPackage& pkg, uint32_t fromBlock);

/* Walks the pre-fuzz traces in transaction order keeping one running guard
 * counter: each branch event bumps it and raises that edge's nestedScore to
 * the counter (w1 follows). w2 is set when the closure from the branching
 * block contains a risky instruction offset. */
BranchWeightTable branchWeighted(const ContractPackage& pkg,
                                 const std::vector<ExecutionTrace>& preTraces,
                                 const std::set<uint32_t>& vulnerableOffsets,
                                 uint64_t w2Const = kW2Const);

/* Proportional split: share(b) = 1 + w1 + w2, floored, remainder to the
 * highest-weight row (ties to the lowest branch id), then a repair pass
 * lifts zero rows to 1 while budget ≥ |rows|. Σ allocated == budget. */
void allocate(BranchWeightTable& table, uint64_t totalBudget);

/* Accounting rule for one execution: −1 unit, +refund on new coverage,
 * clamped to [0, allocatedCap]. */
uint64_t updateEnergy(uint64_t energy, bool newCoverage, uint64_t allocatedCap,
                      uint64_t refundNew = kRefundNew);

/* Spends one unit against `target`, falling back to the lowest branch id
 * with units left when the target is exhausted or absent. Returns the row
 * actually charged (nullopt when the table is empty/spent). */
std::optional<BranchId> chargeSpent(BranchWeightTable& table, const std::optional<BranchId>& target);

/* Gives back up to refundNew of the units charged to `charged`. */
void refundSpent(BranchWeightTable& table, const BranchId& charged, uint64_t refundNew);

/* Queue ordering for mutation rounds: descending max weight over each
 * seed's covered branches, ties broken by admission order. */
std::vector<std::shared_ptr<Seed>> seedPriority(const SeedQueue& queue,
                                                const BranchWeightTable& table);

}  // namespace statefuzz
