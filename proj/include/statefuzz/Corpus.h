#pragma once

#include "statefuzz/DepGraph.h"
#include "statefuzz/Vm.h"

#include <memory>
#include <optional>

namespace statefuzz {

/* How close a trace came to flipping a branch; 0 means covered/satisfied. */
struct Distance {
    Word magnitude = 0;
    bool satisfied() const { return magnitude == 0; }
    bool operator==(const Distance& o) const { return magnitude == o.magnitude; }
    bool operator<(const Distance& o) const { return magnitude < o.magnitude; }
};

/* One corpus entry: a transaction sequence as canonical per-tx byte strings,
 * plus the stats of its most recent execution and the reason it entered the
 * queue. The injection seed pins the call-failure coin flips, so re-running
 * the seed reproduces its traces exactly. */
struct Seed {
    SequenceTemplate tmpl;
    std::vector<Bytes> rawTxs;  // one canonical-width encoding per call
    uint64_t injectionSeed = 0;

    /* last-execution stats */
    std::set<BranchId> coveredBranches;
    std::map<BranchId, Distance> minDistances;  // per branch uncovered at evaluation time
    bool hitNestedBranch = false;

    /* admission metadata */
    bool decreasedDistance = false;
    std::optional<BranchId> targetBranch;
    uint64_t admissionOrdinal = 0;

    Bytes stream() const;  // concatenation of rawTxs
    /* Splits a flat stream back into per-tx encodings at the fixed widths,
     * padding with zeros or truncating so every tx keeps its canonical width. */
    void setStream(const Bytes& stream, const ContractPackage& pkg);
    std::vector<TxInput> decode(const ContractPackage& pkg,
                                const std::vector<Word>& accounts) const;

    std::string toJson(const ContractPackage& pkg) const;
    static Seed fromJson(const std::string& text, const ContractPackage& pkg);
};

size_t seedStreamWidth(const SequenceTemplate& tmpl, const ContractPackage& pkg);

/* Distance of this trace to the (uncovered) branch `b`, following the
 * condition's comparison provenance; absent when the owning JUMPI never ran. */
std::optional<Distance> branchDistance(const ExecutionTrace& trace, const BranchId& b,
                                       const Cfg& cfg);
std::optional<Distance> branchDistance(const std::vector<ExecutionTrace>& traces,
                                       const BranchId& b, const Cfg& cfg);

/* Fills coveredBranches / minDistances / hitNestedBranch from an execution.
 * Distances are computed for every branch in `uncovered`. */
void evaluateSeed(Seed& seed, const std::vector<ExecutionTrace>& traces,
                  const ContractPackage& pkg, const std::set<BranchId>& uncovered);

class SeedQueue {
public:
    explicit SeedQueue(std::set<BranchId> allBranches, size_t cap = 1024);

    const std::vector<std::shared_ptr<Seed>>& seeds() const { return seeds_; }
    const std::set<BranchId>& globalCoverage() const { return covered_; }
    const std::set<BranchId>& allBranches() const { return all_; }
    std::set<BranchId> uncovered() const;
    const std::map<BranchId, Distance>& bestDistances() const { return best_; }
    bool contains(const std::shared_ptr<Seed>& s) const;

    /* Admission: records metadata, assigns the ordinal, absorbs the seed's
     * coverage, evicts the weakest seed when over capacity. Returns false for
     * duplicates. */
    bool admit(const std::shared_ptr<Seed>& s, std::optional<BranchId> target, bool decreased);
    void absorbCoverage(const std::set<BranchId>& cov);
    void noteDistance(const BranchId& b, const Distance& d);

private:
    void evict();

    std::vector<std::shared_ptr<Seed>> seeds_;
    std::set<BranchId> all_;
    std::set<BranchId> covered_;
    std::map<BranchId, Distance> best_;  // best distance seen for still-uncovered branches
    size_t cap_;
    uint64_t nextOrdinal_ = 0;
};

/* Branch-distance-feedback selection over one executed batch: admits every
 * seed with new coverage (earlier seed wins ties), then for each uncovered
 * branch admits the batch's minimum-distance seed. */
void selectSeeds(SeedQueue& queue, const std::vector<std::shared_ptr<Seed>>& executed);

}  // namespace statefuzz
