#pragma once

#include "statefuzz/DepGraph.h"
#include "statefuzz/Energy.h"
#include "statefuzz/MaskMut.h"
#include "statefuzz/Oracles.h"

#include <chrono>

namespace statefuzz {

struct CampaignConfig {
    uint64_t timeBudgetSeconds = 600;
    uint64_t energyBudget = 50000;  // total executions granted to the mutation stage
    uint64_t rngSeed = 1;
    uint32_t maxDup = 3;
    uint64_t w2Const = kW2Const;
    uint64_t refundNew = kRefundNew;
    size_t queueCap = 1024;
    size_t workers = 1;  // >1 parallelizes only order-independent batches
    bool noSeqMutation = false;
    bool noMask = false;
    bool noEnergy = false;
    bool noHarvest = false;
    OracleOptions oracle;
    VmOptions vm = defaultVmOptions();
};

struct RoundStats {
    uint64_t round = 0;
    uint64_t executions = 0;  // cumulative
    uint64_t coveredBranches = 0;
    double coveragePercent = 0.0;
};

struct CampaignReport {
    std::string contractName;
    uint64_t packageHash = 0;
    uint64_t rngSeed = 0;
    double branchCoveragePercent = 0.0;
    uint64_t totalBranches = 0;
    std::vector<std::string> coveredBranchIds;
    std::vector<Finding> findings;
    uint64_t executions = 0;
    uint64_t wallClockMs = 0;
    std::vector<RoundStats> perRound;

    /* wallClockMs is the only nondeterministic field; hashes for the
     * determinism contract are taken over toJson(false). */
    nlohmann::json toJson(bool includeWallClock = true) const;
    std::string seriesCsv() const;
    bool hasFindings() const { return !findings.empty(); }
};

/* Full fuzzing pipeline: dependency analysis, sequence ordering + mutation,
 * pre-fuzz branch weighting, then rounds of distance-feedback selection and
 * mask-gated mutation until the energy or time budget runs out. */
class Campaign {
public:
    Campaign(ContractPackage pkg, CampaignConfig cfg);

    CampaignReport run();

    /* introspection for dump flags and tests (valid after run()) */
    const ContractPackage& package() const { return pkg_; }
    const DependencyGraph& graph() const { return graph_; }
    const SequenceTemplate& sequenceTemplate() const { return tmpl_; }
    const BranchWeightTable& weights() const { return table_; }
    const SeedQueue& queue() const { return *queue_; }
    const InterestingTable& interesting() const { return interesting_; }
    const Vm& vm() const { return vm_; }

private:
    std::shared_ptr<Seed> makePreFuzzSeed() const;
    std::vector<std::shared_ptr<Seed>> initSeeds();
    Word drawValue();
    Word drawArg(VarTypeTag t);

    ExecutionOutcome executeCandidate(std::shared_ptr<Seed> cand, bool charge,
                                      SequenceResult* tracesOut = nullptr);
    ExecutionOutcome integrate(std::shared_ptr<Seed> cand, const SequenceResult& res, bool charge);
    void processOracles(const Seed& cand, const SequenceResult& res);
    void maybeRefresh();
    void pushRoundStats(uint64_t round);
    double coverageFraction() const;
    std::vector<std::shared_ptr<Seed>> admissionOrder() const;

    ContractPackage pkg_;
    CampaignConfig cfg_;
    Vm vm_;
    Rng rng_;
    uint64_t injBase_ = 0;

    DependencyGraph graph_;
    SequenceTemplate tmpl_;
    std::set<uint32_t> vuln_;
    InterestingTable interesting_;
    BranchWeightTable table_;
    std::unique_ptr<SeedQueue> queue_;

    uint64_t execOrdinal_ = 0;
    uint64_t executions_ = 0;
    uint64_t sliceLeft_ = 0;
    double lastRefreshCov_ = 0.0;
    bool everReleased_ = false;
    std::set<std::pair<BugClass, uint32_t>> findingKeys_;
    std::vector<Finding> findings_;
    std::string preSeedJson_;
    std::vector<RoundStats> perRound_;
    std::chrono::steady_clock::time_point deadline_;
};

struct ReplayResult {
    Seed seed;
    SequenceResult result;
    std::vector<Finding> findings;
};

/* Deterministic witness re-execution: same sequence, same injection seed,
 * same traces; runs every oracle over the result. Throws on schema or
 * package-hash mismatch. */
ReplayResult replaySeed(const ContractPackage& pkg, const std::string& seedJson,
                        const VmOptions& vmOpt, const OracleOptions& opt = {});

}  // namespace statefuzz
