#pragma once

#include "statefuzz/Corpus.h"
#include "statefuzz/Rng.h"

#include <functional>

namespace statefuzz {

enum class MutKind : uint8_t { O = 0, I = 1, R = 2, D = 3 };  // overwrite/insert/replace/delete
const char* mutKindName(MutKind k);

struct Mutation {
    MutKind x = MutKind::O;
    uint32_t n = 1;   // affected byte count
    uint32_t i = 0;   // anchor position
    Bytes payload;    // O/I/R carry n bytes; D carries none
};

/* Raw byte-stream edit; the result is re-canonicalized to the template's
 * fixed width by Seed::setStream before execution. */
Bytes applyMutation(const Bytes& t, const Mutation& m);

/* Per-position sets of permitted mutation kinds. An empty set marks a
 * critical position the gated loop must not touch. */
struct MutationMask {
    std::vector<uint8_t> perPosition;  // bit (1 << kind)

    explicit MutationMask(size_t len = 0) : perPosition(len, 0) {}
    void allow(size_t i, MutKind x) { perPosition[i] |= uint8_t(1u << unsigned(x)); }
    bool allows(size_t i, MutKind x) const {
        return i < perPosition.size() && (perPosition[i] >> unsigned(x)) & 1u;
    }
    /* true iff m.x is permitted at every position the mutation spans */
    bool okToMutate(const Mutation& m) const;
    std::string render() const;  // position × kind matrix for --dump-mask
};

/* Mutation payload dictionary: canonical boundary values plus (optionally)
 * constants harvested from PUSH operands. */
struct InterestingTable {
    std::vector<Word> values;
    static InterestingTable make(const ContractPackage& pkg, bool harvest);
};

/* Covered branches whose static nesting depth is ≥ 2. */
std::set<BranchId> nestedHit(const Seed& seed, const Cfg& cfg);

/* Execution service the campaign provides: run the candidate (stamping its
 * injection seed), evaluate it against current coverage, admit it to the
 * queue if it covers something new, and charge energy. */
struct ExecutionOutcome {
    std::shared_ptr<Seed> seed;  // with stats attached
    bool newCoverage = false;
};
using ExecuteFn = std::function<ExecutionOutcome(std::shared_ptr<Seed>)>;

struct MutationContext {
    const ContractPackage& pkg;
    const InterestingTable& table;
    ExecuteFn execute;
    std::function<uint64_t()> unitsLeft;  // remaining energy in the round slice

    /* test instrumentation (optional) */
    std::function<void(const Seed& parent, const MutationMask&, const Mutation&)> onMutant;
};

/* Probe pass: one probe per (kind, position) — exactly 4·|stream|
 * executions — with a single shared byte count n drawn up front.
 * A kind stays allowed at a position when its probe still hits every branch
 * in `nestedBranches` or moves strictly closer to some uncovered branch than
 * the parent was. */
MutationMask computeMask(const Seed& parent, const std::set<BranchId>& nestedBranches,
                         const std::set<BranchId>& uncovered, Rng& rng,
                         const MutationContext& ctx);

/* One mask-gated mutation pass over the queue in priority order: per
 * eligible seed, compute the mask, then sweep every
 * position × kind through the gate. Seeds that neither hit a nested branch
 * nor decreased a distance are skipped. Runs full passes until the slice is
 * spent or a pass executes nothing. Returns every candidate executed this
 * round (probes included) for the next round's seed selection. */
std::vector<std::shared_ptr<Seed>> mutationRound(SeedQueue& queue,
                                                 const std::vector<std::shared_ptr<Seed>>& order,
                                                 Rng& rng, const MutationContext& ctx);

/* Ablation loop (--no-mask): unguided random mutation — uniform random queue
 * seed, position, kind, and payload; no probes, no gating, no position sweep. */
std::vector<std::shared_ptr<Seed>> randomMutationRound(SeedQueue& queue, Rng& rng,
                                                       const MutationContext& ctx);

}  // namespace statefuzz
