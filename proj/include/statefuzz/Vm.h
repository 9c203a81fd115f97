#pragma once

#include "statefuzz/Package.h"
#include "statefuzz/Rng.h"
#include "statefuzz/Word.h"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace statefuzz {

/* ---- taint ----
 * Word-granular tags flowing from environment sources to sinks. Propagation
 * is forward-only through arithmetic/comparison/logic; a storage slot carries
 * the tags of the last value written into it, so an untainted store clears
 * the slot. Wrap tags mark values produced by overflowing arithmetic. */
enum class TaintSource : uint8_t {
    BlockState,  // TIMESTAMP / NUMBER
    Balance,     // BALANCE
    Origin,      // ORIGIN
    CallResult,  // success flag of CALL / DELEGATECALL
    Caller,      // CALLER
    Param,       // function argument
    Wrap,        // result of wrapped ADD/SUB/MUL
};

struct TaintTag {
    TaintSource source;
    uint32_t originPc = 0;
    int32_t aux = -1;  // CallResult: sequence-wide call ordinal; Param: argument index
    auto operator<=>(const TaintTag&) const = default;
};

/* Small sorted tag set with set-union semantics. */
class TagSet {
public:
    void add(const TaintTag& t);
    void merge(const TagSet& o);
    bool has(TaintSource s) const;
    const std::vector<TaintTag>& tags() const { return tags_; }
    bool empty() const { return tags_.empty(); }

private:
    std::vector<TaintTag> tags_;
};

/* ---- transaction input ---- */

struct TxInput {
    std::string function;
    Word sender = 0;
    Word value = 0;
    std::vector<Word> args;
};

/* Canonical byte encoding: [senderIndex:1][value:32][arg:32]... where the
 * sender byte indexes the configured account set modulo its size. Decoding
 * any byte string of the right width yields a valid input; bool arguments
 * normalize to 0/1. */
size_t encodedTxWidth(const FunctionAbi& fn);
Bytes encodeTx(const TxInput& tx, const FunctionAbi& fn, const std::vector<Word>& accounts);
TxInput decodeTx(const uint8_t* data, size_t len, const FunctionAbi& fn,
                 const std::vector<Word>& accounts);

/* ---- trace ---- */

struct StepRecord {
    uint32_t pc = 0;
    Op op = Op::STOP;
    std::optional<Word> stackTop;  // after the instruction
};

struct CmpEvent {
    uint32_t pc = 0;
    Op op = Op::LT;  // LT/GT/EQ/ISZERO
    Word a = 0, b = 0;
    TagSet aTags, bTags;
    int32_t operandProvenance = -1;  // ISZERO chaining: cmp event that produced `a`
    int depth = 0;
};

struct BranchEvent {
    BranchId branchId;
    uint32_t pc = 0;  // the JUMPI
    bool taken = false;
    int32_t condProvenance = -1;  // index into cmpEvents, -1 when the condition is opaque
    TagSet condTags;
    int depth = 0;
};

struct StorageEvent {
    uint32_t pc = 0;
    bool isStore = false;
    uint32_t slot = 0;
    std::optional<Word> key;  // mapping accesses
    Word value = 0;
    TagSet tags;
    int depth = 0;
};

struct CallEvent {
    uint32_t pc = 0;
    Op kind = Op::CALL;  // CALL / DELEGATECALL / SELFDESTRUCT
    Word target = 0;
    Word value = 0;
    bool gasAbove2300 = false;
    bool succeeded = false;
    bool resultChecked = false;  // success flag reached a JUMPI before tx end
    TagSet targetTags, valueTags;
    int depth = 0;
    int32_t ordinal = -1;  // sequence-wide call ordinal
};

struct WrapEvent {
    uint32_t pc = 0;
    Op op = Op::ADD;
    Word a = 0, b = 0, result = 0;
    int depth = 0;
};

struct ExecutionTrace {
    TxInput input;
    bool reverted = false;
    std::vector<StepRecord> steps;
    std::vector<CmpEvent> cmpEvents;
    std::vector<BranchEvent> branchEvents;
    std::vector<StorageEvent> storageEvents;
    std::vector<CallEvent> callEvents;
    std::vector<WrapEvent> wrapEvents;
    /* Block-start pcs visited, one path per invocation frame (0 = the
     * transaction's own frame, 1 = re-entrant frame). Consecutive pairs are
     * the exercised control-flow edges. */
    std::vector<std::vector<uint32_t>> blockPaths;

    std::string renderText() const;  // one event per line
    std::string toJson() const;
};

std::set<BranchId> coverageOf(const ExecutionTrace& trace);
std::set<BranchId> coverageOf(const std::vector<ExecutionTrace>& traces);

/* ---- interpreter ---- */

struct VmOptions {
    std::vector<Word> accounts;    // sender set; index attackerIndex is the adversary
    size_t attackerIndex = 2;
    uint64_t stepLimit = 1 << 20;  // hard cap per transaction, traps into revert
    Word initialBalance = 0;       // contract balance before the constructor runs
    uint64_t baseTimestamp = 1700000000;
    uint64_t baseBlockNumber = 1;

    Word attacker() const { return accounts.at(attackerIndex); }
};

VmOptions defaultVmOptions();

struct SequenceResult {
    std::vector<ExecutionTrace> traces;  // one per transaction, in order
};

class Vm {
public:
    Vm(const ContractPackage& pkg, VmOptions opt);

    /* Runs a transaction sequence against fresh contract state. Every
     * external call consumes one coin flip from an RNG seeded with
     * `injectionSeed` and fails when the flip says so, so replaying the same
     * (sequence, seed) pair reproduces the trace bit for bit. A reverted
     * transaction leaves storage and balance untouched; execution of the
     * remaining transactions continues. */
    SequenceResult executeSequence(const std::vector<TxInput>& seq, uint64_t injectionSeed) const;

    const ContractPackage& package() const { return pkg_; }
    const VmOptions& options() const { return opt_; }

private:
    const ContractPackage& pkg_;
    VmOptions opt_;
};

}  // namespace statefuzz
