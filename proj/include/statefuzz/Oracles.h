#pragma once

#include "statefuzz/Vm.h"

#include <json.hpp>

namespace statefuzz {

/* Bug classes, in report order:
 *   BD block-state dependence        UD unprotected delegate call
 *   EF frozen funds                  IO integer wraparound
 *   RE reentrancy                    US unprotected self-destruct
 *   SE strict balance equality       TO origin-based authorization
 *   UE unchecked call result */
enum class BugClass : uint8_t { BD, UD, EF, IO, RE, US, SE, TO, UE };
const char* bugClassName(BugClass c);

/* Checker output before the campaign attaches the witnessing seed. */
struct RawFinding {
    BugClass bugClass = BugClass::BD;
    uint32_t pc = 0;
    nlohmann::json evidence;
};

struct Finding {
    BugClass bugClass = BugClass::BD;
    uint32_t pc = 0;
    nlohmann::json witness;  // serialized seed whose replay re-triggers the bug
    nlohmann::json evidence;

    nlohmann::json toJson() const;
};

struct OracleOptions {
    bool seIncludeOrdering = false;  // widen the balance-equality oracle to LT/GT
};

/* Per-trace checkers. Each is a pure function of the recorded events; a
 * reverted transaction still carries its events, and the checkers rely on
 * recorded flags (e.g. resultChecked) rather than final state. */
std::vector<RawFinding> checkBd(const ExecutionTrace& t);
std::vector<RawFinding> checkUd(const ExecutionTrace& t);
std::vector<RawFinding> checkIo(const ExecutionTrace& t);
std::vector<RawFinding> checkRe(const ExecutionTrace& t);
std::vector<RawFinding> checkSe(const ExecutionTrace& t, const OracleOptions& opt = {});
std::vector<RawFinding> checkUe(const ExecutionTrace& t);
std::vector<RawFinding> checkUs(const ExecutionTrace& t, const Word& attacker,
                                const Word& deployer);
std::vector<RawFinding> checkTo(const ExecutionTrace& t);

/* Campaign-level: fires when the contract can receive value through a
 * payable function but no releasing instruction (CALL, DELEGATECALL,
 * SELFDESTRUCT) is statically reachable or was ever executed. */
std::optional<RawFinding> checkEf(const ContractPackage& pkg, bool everReleased);

/* All per-trace oracles in one pass (EF excluded — it is campaign-level). */
std::vector<RawFinding> checkTrace(const ExecutionTrace& t, const Word& attacker,
                                   const Word& deployer, const OracleOptions& opt = {});

}  // namespace statefuzz
