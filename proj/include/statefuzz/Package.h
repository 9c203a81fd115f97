#pragma once

#include "statefuzz/Bytecode.h"
#include "statefuzz/Word.h"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace statefuzz {

/* Mirrors the frontend's VarType so package consumers do not need the AST. */
enum class VarTypeTag { Uint256, Address, Bool, MappingAddrToUint };

const char* varTypeTagName(VarTypeTag t);
std::optional<VarTypeTag> varTypeTagFromName(const std::string& s);

struct FunctionAbi {
    std::string name;
    std::vector<std::pair<std::string, VarTypeTag>> params;
    bool payable = false;
    uint32_t entryOffset = 0;
    bool isConstructor = false;
};

struct StateVarInfo {
    std::string name;
    VarTypeTag type = VarTypeTag::Uint256;
    uint32_t slot = 0;
};

enum class FactKind { Write, Read, ReadInBranchCondition, RawSelfDependency };

const char* factKindName(FactKind k);

struct AccessFact {
    std::string function;
    std::string stateVar;
    FactKind kind;
    bool operator<(const AccessFact& o) const {
        return std::tie(function, stateVar, kind) < std::tie(o.function, o.stateVar, o.kind);
    }
    bool operator==(const AccessFact& o) const {
        return function == o.function && stateVar == o.stateVar && kind == o.kind;
    }
};

/* Everything the fuzzer needs to run a compiled contract: bytecode, ABI,
 * storage layout, state-access facts, and the derived CFG. */
struct ContractPackage {
    std::string name;
    Bytes bytecode;
    std::vector<FunctionAbi> functions;  // declaration order; constructor included
    std::vector<StateVarInfo> stateVars;
    std::vector<AccessFact> accessFacts;  // sorted
    Cfg cfg;                              // rebuilt on load, derived from bytecode + entries

    const FunctionAbi* findFunction(const std::string& fn) const;
    const FunctionAbi& constructor() const;

    /* Function whose code range contains `pc` (functions are laid out
     * contiguously in declaration order). */
    const FunctionAbi& functionAt(uint32_t pc) const;

    bool hasFact(const std::string& fn, const std::string& var, FactKind kind) const;

    /* Content hash over bytecode and ABI; replay refuses a seed whose
     * recorded hash differs. */
    uint64_t hash() const;

    std::string toJson() const;
    static ContractPackage fromJson(const std::string& text);

    void rebuildCfg();
};

}  // namespace statefuzz
