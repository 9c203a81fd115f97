#include "statefuzz/Oracles.h"

#include <algorithm>

using namespace std;

namespace statefuzz {

const char* bugClassName(BugClass c) {
    switch (c) {
        case BugClass::BD: return "BD";
        case BugClass::UD: return "UD";
        case BugClass::EF: return "EF";
        case BugClass::IO: return "IO";
        case BugClass::RE: return "RE";
        case BugClass::US: return "US";
        case BugClass::SE: return "SE";
        case BugClass::TO: return "TO";
        case BugClass::UE: return "UE";
    }
    return "??";
}

nlohmann::json Finding::toJson() const {
    return {{"bugClass", bugClassName(bugClass)},
            {"pc", pc},
            {"witness", witness},
            {"evidence", evidence}};
}

namespace {

bool isCompare(Op op) { return op == Op::LT || op == Op::GT || op == Op::EQ; }

set<uint32_t> wrapOrigins(const TagSet& ts) {
    set<uint32_t> out;
    for (auto& tag : ts.tags())
        if (tag.source == TaintSource::Wrap) out.insert(tag.originPc);
    return out;
}

}  // namespace

vector<RawFinding> checkBd(const ExecutionTrace& t) {
    vector<RawFinding> out;
    for (auto& c : t.cmpEvents)
        if (isCompare(c.op) &&
            (c.aTags.has(TaintSource::BlockState) || c.bTags.has(TaintSource::BlockState)))
            out.push_back({BugClass::BD, c.pc, {{"sink", "compare"}}});
    for (auto& b : t.branchEvents)
        if (b.condTags.has(TaintSource::BlockState))
            out.push_back({BugClass::BD, b.pc, {{"sink", "jumpi"}}});
    for (auto& c : t.callEvents)
        if (c.kind == Op::CALL && (c.targetTags.has(TaintSource::BlockState) ||
                                   c.valueTags.has(TaintSource::BlockState)))
            out.push_back({BugClass::BD, c.pc, {{"sink", "call"}}});
    return out;
}

vector<RawFinding> checkUd(const ExecutionTrace& t) {
    vector<RawFinding> out;
    for (auto& c : t.callEvents) {
        if (c.kind != Op::DELEGATECALL) continue;
        if (!c.targetTags.has(TaintSource::Param)) continue;
        bool guarded = any_of(t.branchEvents.begin(), t.branchEvents.end(), [&](auto& b) {
            return b.depth == c.depth && b.pc < c.pc && b.condTags.has(TaintSource::Caller);
        });
        if (!guarded)
            out.push_back({BugClass::UD, c.pc, {{"function", t.input.function}}});
    }
    return out;
}

vector<RawFinding> checkIo(const ExecutionTrace& t) {
    vector<RawFinding> out;
    for (auto& s : t.storageEvents)
        if (s.isStore)
            for (uint32_t pc : wrapOrigins(s.tags))
                out.push_back({BugClass::IO, pc, {{"sink", "store"}, {"sinkPc", s.pc}}});
    for (auto& c : t.callEvents)
        if (c.kind == Op::CALL)
            for (uint32_t pc : wrapOrigins(c.valueTags))
                out.push_back({BugClass::IO, pc, {{"sink", "call-value"}, {"sinkPc", c.pc}}});
    for (auto& b : t.branchEvents)
        for (uint32_t pc : wrapOrigins(b.condTags))
            out.push_back({BugClass::IO, pc, {{"sink", "jumpi"}, {"sinkPc", b.pc}}});
    return out;
}

vector<RawFinding> checkRe(const ExecutionTrace& t) {
    vector<RawFinding> out;
    const CallEvent* outer = nullptr;  // call events are recorded chronologically
    for (auto& c : t.callEvents) {
        if (c.depth == 0 && c.kind == Op::CALL && c.gasAbove2300 && c.succeeded)
            outer = &c;
        else if (c.depth == 1 && c.kind == Op::CALL && c.value > 0 && c.succeeded && outer)
            out.push_back({BugClass::RE, outer->pc, {{"reentrantCallPc", c.pc}}});
    }
    return out;
}

vector<RawFinding> checkSe(const ExecutionTrace& t, const OracleOptions& opt) {
    vector<RawFinding> out;
    for (auto& b : t.branchEvents) {
        int32_t idx = b.condProvenance;
        while (idx >= 0 && t.cmpEvents[size_t(idx)].op == Op::ISZERO)
            idx = t.cmpEvents[size_t(idx)].operandProvenance;
        if (idx < 0) continue;
        auto& root = t.cmpEvents[size_t(idx)];
        if (!root.aTags.has(TaintSource::Balance) && !root.bTags.has(TaintSource::Balance))
            continue;
        bool hit = root.op == Op::EQ ||
                   (opt.seIncludeOrdering && (root.op == Op::LT || root.op == Op::GT));
        if (hit)
            out.push_back({BugClass::SE, root.pc, {{"jumpiPc", b.pc}}});
    }
    return out;
}

vector<RawFinding> checkUe(const ExecutionTrace& t) {
    vector<RawFinding> out;
    for (auto& c : t.callEvents)
        if (c.kind == Op::CALL && !c.succeeded && !c.resultChecked)
            out.push_back({BugClass::UE, c.pc, {{"function", t.input.function}}});
    return out;
}

vector<RawFinding> checkUs(const ExecutionTrace& t, const Word& attacker, const Word& deployer) {
    vector<RawFinding> out;
    if (deployer == attacker) return out;  // attacker owns the contract: destruction is theirs
    if (t.input.sender != attacker) return out;
    for (auto& c : t.callEvents)
        if (c.kind == Op::SELFDESTRUCT)
            out.push_back({BugClass::US, c.pc, {{"function", t.input.function}}});
    return out;
}

vector<RawFinding> checkTo(const ExecutionTrace& t) {
    vector<RawFinding> out;
    for (auto& b : t.branchEvents) {
        if (b.depth != 0 || !b.condTags.has(TaintSource::Origin)) continue;
        /* forward-only jumps: within a frame, pc order is execution order */
        bool controls =
            any_of(t.storageEvents.begin(), t.storageEvents.end(),
                   [&](auto& s) { return s.isStore && s.depth == 0 && s.pc > b.pc; }) ||
            any_of(t.callEvents.begin(), t.callEvents.end(), [&](auto& c) {
                return c.kind == Op::CALL && c.value > 0 && c.depth == 0 && c.pc > b.pc;
            });
        if (controls)
            out.push_back({BugClass::TO, b.pc, {{"function", t.input.function}}});
    }
    return out;
}

optional<RawFinding> checkEf(const ContractPackage& pkg, bool everReleased) {
    const FunctionAbi* payable = nullptr;
    for (auto& f : pkg.functions)
        if (f.payable) {
            payable = &f;
            break;
        }
    if (!payable || everReleased) return nullopt;

    set<uint32_t> blocks;
    for (auto& f : pkg.functions) {
        auto r = pkg.cfg.reachableBlocks(pkg.cfg.blockOf(f.entryOffset));
        blocks.insert(r.begin(), r.end());
    }
    for (auto& ins : pkg.cfg.instructions())
        if ((ins.op == Op::CALL || ins.op == Op::DELEGATECALL || ins.op == Op::SELFDESTRUCT) &&
            blocks.count(pkg.cfg.blockOf(ins.pc)))
            return nullopt;

    return RawFinding{BugClass::EF, payable->entryOffset, {{"payableFunction", payable->name}}};
}

vector<RawFinding> checkTrace(const ExecutionTrace& t, const Word& attacker, const Word& deployer,
                              const OracleOptions& opt) {
    vector<RawFinding> out;
    auto take = [&](vector<RawFinding> v) {
        out.insert(out.end(), make_move_iterator(v.begin()), make_move_iterator(v.end()));
    };
    take(checkBd(t));
    take(checkUd(t));
    take(checkIo(t));
    take(checkRe(t));
    take(checkSe(t, opt));
    take(checkUe(t));
    take(checkUs(t, attacker, deployer));
    take(checkTo(t));
    return out;
}

}  // namespace statefuzz
