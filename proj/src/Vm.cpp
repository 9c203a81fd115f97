#include "statefuzz/Vm.h"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <sstream>
#include <stdexcept>

using namespace std;
using json = nlohmann::ordered_json;

namespace statefuzz {

void TagSet::add(const TaintTag& t) {
    auto it = lower_bound(tags_.begin(), tags_.end(), t);
    if (it == tags_.end() || *it != t) tags_.insert(it, t);
}

void TagSet::merge(const TagSet& o) {
    for (auto& t : o.tags_) add(t);
}

bool TagSet::has(TaintSource s) const {
    return any_of(tags_.begin(), tags_.end(), [&](auto& t) { return t.source == s; });
}

/* ---- tx codec ---- */

size_t encodedTxWidth(const FunctionAbi& fn) {
    return 1 + kWordBytes + kWordBytes * fn.params.size();
}

Bytes encodeTx(const TxInput& tx, const FunctionAbi& fn, const vector<Word>& accounts) {
    Bytes out;
    uint8_t idx = 0;
    for (size_t i = 0; i < accounts.size(); ++i)
        if (accounts[i] == tx.sender) idx = uint8_t(i);
    out.push_back(idx);
    auto val = wordToBytes(tx.value);
    out.insert(out.end(), val.begin(), val.end());
    for (size_t i = 0; i < fn.params.size(); ++i) {
        Word a = i < tx.args.size() ? tx.args[i] : Word(0);
        auto enc = wordToBytes(a);
        out.insert(out.end(), enc.begin(), enc.end());
    }
    return out;
}

TxInput decodeTx(const uint8_t* data, size_t len, const FunctionAbi& fn,
                 const vector<Word>& accounts) {
    TxInput tx;
    tx.function = fn.name;
    auto at = [&](size_t off) { return off < len ? data[off] : uint8_t(0); };
    tx.sender = accounts.empty() ? Word(0) : accounts[at(0) % accounts.size()];
    uint8_t buf[kWordBytes];
    auto word = [&](size_t off) {
        for (size_t i = 0; i < kWordBytes; ++i) buf[i] = at(off + i);
        return wordFromBytes(buf, kWordBytes);
    };
    tx.value = word(1);
    for (size_t i = 0; i < fn.params.size(); ++i) {
        Word a = word(1 + kWordBytes + i * kWordBytes);
        if (fn.params[i].second == VarTypeTag::Bool) a = a != 0 ? 1 : 0;
        tx.args.push_back(a);
    }
    return tx;
}

/* ---- coverage ---- */

set<BranchId> coverageOf(const ExecutionTrace& trace) {
    set<BranchId> cov;
    for (auto& path : trace.blockPaths)
        for (size_t i = 0; i + 1 < path.size(); ++i) cov.insert({path[i], path[i + 1]});
    return cov;
}

set<BranchId> coverageOf(const vector<ExecutionTrace>& traces) {
    set<BranchId> cov;
    for (auto& t : traces) {
        auto c = coverageOf(t);
        cov.insert(c.begin(), c.end());
    }
    return cov;
}

/* ---- interpreter ---- */

namespace {

struct Cell {
    Word v = 0;
    TagSet tags;
    int32_t cmpProv = -1;  // index of the cmp event that produced this value
};

struct ContractState {
    map<uint32_t, Word> scalars;
    map<pair<uint32_t, Word>, Word> mapped;
    map<uint32_t, TagSet> scalarTags;
    map<pair<uint32_t, Word>, TagSet> mappedTags;
    Word balance = 0;
    bool destroyed = false;
};

struct BlockEnv {
    Word timestamp = 0;
    Word number = 0;
};

enum class FrameStatus { Done, Reverted, Destroyed };

class Executor {
public:
    Executor(const ContractPackage& pkg, const VmOptions& opt, uint64_t injectionSeed)
        : pkg_(pkg), opt_(opt), inj_(injectionSeed) {
        for (const auto& ins : pkg_.cfg.instructions()) byPc_[ins.pc] = &ins;
    }

    SequenceResult run(const vector<TxInput>& seq) {
        SequenceResult res;
        state_.balance = opt_.initialBalance;
        for (size_t i = 0; i < seq.size(); ++i) {
            env_.timestamp = Word(opt_.baseTimestamp + 13 * i);
            env_.number = Word(opt_.baseBlockNumber + i);
            res.traces.push_back(runTx(seq[i]));
        }
        return res;
    }

private:
    const ContractPackage& pkg_;
    const VmOptions& opt_;
    Rng inj_;
    map<uint32_t, const Instruction*> byPc_;
    ContractState state_;
    BlockEnv env_;
    bool deployFailed_ = false;
    int32_t callOrdinal_ = 0;

    ExecutionTrace* tr_ = nullptr;
    uint64_t stepsLeft_ = 0;

    ExecutionTrace runTx(const TxInput& tx) {
        ExecutionTrace trace;
        trace.input = tx;
        const FunctionAbi* fn = pkg_.findFunction(tx.function);
        if (!fn || state_.destroyed || deployFailed_ || (tx.value != 0 && !fn->payable)) {
            trace.reverted = true;
            if (fn && fn->isConstructor) deployFailed_ = true;
            return trace;
        }
        tr_ = &trace;
        stepsLeft_ = opt_.stepLimit;
        ContractState snap = state_;
        state_.balance += tx.value;
        FrameStatus st = runFrame(*fn, tx, 0);
        if (st == FrameStatus::Reverted) {
            state_ = snap;
            trace.reverted = true;
            /* A failed constructor means no contract exists; the rest of the
             * sequence has nothing to call. */
            if (fn->isConstructor) deployFailed_ = true;
        }
        markCheckedResults(trace);
        tr_ = nullptr;
        return trace;
    }

    /* Success flags that flowed into some JUMPI count as checked. Flags may
     * round-trip through storage inside the transaction; tags carry the
     * sequence-wide call ordinal so only this transaction's events match. */
    void markCheckedResults(ExecutionTrace& trace) {
        for (auto& be : trace.branchEvents)
            for (auto& tag : be.condTags.tags())
                if (tag.source == TaintSource::CallResult)
                    for (auto& ce : trace.callEvents)
                        if (ce.ordinal == tag.aux) ce.resultChecked = true;
    }

    FrameStatus runFrame(const FunctionAbi& fn, const TxInput& tx, int depth) {
        vector<Cell> stack;
        size_t frameIdx = tr_->blockPaths.size();
        tr_->blockPaths.emplace_back();
        uint32_t pc = fn.entryOffset;
        tr_->blockPaths[frameIdx].push_back(pc);

        auto pop = [&]() -> Cell {
            if (stack.empty()) throw FrameStatus::Reverted;
            Cell c = move(stack.back());
            stack.pop_back();
            return c;
        };
        auto trap = [&]() -> FrameStatus { return FrameStatus::Reverted; };

        try {
            while (true) {
                if (stepsLeft_ == 0) return trap();
                --stepsLeft_;
                auto found = byPc_.find(pc);
                if (found == byPc_.end()) return trap();
                const Instruction* insn = found->second;
                uint32_t next = pc + insn->size;
                bool jumped = false;

                switch (insn->op) {
                    case Op::STOP:
                        recordStep(pc, insn->op, stack);
                        return FrameStatus::Done;
                    case Op::REVERT:
                        recordStep(pc, insn->op, stack);
                        return FrameStatus::Reverted;

                    case Op::PUSH: {
                        Cell c;
                        c.v = insn->imm;
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::POP:
                        pop();
                        break;
                    case Op::DUP: {
                        size_t k = insn->arg;
                        if (k == 0 || k > stack.size()) return trap();
                        stack.push_back(stack[stack.size() - k]);
                        break;
                    }
                    case Op::SWAP: {
                        size_t k = insn->arg;
                        if (k == 0 || k + 1 > stack.size()) return trap();
                        swap(stack[stack.size() - 1], stack[stack.size() - 1 - k]);
                        break;
                    }

                    case Op::ADD:
                    case Op::SUB:
                    case Op::MUL: {
                        Cell b = pop(), a = pop();
                        Cell r;
                        bool wrapped = false;
                        if (insn->op == Op::ADD) {
                            r.v = a.v + b.v;
                            wrapped = r.v < a.v;
                        } else if (insn->op == Op::SUB) {
                            r.v = a.v - b.v;
                            wrapped = b.v > a.v;
                        } else {
                            r.v = a.v * b.v;
                            wrapped = a.v != 0 && r.v / a.v != b.v;
                        }
                        r.tags = a.tags;
                        r.tags.merge(b.tags);
                        if (wrapped) {
                            tr_->wrapEvents.push_back({pc, insn->op, a.v, b.v, r.v, depth});
                            r.tags.add({TaintSource::Wrap, pc, -1});
                        }
                        stack.push_back(move(r));
                        break;
                    }

                    case Op::LT:
                    case Op::GT:
                    case Op::EQ: {
                        Cell b = pop(), a = pop();
                        Cell r;
                        bool t = insn->op == Op::LT   ? a.v < b.v
                                 : insn->op == Op::GT ? a.v > b.v
                                                      : a.v == b.v;
                        r.v = t ? 1 : 0;
                        r.tags = a.tags;
                        r.tags.merge(b.tags);
                        r.cmpProv = int32_t(tr_->cmpEvents.size());
                        tr_->cmpEvents.push_back(
                            {pc, insn->op, a.v, b.v, a.tags, b.tags, -1, depth});
                        stack.push_back(move(r));
                        break;
                    }
                    case Op::ISZERO: {
                        Cell a = pop();
                        Cell r;
                        r.v = a.v == 0 ? 1 : 0;
                        r.tags = a.tags;
                        r.cmpProv = int32_t(tr_->cmpEvents.size());
                        tr_->cmpEvents.push_back(
                            {pc, Op::ISZERO, a.v, 0, a.tags, TagSet{}, a.cmpProv, depth});
                        stack.push_back(move(r));
                        break;
                    }
                    case Op::AND:
                    case Op::OR: {
                        Cell b = pop(), a = pop();
                        Cell r;
                        bool av = a.v != 0, bv = b.v != 0;
                        r.v = (insn->op == Op::AND ? av && bv : av || bv) ? 1 : 0;
                        r.tags = a.tags;
                        r.tags.merge(b.tags);
                        stack.push_back(move(r));
                        break;
                    }
                    case Op::NOT: {
                        Cell a = pop();
                        Cell r;
                        r.v = a.v == 0 ? 1 : 0;
                        r.tags = a.tags;
                        stack.push_back(move(r));
                        break;
                    }

                    case Op::CALLER: {
                        Cell c;
                        c.v = tx.sender;
                        c.tags.add({TaintSource::Caller, pc, -1});
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::ORIGIN: {
                        Cell c;
                        /* single-hop transactions: origin == sender */
                        c.v = tx.sender;
                        c.tags.add({TaintSource::Origin, pc, -1});
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::CALLVALUE: {
                        Cell c;
                        c.v = tx.value;
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::PARAM: {
                        size_t k = insn->arg;
                        if (k >= tx.args.size()) return trap();
                        Cell c;
                        c.v = tx.args[k];
                        c.tags.add({TaintSource::Param, pc, int32_t(k)});
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::TIMESTAMP: {
                        Cell c;
                        c.v = env_.timestamp;
                        c.tags.add({TaintSource::BlockState, pc, -1});
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::NUMBER: {
                        Cell c;
                        c.v = env_.number;
                        c.tags.add({TaintSource::BlockState, pc, -1});
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::BALANCE: {
                        Cell c;
                        c.v = state_.balance;
                        c.tags.add({TaintSource::Balance, pc, -1});
                        stack.push_back(move(c));
                        break;
                    }

                    case Op::SLOAD: {
                        Cell slot = pop();
                        uint32_t s = uint32_t(slot.v);
                        Cell c;
                        if (auto it = state_.scalars.find(s); it != state_.scalars.end())
                            c.v = it->second;
                        if (auto it = state_.scalarTags.find(s); it != state_.scalarTags.end())
                            c.tags = it->second;
                        tr_->storageEvents.push_back(
                            {pc, false, s, nullopt, c.v, c.tags, depth});
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::SSTORE: {
                        Cell slot = pop();
                        Cell val = pop();
                        uint32_t s = uint32_t(slot.v);
                        state_.scalars[s] = val.v;
                        state_.scalarTags[s] = val.tags;
                        tr_->storageEvents.push_back(
                            {pc, true, s, nullopt, val.v, val.tags, depth});
                        break;
                    }
                    case Op::MAPLOAD: {
                        Cell slot = pop();
                        Cell key = pop();
                        uint32_t s = uint32_t(slot.v);
                        Cell c;
                        auto k = make_pair(s, key.v);
                        if (auto it = state_.mapped.find(k); it != state_.mapped.end())
                            c.v = it->second;
                        if (auto it = state_.mappedTags.find(k); it != state_.mappedTags.end())
                            c.tags = it->second;
                        tr_->storageEvents.push_back({pc, false, s, key.v, c.v, c.tags, depth});
                        stack.push_back(move(c));
                        break;
                    }
                    case Op::MAPSTORE: {
                        Cell slot = pop();
                        Cell key = pop();
                        Cell val = pop();
                        uint32_t s = uint32_t(slot.v);
                        auto k = make_pair(s, key.v);
                        state_.mapped[k] = val.v;
                        state_.mappedTags[k] = val.tags;
                        tr_->storageEvents.push_back({pc, true, s, key.v, val.v, val.tags, depth});
                        break;
                    }

                    case Op::JUMP: {
                        Cell t = pop();
                        uint32_t dst = uint32_t(t.v);
                        if (!isBlockStart(dst)) return trap();
                        recordStep(pc, insn->op, stack);
                        tr_->blockPaths[frameIdx].push_back(dst);
                        pc = dst;
                        jumped = true;
                        break;
                    }
                    case Op::JUMPI: {
                        Cell t = pop();
                        Cell cond = pop();
                        uint32_t dst = uint32_t(t.v);
                        bool taken = cond.v != 0;
                        uint32_t tgt = taken ? dst : next;
                        if (!isBlockStart(tgt)) return trap();
                        uint32_t src = pkg_.cfg.blockOf(pc);
                        tr_->branchEvents.push_back(
                            {{src, tgt}, pc, taken, cond.cmpProv, cond.tags, depth});
                        recordStep(pc, insn->op, stack);
                        tr_->blockPaths[frameIdx].push_back(tgt);
                        pc = tgt;
                        jumped = true;
                        break;
                    }

                    case Op::CALL: {
                        Cell target = pop();
                        Cell value = pop();
                        bool gasHigh = insn->arg != 0;
                        bool allowed = inj_.coin();
                        bool ok = allowed && value.v <= state_.balance;
                        if (ok) state_.balance -= value.v;
                        int32_t ord = callOrdinal_++;
                        size_t evIdx = tr_->callEvents.size();
                        tr_->callEvents.push_back({pc, Op::CALL, target.v, value.v, gasHigh, ok,
                                                   false, target.tags, value.tags, depth, ord});
                        if (ok && gasHigh && depth == 0 && target.v == opt_.attacker()) {
                            /* adversarial callee re-enters the same function */
                            ContractState snap = state_;
                            FrameStatus inner = runFrame(fn, tx, depth + 1);
                            if (inner != FrameStatus::Done) state_ = snap;
                        }
                        Cell r;
                        r.v = ok ? 1 : 0;
                        r.tags.add({TaintSource::CallResult, pc, ord});
                        /* may have reallocated */
                        (void)evIdx;
                        stack.push_back(move(r));
                        break;
                    }
                    case Op::DELEGATECALL: {
                        Cell target = pop();
                        int32_t ord = callOrdinal_++;
                        tr_->callEvents.push_back({pc, Op::DELEGATECALL, target.v, 0, true, true,
                                                   false, target.tags, TagSet{}, depth, ord});
                        Cell r;
                        r.v = 1;
                        r.tags.add({TaintSource::CallResult, pc, ord});
                        stack.push_back(move(r));
                        break;
                    }
                    case Op::SELFDESTRUCT: {
                        Cell target = pop();
                        int32_t ord = callOrdinal_++;
                        tr_->callEvents.push_back({pc, Op::SELFDESTRUCT, target.v, state_.balance,
                                                   false, true, false, target.tags, TagSet{},
                                                   depth, ord});
                        state_.balance = 0;
                        state_.destroyed = true;
                        recordStep(pc, insn->op, stack);
                        return FrameStatus::Destroyed;
                    }

                    default:
                        return trap();
                }
                if (!jumped) {
                    recordStep(pc, insn->op, stack);
                    if (isBlockStart(next)) tr_->blockPaths[frameIdx].push_back(next);
                    pc = next;
                }
            }
        } catch (FrameStatus s) {
            return s;
        }
    }

    bool isBlockStart(uint32_t pc) const { return pkg_.cfg.isBlockStart(pc); }

    void recordStep(uint32_t pc, Op op, const vector<Cell>& stack) {
        StepRecord s;
        s.pc = pc;
        s.op = op;
        if (!stack.empty()) s.stackTop = stack.back().v;
        tr_->steps.push_back(move(s));
    }
};

const char* sourceName(TaintSource s) {
    switch (s) {
        case TaintSource::BlockState: return "blockstate";
        case TaintSource::Balance: return "balance";
        case TaintSource::Origin: return "origin";
        case TaintSource::CallResult: return "callresult";
        case TaintSource::Caller: return "caller";
        case TaintSource::Param: return "param";
        case TaintSource::Wrap: return "wrap";
    }
    return "?";
}

json tagsJson(const TagSet& tags) {
    json arr = json::array();
    for (auto& t : tags.tags()) {
        json o;
        o["source"] = sourceName(t.source);
        o["originPc"] = t.originPc;
        if (t.aux >= 0) o["aux"] = t.aux;
        arr.push_back(o);
    }
    return arr;
}

string tagsText(const TagSet& tags) {
    if (tags.empty()) return "";
    string s = " tags={";
    bool first = true;
    for (auto& t : tags.tags()) {
        if (!first) s += ",";
        first = false;
        s += sourceName(t.source);
    }
    s += "}";
    return s;
}

}  // namespace

string ExecutionTrace::renderText() const {
    ostringstream os;
    os << "tx " << input.function << " sender=" << wordToString(input.sender)
       << " value=" << wordToString(input.value);
    for (auto& a : input.args) os << " arg=" << wordToString(a);
    os << (reverted ? " [reverted]\n" : "\n");
    for (size_t f = 0; f < blockPaths.size(); ++f) {
        os << "  frame " << f << " path:";
        for (auto b : blockPaths[f]) os << " " << b;
        os << "\n";
    }
    for (auto& e : branchEvents)
        os << "  branch pc=" << e.pc << " " << branchIdToString(e.branchId)
           << (e.taken ? " taken" : " fallthrough") << " depth=" << e.depth
           << tagsText(e.condTags) << "\n";
    for (auto& e : cmpEvents)
        os << "  cmp pc=" << e.pc << " " << opName(e.op) << " a=" << wordToString(e.a)
           << " b=" << wordToString(e.b) << "\n";
    for (auto& e : storageEvents)
        os << "  " << (e.isStore ? "store" : "load") << " pc=" << e.pc << " slot=" << e.slot
           << (e.key ? " key=" + wordToString(*e.key) : "") << " value=" << wordToString(e.value)
           << tagsText(e.tags) << "\n";
    for (auto& e : callEvents)
        os << "  " << opName(e.kind) << " pc=" << e.pc << " target=" << wordToString(e.target)
           << " value=" << wordToString(e.value) << (e.succeeded ? " ok" : " failed")
           << (e.resultChecked ? " checked" : " unchecked") << " depth=" << e.depth << "\n";
    for (auto& e : wrapEvents)
        os << "  wrap pc=" << e.pc << " " << opName(e.op) << " a=" << wordToString(e.a)
           << " b=" << wordToString(e.b) << " result=" << wordToString(e.result) << "\n";
    return os.str();
}

string ExecutionTrace::toJson() const {
    json o;
    o["function"] = input.function;
    o["sender"] = wordToString(input.sender);
    o["value"] = wordToString(input.value);
    json args = json::array();
    for (auto& a : input.args) args.push_back(wordToString(a));
    o["args"] = args;
    o["reverted"] = reverted;
    json paths = json::array();
    for (auto& p : blockPaths) paths.push_back(p);
    o["blockPaths"] = paths;
    json branches = json::array();
    for (auto& e : branchEvents) {
        json b;
        b["pc"] = e.pc;
        b["edge"] = branchIdToString(e.branchId);
        b["taken"] = e.taken;
        b["depth"] = e.depth;
        b["tags"] = tagsJson(e.condTags);
        branches.push_back(b);
    }
    o["branches"] = branches;
    json cmps = json::array();
    for (auto& e : cmpEvents) {
        json c;
        c["pc"] = e.pc;
        c["op"] = opName(e.op);
        c["a"] = wordToString(e.a);
        c["b"] = wordToString(e.b);
        cmps.push_back(c);
    }
    o["comparisons"] = cmps;
    json stores = json::array();
    for (auto& e : storageEvents) {
        json s;
        s["pc"] = e.pc;
        s["kind"] = e.isStore ? "store" : "load";
        s["slot"] = e.slot;
        if (e.key) s["key"] = wordToString(*e.key);
        s["value"] = wordToString(e.value);
        s["tags"] = tagsJson(e.tags);
        stores.push_back(s);
    }
    o["storage"] = stores;
    json calls = json::array();
    for (auto& e : callEvents) {
        json c;
        c["pc"] = e.pc;
        c["kind"] = opName(e.kind);
        c["target"] = wordToString(e.target);
        c["value"] = wordToString(e.value);
        c["gasAbove2300"] = e.gasAbove2300;
        c["succeeded"] = e.succeeded;
        c["resultChecked"] = e.resultChecked;
        c["depth"] = e.depth;
        calls.push_back(c);
    }
    o["calls"] = calls;
    json wraps = json::array();
    for (auto& e : wrapEvents) {
        json w;
        w["pc"] = e.pc;
        w["op"] = opName(e.op);
        w["a"] = wordToString(e.a);
        w["b"] = wordToString(e.b);
        w["result"] = wordToString(e.result);
        wraps.push_back(w);
    }
    o["wraps"] = wraps;
    return o.dump(2);
}

VmOptions defaultVmOptions() {
    VmOptions o;
    o.accounts = {Word("0x1000"), Word("0x2000"), Word("0x3000")};
    o.attackerIndex = 2;
    /* Pre-existing deposits: lets a re-entrant callee drain more than its own
     * deposit instead of failing on an empty account. */
    o.initialBalance = Word("10000000000000000000");  // 10 ether
    return o;
}

Vm::Vm(const ContractPackage& pkg, VmOptions opt) : pkg_(pkg), opt_(move(opt)) {
    if (opt_.accounts.empty() || opt_.attackerIndex >= opt_.accounts.size())
        throw runtime_error("vm: bad account configuration");
}

SequenceResult Vm::executeSequence(const vector<TxInput>& seq, uint64_t injectionSeed) const {
    Executor ex(pkg_, opt_, injectionSeed);
    return ex.run(seq);
}

}  // namespace statefuzz
