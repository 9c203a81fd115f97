#include "statefuzz/Bytecode.h"

#include <algorithm>
#include <stdexcept>

using namespace std;

namespace statefuzz {

const char* opName(Op op) {
    switch (op) {
        case Op::STOP: return "STOP";
        case Op::ADD: return "ADD";
        case Op::SUB: return "SUB";
        case Op::MUL: return "MUL";
        case Op::LT: return "LT";
        case Op::GT: return "GT";
        case Op::EQ: return "EQ";
        case Op::ISZERO: return "ISZERO";
        case Op::AND: return "AND";
        case Op::OR: return "OR";
        case Op::NOT: return "NOT";
        case Op::CALLER: return "CALLER";
        case Op::CALLVALUE: return "CALLVALUE";
        case Op::ORIGIN: return "ORIGIN";
        case Op::TIMESTAMP: return "TIMESTAMP";
        case Op::NUMBER: return "NUMBER";
        case Op::BALANCE: return "BALANCE";
        case Op::PARAM: return "PARAM";
        case Op::POP: return "POP";
        case Op::SLOAD: return "SLOAD";
        case Op::SSTORE: return "SSTORE";
        case Op::MAPLOAD: return "MAPLOAD";
        case Op::MAPSTORE: return "MAPSTORE";
        case Op::JUMP: return "JUMP";
        case Op::JUMPI: return "JUMPI";
        case Op::PUSH: return "PUSH";
        case Op::DUP: return "DUP";
        case Op::SWAP: return "SWAP";
        case Op::CALL: return "CALL";
        case Op::DELEGATECALL: return "DELEGATECALL";
        case Op::SELFDESTRUCT: return "SELFDESTRUCT";
        case Op::REVERT: return "REVERT";
    }
    return "???";
}

bool isTerminator(Op op) {
    return op == Op::JUMP || op == Op::JUMPI || op == Op::STOP || op == Op::REVERT ||
           op == Op::SELFDESTRUCT;
}

void Assembler::emit(Op op) { code_.push_back(uint8_t(op)); }

void Assembler::emitArg(Op op, uint8_t arg) {
    code_.push_back(uint8_t(op));
    code_.push_back(arg);
}

void Assembler::emitPush(const Word& w) {
    auto full = wordToBytes(w);
    size_t firstNonZero = 0;
    while (firstNonZero < kWordBytes - 1 && full[firstNonZero] == 0) ++firstNonZero;
    uint8_t n = uint8_t(kWordBytes - firstNonZero);
    code_.push_back(uint8_t(Op::PUSH));
    code_.push_back(n);
    code_.insert(code_.end(), full.begin() + ptrdiff_t(firstNonZero), full.end());
}

size_t Assembler::emitPushLabel() {
    code_.push_back(uint8_t(Op::PUSH));
    code_.push_back(4);
    patchAt_.push_back(uint32_t(code_.size()));
    for (int i = 0; i < 4; ++i) code_.push_back(0);
    return patchAt_.size() - 1;
}

void Assembler::bindLabel(size_t patchId, uint32_t target) {
    uint32_t at = patchAt_.at(patchId);
    code_[at] = uint8_t(target >> 24);
    code_[at + 1] = uint8_t(target >> 16);
    code_[at + 2] = uint8_t(target >> 8);
    code_[at + 3] = uint8_t(target);
}

vector<Instruction> disassemble(const Bytes& code) {
    vector<Instruction> out;
    size_t pc = 0;
    while (pc < code.size()) {
        Instruction ins;
        ins.pc = uint32_t(pc);
        ins.op = Op(code[pc]);
        switch (ins.op) {
            case Op::PUSH: {
                if (pc + 1 >= code.size()) throw runtime_error("truncated PUSH");
                uint8_t n = code[pc + 1];
                if (n == 0 || n > kWordBytes || pc + 2 + n > code.size())
                    throw runtime_error("bad PUSH length");
                ins.imm = wordFromBytes(code.data() + pc + 2, n);
                ins.size = 2 + n;
                break;
            }
            case Op::PARAM:
            case Op::DUP:
            case Op::SWAP:
            case Op::CALL: {
                if (pc + 1 >= code.size()) throw runtime_error("truncated instruction");
                ins.arg = code[pc + 1];
                ins.size = 2;
                break;
            }
            default:
                ins.size = 1;
        }
        out.push_back(ins);
        pc += ins.size;
    }
    return out;
}

string branchIdToString(const BranchId& b) {
    return to_string(b.first) + "->" + to_string(b.second);
}

Cfg::Cfg(const Bytes& code, const vector<uint32_t>& entryPoints) {
    insns_ = disassemble(code);
    for (size_t i = 0; i < insns_.size(); ++i) insnIndex_[insns_[i].pc] = i;

    /* Static jump targets: the code generator always emits PUSH target
     * directly in front of JUMP/JUMPI. */
    map<uint32_t, uint32_t> jumpTargetOf;  // pc of JUMP/JUMPI -> target
    set<uint32_t> leaders(entryPoints.begin(), entryPoints.end());
    for (size_t i = 0; i < insns_.size(); ++i) {
        const auto& ins = insns_[i];
        if ((ins.op == Op::JUMP || ins.op == Op::JUMPI) && i > 0 && insns_[i - 1].op == Op::PUSH) {
            uint32_t target = uint32_t(insns_[i - 1].imm);
            jumpTargetOf[ins.pc] = target;
            leaders.insert(target);
        }
        if (isTerminator(ins.op) && i + 1 < insns_.size()) leaders.insert(insns_[i + 1].pc);
    }

    /* Build the blocks between consecutive leaders. */
    vector<uint32_t> leaderList(leaders.begin(), leaders.end());
    for (size_t li = 0; li < leaderList.size(); ++li) {
        uint32_t start = leaderList[li];
        uint32_t end = li + 1 < leaderList.size() ? leaderList[li + 1] : uint32_t(code.size());
        if (!insnIndex_.count(start)) throw runtime_error("block leader not on instruction boundary");
        BasicBlock bb;
        bb.start = start;
        bb.end = end;
        size_t idx = insnIndex_[start];
        size_t lastIdx = idx;
        while (lastIdx + 1 < insns_.size() && insns_[lastIdx + 1].pc < end) ++lastIdx;
        bb.terminator = insns_[lastIdx].op;
        bb.terminatorPc = insns_[lastIdx].pc;
        if (auto it = jumpTargetOf.find(bb.terminatorPc); it != jumpTargetOf.end())
            bb.jumpTarget = it->second;
        switch (bb.terminator) {
            case Op::JUMP:
                if (bb.jumpTarget) bb.successors.push_back(*bb.jumpTarget);
                break;
            case Op::JUMPI:
                if (bb.jumpTarget) bb.successors.push_back(*bb.jumpTarget);
                if (end < code.size()) bb.successors.push_back(end);
                break;
            case Op::STOP:
            case Op::REVERT:
            case Op::SELFDESTRUCT:
                break;
            default:
                if (end < code.size()) bb.successors.push_back(end);  // falls through
        }
        blocks_[start] = bb;
    }

    for (const auto& [start, bb] : blocks_)
        for (uint32_t succ : bb.successors) edges_.push_back({start, succ});
    sort(edges_.begin(), edges_.end());
    edges_.erase(unique(edges_.begin(), edges_.end()), edges_.end());

    computeDominators(entryPoints);
}

uint32_t Cfg::blockOf(uint32_t pc) const {
    auto it = blocks_.upper_bound(pc);
    if (it == blocks_.begin()) throw runtime_error("pc before first block");
    --it;
    return it->first;
}

const Instruction& Cfg::instructionAt(uint32_t pc) const {
    auto it = insnIndex_.find(pc);
    if (it == insnIndex_.end()) throw runtime_error("no instruction at pc");
    return insns_[it->second];
}

void Cfg::computeDominators(const vector<uint32_t>& entryPoints) {
    /* Iterative dataflow per entry; a block unreachable from every entry keeps
     * an empty dominator set and depth 0. Predecessor map first. */
    map<uint32_t, vector<uint32_t>> preds;
    for (const auto& [start, bb] : blocks_)
        for (uint32_t succ : bb.successors) preds[succ].push_back(start);

    set<uint32_t> allBlocks;
    for (const auto& [start, bb] : blocks_) allBlocks.insert(start);
    set<uint32_t> entries(entryPoints.begin(), entryPoints.end());

    for (uint32_t b : allBlocks) {
        if (entries.count(b))
            dominators_[b] = {b};
        else
            dominators_[b] = allBlocks;
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (uint32_t b : allBlocks) {
            if (entries.count(b)) continue;
            set<uint32_t> inter;
            bool first = true;
            for (uint32_t p : preds[b]) {
                if (first) {
                    inter = dominators_[p];
                    first = false;
                } else {
                    set<uint32_t> tmp;
                    set_intersection(inter.begin(), inter.end(), dominators_[p].begin(),
                                     dominators_[p].end(), inserter(tmp, tmp.begin()));
                    inter = move(tmp);
                }
            }
            if (first) inter.clear();  // unreachable
            else inter.insert(b);
            if (inter != dominators_[b]) {
                dominators_[b] = move(inter);
                changed = true;
            }
        }
    }
}

uint32_t Cfg::nestingDepth(const BranchId& edge) const {
    auto it = dominators_.find(edge.first);
    if (it == dominators_.end()) return 0;
    uint32_t depth = 0;
    for (uint32_t dom : it->second) {
        auto bit = blocks_.find(dom);
        if (bit != blocks_.end() && bit->second.terminator == Op::JUMPI) ++depth;
    }
    return depth;
}

set<uint32_t> Cfg::reachableBlocks(uint32_t fromBlock) const {
    set<uint32_t> seen;
    vector<uint32_t> work{fromBlock};
    while (!work.empty()) {
        uint32_t b = work.back();
        work.pop_back();
        if (!seen.insert(b).second) continue;
        auto it = blocks_.find(b);
        if (it == blocks_.end()) continue;
        for (uint32_t s : it->second.successors) work.push_back(s);
    }
    return seen;
}

vector<Word> harvestConstants(const Bytes& code) {
    auto insns = disassemble(code);
    vector<Word> out;
    set<Word> seen;
    for (size_t i = 0; i < insns.size(); ++i) {
        if (insns[i].op != Op::PUSH) continue;
        if (i + 1 < insns.size()) {
            Op next = insns[i + 1].op;
            /* Jump targets and storage-slot selectors are plumbing, not data. */
            if (next == Op::JUMP || next == Op::JUMPI || next == Op::SLOAD ||
                next == Op::SSTORE || next == Op::MAPLOAD || next == Op::MAPSTORE)
                continue;
        }
        if (seen.insert(insns[i].imm).second) out.push_back(insns[i].imm);
    }
    return out;
}

vector<uint32_t> vulnerableInstructionOffsets(const Bytes& code) {
    auto insns = disassemble(code);
    vector<uint32_t> out;
    for (const auto& ins : insns) {
        switch (ins.op) {
            case Op::CALL:
            case Op::DELEGATECALL:
            case Op::SELFDESTRUCT:
            case Op::ADD:
            case Op::SUB:
            case Op::MUL:
            case Op::TIMESTAMP:
            case Op::NUMBER:
            case Op::ORIGIN:
            case Op::BALANCE:
                out.push_back(ins.pc);
                break;
            default:
                break;
        }
    }
    return out;
}

}  // namespace statefuzz
