#pragma once

#include "statefuzz/Word.h"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace statefuzz {

/* Stack-machine instruction set. PUSH carries a length byte plus big-endian
 * immediate; PARAM/DUP/SWAP carry a one-byte index; CALL carries a one-byte
 * flag for whether it forwards enough gas for the callee to run code. */
enum class Op : uint8_t {
    STOP = 0x00,
    ADD = 0x01,
    SUB = 0x02,
    MUL = 0x03,
    LT = 0x10,
    GT = 0x11,
    EQ = 0x12,
    ISZERO = 0x13,
    AND = 0x16,
    OR = 0x17,
    NOT = 0x19,
    CALLER = 0x33,
    CALLVALUE = 0x34,
    ORIGIN = 0x32,
    TIMESTAMP = 0x42,
    NUMBER = 0x43,
    BALANCE = 0x31,
    PARAM = 0x35,
    POP = 0x50,
    SLOAD = 0x54,
    SSTORE = 0x55,
    MAPLOAD = 0x56,
    MAPSTORE = 0x57,
    JUMP = 0x58,
    JUMPI = 0x59,
    PUSH = 0x60,
    DUP = 0x80,
    SWAP = 0x90,
    CALL = 0xf1,
    DELEGATECALL = 0xf4,
    SELFDESTRUCT = 0xff,
    REVERT = 0xfd,
};

const char* opName(Op op);
bool isTerminator(Op op);  // ends a basic block: JUMP/JUMPI/STOP/REVERT/SELFDESTRUCT

struct Instruction {
    uint32_t pc = 0;
    Op op = Op::STOP;
    Word imm = 0;      // PUSH immediate
    uint8_t arg = 0;   // PARAM/DUP/SWAP index, CALL gas flag
    uint32_t size = 1; // encoded size in bytes
};

/* Incremental bytecode emitter with label patching. */
class Assembler {
public:
    uint32_t here() const { return uint32_t(code_.size()); }

    void emit(Op op);
    void emitArg(Op op, uint8_t arg);
    void emitPush(const Word& w);

    /* Emits PUSH <placeholder> and returns a patch id to bind later. */
    size_t emitPushLabel();
    void bindLabel(size_t patchId, uint32_t target);

    const Bytes& code() const { return code_; }

private:
    Bytes code_;
    std::vector<uint32_t> patchAt_;  // offset of the 4-byte placeholder immediate
};

/* Decodes the full byte array; throws on truncated instructions. */
std::vector<Instruction> disassemble(const Bytes& code);

using BranchId = std::pair<uint32_t, uint32_t>;  // (srcBlock, dstBlock) — block start pcs

std::string branchIdToString(const BranchId& b);

struct BasicBlock {
    uint32_t start = 0;
    uint32_t end = 0;  // one past the last instruction byte
    std::vector<uint32_t> successors;
    Op terminator = Op::STOP;      // last instruction of the block
    uint32_t terminatorPc = 0;
    std::optional<uint32_t> jumpTarget;  // static target when terminator is JUMP/JUMPI
};

/* Control-flow graph over basic blocks. Blocks start at function entries and
 * jump targets, and immediately after any terminator. Jump targets are
 * recovered from the PUSH <target>; JUMP/JUMPI pattern the code generator
 * always produces. */
class Cfg {
public:
    Cfg() = default;
    Cfg(const Bytes& code, const std::vector<uint32_t>& entryPoints);

    const std::map<uint32_t, BasicBlock>& blocks() const { return blocks_; }
    bool isBlockStart(uint32_t pc) const { return blocks_.count(pc) != 0; }

    /* Start pc of the block containing `pc`. */
    uint32_t blockOf(uint32_t pc) const;

    /* Every static (srcBlock, dstBlock) edge, sorted. */
    const std::vector<BranchId>& edges() const { return edges_; }

    /* Number of JUMPI-terminated blocks on the dominator chain of the edge's
     * source block (the source itself included). This is the edge's static
     * nesting depth: an edge guarded by k stacked conditionals scores k. */
    uint32_t nestingDepth(const BranchId& edge) const;

    /* Condition-blind forward closure over successors, as block start pcs. */
    std::set<uint32_t> reachableBlocks(uint32_t fromBlock) const;

    const std::vector<Instruction>& instructions() const { return insns_; }
    const Instruction& instructionAt(uint32_t pc) const;

private:
    void computeDominators(const std::vector<uint32_t>& entryPoints);

    std::vector<Instruction> insns_;
    std::map<uint32_t, size_t> insnIndex_;
    std::map<uint32_t, BasicBlock> blocks_;
    std::vector<BranchId> edges_;
    std::map<uint32_t, std::set<uint32_t>> dominators_;  // block -> dominating blocks
};

/* PUSH immediates that look like program constants: operands feeding jumps
 * and storage-slot selection are skipped, everything else is kept. These are
 * the values an input mutator wants in its dictionary. */
std::vector<Word> harvestConstants(const Bytes& code);

/* Offsets of instructions a bug oracle can fire on; used to weight branches
 * that sit on a path toward one. */
std::vector<uint32_t> vulnerableInstructionOffsets(const Bytes& code);

}  // namespace statefuzz
