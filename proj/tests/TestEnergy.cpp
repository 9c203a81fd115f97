#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "TestUtil.h"
#include "statefuzz/Energy.h"

#include <doctest.h>

#include <algorithm>

using namespace std;
using namespace statefuzz;
using namespace statefuzz::testutil;

namespace {

TxInput call(const string& fn, const Word& sender, const Word& value = 0,
             vector<Word> args = {}) {
    TxInput tx;
    tx.function = fn;
    tx.sender = sender;
    tx.value = value;
    tx.args = move(args);
    return tx;
}

const BasicBlock& jumpiBlock(const ContractPackage& pkg, const string& fn, size_t ordinal = 0) {
    const FunctionAbi* f = pkg.findFunction(fn);
    for (auto& [start, blk] : pkg.cfg.blocks()) {
        if (start < f->entryOffset || blk.terminator != Op::JUMPI) continue;
        if (ordinal == 0) return blk;
        --ordinal;
    }
    throw runtime_error("no such JUMPI block in " + fn);
}

set<uint32_t> riskySet(const ContractPackage& pkg) {
    auto v = vulnerableInstructionOffsets(pkg.bytecode);
    return {v.begin(), v.end()};
}

BranchWeightTable twoRows(uint64_t wA, uint64_t wB) {
    BranchWeightTable t;
    t.rows[{0, 1}].w1 = wA;
    t.rows[{2, 3}].w1 = wB;
    return t;
}

}  // namespace

TEST_CASE("every static edge gets a row and unexercised rows keep weight zero") {
    auto pkg = compileCorpus("guessnum.clite");
    auto opt = defaultVmOptions();
    Vm vm(pkg, opt);
    auto pre = vm.executeSequence({call("constructor", opt.accounts[0])}, 1);

    auto table = branchWeighted(pkg, pre.traces, riskySet(pkg));
    CHECK(table.rows.size() == pkg.cfg.edges().size());
    for (auto& e : pkg.cfg.edges()) CHECK(table.rows.count(e) == 1);
    // the constructor is branch-free, so nothing scored
    for (auto& [b, r] : table.rows) {
        CHECK(r.w1 == 0);
        CHECK(r.w2 == 0);
    }
}

TEST_CASE("consecutive guards along the walk score 1 then 2") {
    auto pkg = compileOrThrow(R"(
contract S2 {
    uint256 x;
    fn constructor() { }
    fn f(a: uint256, b: uint256) {
        if (a == 1) { x = 1; }
        if (b == 1) { x = 2; }
    }
}
)");
    auto opt = defaultVmOptions();
    Vm vm(pkg, opt);
    auto pre = vm.executeSequence(
        {call("constructor", opt.accounts[0]), call("f", opt.accounts[0], 0, {Word(0), Word(0)})}, 1);

    auto table = branchWeighted(pkg, pre.traces, riskySet(pkg));
    const BasicBlock& g1 = jumpiBlock(pkg, "f", 0);
    const BasicBlock& g2 = jumpiBlock(pkg, "f", 1);
    BranchId skip1{g1.start, *g1.jumpTarget};
    BranchId skip2{g2.start, *g2.jumpTarget};

    CHECK(table.rows.at(skip1).nestedScore == 1);
    CHECK(table.rows.at(skip1).w1 == 1);
    CHECK(table.rows.at(skip2).nestedScore == 2);
    CHECK(table.rows.at(skip2).w1 == 2);

    // the untaken arms were never walked, so they stay unscored
    CHECK(table.rows.at({g1.start, g1.end}).w1 == 0);
    CHECK(table.rows.at({g2.start, g2.end}).w1 == 0);
}

TEST_CASE("guards sitting ahead of risky instructions carry the flat bonus") {
    auto pkg = compileCorpus("guessnum.clite");
    auto opt = defaultVmOptions();
    Vm vm(pkg, opt);
    auto pre = vm.executeSequence(
        {call("constructor", opt.accounts[0]), call("guess", opt.accounts[0], 1, {Word(0)})}, 1);

    auto table = branchWeighted(pkg, pre.traces, riskySet(pkg));
    const BasicBlock& g = jumpiBlock(pkg, "guess", 0);
    BranchId walked{g.start, *g.jumpTarget};  // the guard evaluated false
    BranchId magic{g.start, g.end};           // the fee-matching arm, never entered

    CHECK(table.rows.at(walked).w1 == 1);
    CHECK(table.rows.at(walked).w2 == kW2Const);  // pot arithmetic sits beyond this guard
    CHECK(table.rows.at(magic).w1 == 0);
    CHECK(table.rows.at(magic).w2 == 0);
}

TEST_CASE("without risky instructions no row gets the bonus") {
    auto pkg = compileOrThrow(R"(
contract Calm {
    uint256 x;
    fn constructor() { x = 5; }
    fn f(a: uint256) { if (a == 3) { x = 9; } }
}
)");
    CHECK(riskySet(pkg).empty());
    auto opt = defaultVmOptions();
    Vm vm(pkg, opt);
    auto pre = vm.executeSequence(
        {call("constructor", opt.accounts[0]), call("f", opt.accounts[0], 0, {Word(0)})}, 1);
    auto table = branchWeighted(pkg, pre.traces, riskySet(pkg));
    for (auto& [b, r] : table.rows) CHECK(r.w2 == 0);
}

TEST_CASE("forward closure is condition-blind and stops at terminal blocks") {
    auto pkg = compileOrThrow(R"(
contract Calm {
    uint256 x;
    fn constructor() { x = 5; }
    fn f(a: uint256) { if (a == 3) { x = 9; } }
}
)");
    const BasicBlock& guard = jumpiBlock(pkg, "f", 0);
    const BasicBlock& join = pkg.cfg.blocks().at(*guard.jumpTarget);

    // a terminal block reaches only its own instructions
    auto tail = prefixInference(pkg, join.start);
    for (uint32_t pc : tail) {
        CHECK(pc >= join.start);
        CHECK(pc < join.end);
    }
    CHECK(!tail.empty());

    // from the guard both arms are reachable, conditions notwithstanding
    auto fromGuard = prefixInference(pkg, guard.start);
    CHECK(fromGuard.count(guard.end) == 1);        // then-arm entry
    CHECK(fromGuard.count(join.start) == 1);       // skip target
    bool hasStore = false;
    for (uint32_t pc : fromGuard)
        if (pkg.cfg.instructionAt(pc).op == Op::SSTORE) hasStore = true;
    CHECK(hasStore);
}

TEST_CASE("closure from a function entry covers its external call site") {
    auto pkg = compileCorpus("crowdsale.clite");
    const FunctionAbi* withdraw = pkg.findFunction("withdraw");
    REQUIRE(withdraw != nullptr);

    optional<uint32_t> callPc;
    for (auto& ins : pkg.cfg.instructions())
        if (ins.op == Op::CALL && pkg.functionAt(ins.pc).name == "withdraw") callPc = ins.pc;
    REQUIRE(callPc.has_value());

    auto closure = prefixInference(pkg, pkg.cfg.blockOf(withdraw->entryOffset));
    CHECK(closure.count(*callPc) == 1);
}

TEST_CASE("reachability shrinks monotonically along every edge") {
    auto pkg = compileCorpus("crowdsale.clite");
    for (auto& [src, dst] : pkg.cfg.edges()) {
        auto from = pkg.cfg.reachableBlocks(src);
        auto to = pkg.cfg.reachableBlocks(dst);
        CHECK(includes(from.begin(), from.end(), to.begin(), to.end()));
    }
}

TEST_CASE("executed instructions always sit inside the entry block's closure") {
    auto pkg = compileCorpus("crowdsale.clite");
    auto opt = defaultVmOptions();
    Vm vm(pkg, opt);
    auto res = vm.executeSequence({call("constructor", opt.accounts[0]),
                                   call("invest", opt.accounts[1], Word("200000000000000000000")),
                                   call("invest", opt.accounts[1], Word(5)),
                                   call("refund", opt.accounts[1]),
                                   call("withdraw", opt.accounts[0])},
                                  1);
    for (auto& trace : res.traces) {
        if (trace.steps.empty()) continue;
        auto closure = prefixInference(pkg, pkg.cfg.blockOf(trace.steps[0].pc));
        for (auto& st : trace.steps) CHECK(closure.count(st.pc) == 1);
    }
}

TEST_CASE("allocation splits the budget proportionally to 1 + weight") {
    SUBCASE("uniform weights halve the budget") {
        auto t = twoRows(0, 0);
        allocate(t, 10);
        CHECK(t.rows.at({0, 1}).allocated == 5);
        CHECK(t.rows.at({2, 3}).allocated == 5);
    }
    SUBCASE("weights 0 and 4 split 12 into 2 and 10") {
        auto t = twoRows(0, 4);
        allocate(t, 12);
        CHECK(t.rows.at({0, 1}).allocated == 2);
        CHECK(t.rows.at({2, 3}).allocated == 10);
    }
    SUBCASE("scaling both shares the same way keeps the split") {
        auto t = twoRows(2, 14);  // shares 3 and 15, same 1:5 ratio
        allocate(t, 12);
        CHECK(t.rows.at({0, 1}).allocated == 2);
        CHECK(t.rows.at({2, 3}).allocated == 10);
    }
    SUBCASE("an odd remainder lands on the lowest id among equal weights") {
        auto t = twoRows(0, 0);
        allocate(t, 11);
        CHECK(t.rows.at({0, 1}).allocated == 6);
        CHECK(t.rows.at({2, 3}).allocated == 5);
    }
    SUBCASE("a single row takes everything") {
        BranchWeightTable t;
        t.rows[{0, 1}].w1 = 3;
        allocate(t, 7);
        CHECK(t.rows.at({0, 1}).allocated == 7);
        CHECK(t.unitsLeft() == 7);
    }
    SUBCASE("starved rows are lifted to one unit when the budget allows") {
        auto t = twoRows(0, 9);  // shares 1 and 10: the small row floors to zero
        allocate(t, 10);
        CHECK(t.rows.at({0, 1}).allocated == 1);
        CHECK(t.rows.at({2, 3}).allocated == 9);
    }
}

TEST_CASE("allocation conserves the budget exactly") {
    Rng rng(101);
    for (int iter = 0; iter < 100; ++iter) {
        BranchWeightTable t;
        size_t n = 1 + rng.range(0, 11);
        for (size_t i = 0; i < n; ++i) {
            BranchId b{uint32_t(i * 2), uint32_t(i * 2 + 1)};
            t.rows[b].w1 = rng.range(0, 6);
            t.rows[b].w2 = rng.coin() ? kW2Const : 0;
        }
        uint64_t budget = rng.range(0, 500);
        allocate(t, budget);
        uint64_t sum = 0;
        for (auto& [b, r] : t.rows) sum += r.allocated;
        CHECK(sum == budget);
    }
}

TEST_CASE("per-seed energy drops by one and is refunded for discoveries") {
    CHECK(updateEnergy(5, false, 100) == 4);
    CHECK(updateEnergy(5, true, 6) == 6);
    CHECK(updateEnergy(5, true, 5) == 5);  // refund clamps at the allocation
    CHECK(updateEnergy(1, false, 100) == 0);
    CHECK(updateEnergy(0, false, 100) == 0);
    CHECK(updateEnergy(0, true, 3) == 2);
}

TEST_CASE("spending charges the target row and falls back to the lowest live row") {
    auto t = twoRows(0, 0);
    allocate(t, 4);  // 2 and 2
    BranchId a{0, 1}, b{2, 3};

    CHECK(chargeSpent(t, a) == a);
    CHECK(t.rows.at(a).spent == 1);
    CHECK(chargeSpent(t, a) == a);
    CHECK(chargeSpent(t, a) == b);  // a exhausted: lowest id with units left
    CHECK(chargeSpent(t, nullopt) == b);
    CHECK(chargeSpent(t, nullopt) == nullopt);  // table fully spent
    CHECK(t.unitsLeft() == 0);

    refundSpent(t, b, kRefundNew);
    CHECK(t.rows.at(b).spent == 0);
    refundSpent(t, a, 100);  // clamps at what was actually spent
    CHECK(t.rows.at(a).spent == 0);
}

TEST_CASE("mutation order follows the heaviest covered branch, then admission order") {
    BranchWeightTable table;
    BranchId e1{0, 1}, e2{2, 3}, e3{4, 5};
    table.rows[e1].w1 = 5;
    table.rows[e2].w1 = 9;
    table.rows[e3].w1 = 0;

    SeedQueue q({e1, e2, e3});
    auto mk = [](set<BranchId> cov) {
        auto s = make_shared<Seed>();
        s->coveredBranches = move(cov);
        return s;
    };
    auto s1 = mk({e1});
    auto s2 = mk({e2});
    auto s3 = mk({e3});
    auto s4 = mk({e2, e3});
    q.admit(s1, nullopt, false);
    q.admit(s2, nullopt, false);
    q.admit(s3, nullopt, false);
    q.admit(s4, nullopt, false);

    auto order = seedPriority(q, table);
    REQUIRE(order.size() == 4);
    CHECK(order[0] == s2);  // weight 9, admitted before s4
    CHECK(order[1] == s4);  // weight 9
    CHECK(order[2] == s1);  // weight 5
    CHECK(order[3] == s3);  // weight 0

    SeedQueue empty({e1});
    CHECK(seedPriority(empty, table).empty());
}
