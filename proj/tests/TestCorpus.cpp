#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "TestUtil.h"
#include "statefuzz/Corpus.h"

#include <doctest.h>

#include <algorithm>

using namespace std;
using namespace statefuzz;
using namespace statefuzz::testutil;

namespace {

Word finney(uint64_t n) { return Word(n) * Word("1000000000000000"); }

/* Fallthrough edge of the first JUMPI-terminated block of `fn` — for an
 * if-without-else this is the then-arm (the generated JUMPI skips the body). */
BranchId thenEdgeOf(const ContractPackage& pkg, const string& fn, size_t skip = 0) {
    const FunctionAbi* f = pkg.findFunction(fn);
    for (auto& [start, blk] : pkg.cfg.blocks()) {
        if (start < f->entryOffset || blk.terminator != Op::JUMPI) continue;
        if (skip > 0) {
            --skip;
            continue;
        }
        return {blk.start, blk.end};
    }
    throw runtime_error("no JUMPI block in " + fn);
}

TxInput call(const string& fn, const Word& sender, const Word& value = 0,
             vector<Word> args = {}) {
    TxInput tx;
    tx.function = fn;
    tx.sender = sender;
    tx.value = value;
    tx.args = move(args);
    return tx;
}

SequenceResult runGuess(const ContractPackage& pkg, const Word& value, const Word& n) {
    Vm vm(pkg, defaultVmOptions());
    auto owner = defaultVmOptions().accounts[0];
    return vm.executeSequence({call("constructor", owner), call("guess", owner, value, {n})}, 1);
}

shared_ptr<Seed> fakeSeed(set<BranchId> covered, map<BranchId, Distance> dists = {}) {
    auto s = make_shared<Seed>();
    s->coveredBranches = move(covered);
    s->minDistances = move(dists);
    return s;
}

}  // namespace

TEST_CASE("entry-fee guard distances follow the equality rule") {
    auto pkg = compileCorpus("guessnum.clite");
    BranchId magic = thenEdgeOf(pkg, "guess");

    auto hit = runGuess(pkg, finney(88), 0);
    auto d0 = branchDistance(hit.traces, magic, pkg.cfg);
    REQUIRE(d0.has_value());
    CHECK(d0->satisfied());

    auto d100 = branchDistance(runGuess(pkg, finney(100), 0).traces, magic, pkg.cfg);
    REQUIRE(d100.has_value());
    CHECK(d100->magnitude == finney(12));

    auto d1000 = branchDistance(runGuess(pkg, finney(1000), 0).traces, magic, pkg.cfg);
    REQUIRE(d1000.has_value());
    CHECK(d1000->magnitude == finney(912));

    // closer inputs get strictly smaller distances
    CHECK(*d100 < *d1000);
}

TEST_CASE("less-than guards use the offset-by-one rule") {
    auto pkg = compileOrThrow(R"(
contract L {
    uint256 x;
    fn constructor() { x = 0; }
    fn f(a: uint256) { if (a < 10) { x = 1; } }
}
)");
    Vm vm(pkg, defaultVmOptions());
    auto owner = defaultVmOptions().accounts[0];
    BranchId thenArm = thenEdgeOf(pkg, "f");

    auto miss = vm.executeSequence({call("constructor", owner), call("f", owner, 0, {Word(50)})}, 1);
    auto d = branchDistance(miss.traces, thenArm, pkg.cfg);
    REQUIRE(d.has_value());
    CHECK(d->magnitude == 41);  // 50 - 10 + 1

    // distance to the skip arm while the body arm is taken: b - a
    auto taken = vm.executeSequence({call("constructor", owner), call("f", owner, 0, {Word(3)})}, 1);
    const BasicBlock& blk = pkg.cfg.blocks().at(thenArm.first);
    BranchId elseArm{blk.start, *blk.jumpTarget};
    auto d2 = branchDistance(taken.traces, elseArm, pkg.cfg);
    REQUIRE(d2.has_value());
    CHECK(d2->magnitude == 7);
}

TEST_CASE("distance is absent when the owning branch never executed") {
    auto pkg = compileCorpus("guessnum.clite");
    Vm vm(pkg, defaultVmOptions());
    auto owner = defaultVmOptions().accounts[0];
    auto res = vm.executeSequence({call("constructor", owner)}, 1);
    CHECK(!branchDistance(res.traces, thenEdgeOf(pkg, "guess"), pkg.cfg).has_value());
}

TEST_CASE("seed evaluation fills coverage, distances, and the nested flag") {
    auto pkg = compileCorpus("guessnum.clite");
    BranchId magic = thenEdgeOf(pkg, "guess");
    set<BranchId> all(pkg.cfg.edges().begin(), pkg.cfg.edges().end());

    Seed near;
    auto res = runGuess(pkg, finney(100), 0);
    evaluateSeed(near, res.traces, pkg, all);
    CHECK(!near.coveredBranches.empty());
    REQUIRE(near.minDistances.count(magic) == 1);
    CHECK(near.minDistances[magic].magnitude == finney(12));
    CHECK(!near.hitNestedBranch);

    Seed win;
    auto winRes = runGuess(pkg, finney(88), 42);
    evaluateSeed(win, winRes.traces, pkg, all);
    CHECK(win.hitNestedBranch);
    CHECK(win.coveredBranches.count(magic) == 1);
    // covered branches carry distance zero
    CHECK(win.minDistances[magic].satisfied());
}

TEST_CASE("a seed with new coverage is admitted and coverage absorbed") {
    set<BranchId> all;
    for (uint32_t i = 0; i < 6; ++i) all.insert({i, i + 100});
    SeedQueue q(all);

    auto s = fakeSeed({{0, 100}, {1, 101}, {2, 102}, {3, 103}, {4, 104}});
    selectSeeds(q, {s});
    CHECK(q.seeds().size() == 1);
    CHECK(q.globalCoverage().size() == 5);
    CHECK(q.uncovered() == set<BranchId>{{5, 105}});
}

TEST_CASE("per uncovered branch only the minimum-distance seed is admitted") {
    set<BranchId> all{{0, 100}, {1, 101}};
    SeedQueue q(all);
    selectSeeds(q, {fakeSeed({{0, 100}})});  // baseline: branch 0 covered

    BranchId open{1, 101};
    auto nearSeed = fakeSeed({{0, 100}}, {{open, {finney(12)}}});
    auto farSeed = fakeSeed({{0, 100}}, {{open, {finney(912)}}});
    selectSeeds(q, {farSeed, nearSeed});

    CHECK(q.seeds().size() == 2);
    CHECK(q.contains(nearSeed));
    CHECK(!q.contains(farSeed));
    CHECK(nearSeed->targetBranch == open);
}

TEST_CASE("a seed with nothing new and no minimum is not admitted") {
    set<BranchId> all{{0, 100}, {1, 101}};
    SeedQueue q(all);
    selectSeeds(q, {fakeSeed({{0, 100}})});

    auto dull = fakeSeed({{0, 100}});  // no new coverage, no distances
    selectSeeds(q, {dull});
    CHECK(q.seeds().size() == 1);
    CHECK(!q.contains(dull));
}

TEST_CASE("global coverage never shrinks") {
    set<BranchId> all;
    for (uint32_t i = 0; i < 20; ++i) all.insert({i, i + 100});
    SeedQueue q(all);

    Rng rng(11);
    set<BranchId> prev;
    for (int round = 0; round < 30; ++round) {
        vector<shared_ptr<Seed>> batch;
        for (int k = 0; k < 3; ++k) {
            set<BranchId> cov;
            for (uint32_t i = 0; i < 20; ++i)
                if (rng.range(0, 9) == 0) cov.insert({i, i + 100});
            batch.push_back(fakeSeed(cov));
        }
        selectSeeds(q, batch);
        auto& now = q.globalCoverage();
        CHECK(includes(now.begin(), now.end(), prev.begin(), prev.end()));
        prev = now;
    }
}

TEST_CASE("the queue evicts the seed with fewest uniquely covered branches") {
    set<BranchId> all{{0, 100}, {1, 101}, {2, 102}};
    SeedQueue q(all, /*cap=*/2);

    auto s1 = fakeSeed({{0, 100}, {1, 101}});
    auto s2 = fakeSeed({{0, 100}});  // covers nothing unique once s1 is in
    auto s3 = fakeSeed({{2, 102}});
    q.admit(s1, nullopt, false);
    q.admit(s2, nullopt, false);
    q.admit(s3, nullopt, false);

    CHECK(q.seeds().size() == 2);
    CHECK(q.contains(s1));
    CHECK(q.contains(s3));
    CHECK(!q.contains(s2));
    // eviction never forgets coverage
    CHECK(q.globalCoverage().size() == 3);
}

TEST_CASE("streams split back into canonical per-call encodings") {
    auto pkg = compileCorpus("guessnum.clite");
    auto opt = defaultVmOptions();

    Seed s;
    s.tmpl.calls = {"constructor", "guess"};
    s.rawTxs.push_back(encodeTx(call("constructor", opt.accounts[0]),
                                *pkg.findFunction("constructor"), opt.accounts));
    s.rawTxs.push_back(encodeTx(call("guess", opt.accounts[1], finney(88), {Word(7)}),
                                *pkg.findFunction("guess"), opt.accounts));

    Bytes flat = s.stream();
    CHECK(flat.size() == seedStreamWidth(s.tmpl, pkg));

    // shorter stream: missing tail padded with zeros
    Seed t;
    t.tmpl = s.tmpl;
    t.setStream(Bytes(flat.begin(), flat.end() - 10), pkg);
    CHECK(t.rawTxs[1].size() == s.rawTxs[1].size());
    auto decoded = t.decode(pkg, opt.accounts);
    CHECK(decoded[1].args[0] == 0);  // the truncated argument reads as zero

    // longer stream: overflow truncated away
    Bytes longer = flat;
    longer.push_back(0xEE);
    Seed u;
    u.tmpl = s.tmpl;
    u.setStream(longer, pkg);
    CHECK(u.stream() == flat);
}

TEST_CASE("seed JSON round-trips and refuses foreign packages") {
    auto pkg = compileCorpus("guessnum.clite");
    auto opt = defaultVmOptions();

    Seed s;
    s.tmpl.calls = {"constructor", "guess"};
    s.injectionSeed = 555;
    s.rawTxs.push_back(encodeTx(call("constructor", opt.accounts[0]),
                                *pkg.findFunction("constructor"), opt.accounts));
    s.rawTxs.push_back(encodeTx(call("guess", opt.accounts[2], finney(88), {Word(42)}),
                                *pkg.findFunction("guess"), opt.accounts));

    Seed back = Seed::fromJson(s.toJson(pkg), pkg);
    CHECK(back.tmpl.calls == s.tmpl.calls);
    CHECK(back.rawTxs == s.rawTxs);
    CHECK(back.injectionSeed == s.injectionSeed);

    auto other = compileCorpus("crowdsale.clite");
    CHECK_THROWS(Seed::fromJson(s.toJson(pkg), other));
    CHECK_THROWS(Seed::fromJson("{\"schema\":\"bogus\"}", pkg));
}

TEST_CASE("re-evaluating the same traces reproduces identical distances") {
    auto pkg = compileCorpus("guessnum.clite");
    set<BranchId> all(pkg.cfg.edges().begin(), pkg.cfg.edges().end());
    auto res = runGuess(pkg, finney(100), 3);

    Seed a, b;
    evaluateSeed(a, res.traces, pkg, all);
    evaluateSeed(b, res.traces, pkg, all);
    CHECK(a.coveredBranches == b.coveredBranches);
    REQUIRE(a.minDistances.size() == b.minDistances.size());
    for (auto& [br, d] : a.minDistances) CHECK(b.minDistances.at(br) == d);
}
