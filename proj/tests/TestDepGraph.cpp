#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "TestUtil.h"
#include "statefuzz/DepGraph.h"

#include <doctest.h>

#include <algorithm>

using namespace std;
using namespace statefuzz;
using namespace statefuzz::testutil;

TEST_CASE("crowdsale dependency graph matches the source") {
    auto g = buildGraph(compileCorpus("crowdsale.clite"));
    CHECK(g.writes["invest"] == set<string>{"invested", "invests", "phase"});
    CHECK(g.reads["withdraw"] == set<string>{"invested", "owner", "phase"});
    CHECK(g.branchReads["withdraw"] == set<string>{"phase"});
    CHECK(g.branchReads["refund"] == set<string>{"invests", "phase"});
    CHECK(g.rawSelf.count({"invest", "invested"}) == 1);
    CHECK(g.rawSelf.count({"withdraw", "invested"}) == 0);
}

TEST_CASE("stateless contract yields an empty graph") {
    auto g = buildGraph(compileOrThrow("contract S { fn constructor() {} fn f() {} }"));
    CHECK(g.writes.empty());
    CHECK(g.reads.empty());
    CHECK(g.branchReads.empty());
    CHECK(g.rawSelf.empty());
}

TEST_CASE("a branch read lands in branchReads of the reading function") {
    auto g = buildGraph(compileOrThrow(R"(
contract B {
    uint256 v;
    fn constructor() { v = 0; }
    fn f() { v = 1; }
    fn g() { if (v == 1) { v = 2; } }
}
)"));
    CHECK(g.branchReads["g"] == set<string>{"v"});
    CHECK(g.branchReads.count("f") == 0);
}

TEST_CASE("crowdsale orders writers before readers") {
    auto pkg = compileCorpus("crowdsale.clite");
    auto t = orderSequence(buildGraph(pkg), pkg);
    CHECK(t.calls == vector<string>{"constructor", "invest", "refund", "withdraw"});
    CHECK(t.duplicatedAt.empty());
}

TEST_CASE("independent functions keep declaration order") {
    auto pkg = compileOrThrow(R"(
contract I {
    uint256 a;
    uint256 b;
    fn constructor() { a = 0; }
    fn second() { b = 2; }
    fn first() { a = 1; }
}
)");
    auto t = orderSequence(buildGraph(pkg), pkg);
    CHECK(t.calls == vector<string>{"constructor", "second", "first"});
}

TEST_CASE("a two-function dependency cycle falls back to declaration order") {
    auto pkg = compileOrThrow(R"(
contract C {
    uint256 v;
    uint256 w;
    fn constructor() { v = 0; }
    fn f() { if (w == 1) { v = 1; } }
    fn g() { if (v == 1) { w = 1; } }
}
)");
    auto t = orderSequence(buildGraph(pkg), pkg);
    CHECK(t.calls == vector<string>{"constructor", "f", "g"});
}

TEST_CASE("functions touching no state are appended after the ordered calls") {
    auto pkg = compileOrThrow(R"(
contract P {
    uint256 v;
    fn constructor() { v = 0; }
    fn pure1() { revert; }
    fn writer() { v = 1; }
    fn reader() { if (v == 1) { v = 2; } }
}
)");
    auto t = orderSequence(buildGraph(pkg), pkg);
    CHECK(t.calls == vector<string>{"constructor", "writer", "reader", "pure1"});
}

TEST_CASE("crowdsale sequence mutation duplicates invest before withdraw") {
    auto pkg = compileCorpus("crowdsale.clite");
    auto g = buildGraph(pkg);
    auto t = mutateSequence(orderSequence(g, pkg), g);
    CHECK(t.calls == vector<string>{"constructor", "invest", "refund", "invest", "withdraw"});
    CHECK(t.duplicatedAt == set<size_t>{3});
}

TEST_CASE("no self dependency means no duplication") {
    auto pkg = compileCorpus("guessnum.clite");
    auto g = buildGraph(pkg);
    auto t = orderSequence(g, pkg);
    CHECK(mutateSequence(t, g).calls == t.calls);
}

TEST_CASE("self dependency with no later reader appends the duplicate") {
    auto pkg = compileOrThrow(R"(
contract A {
    uint256 v;
    fn constructor() { v = 0; }
    fn bump() { if (v < 5) { v = v + 1; } }
}
)");
    auto g = buildGraph(pkg);
    auto t = mutateSequence(orderSequence(g, pkg), g);
    CHECK(t.calls == vector<string>{"constructor", "bump", "bump"});
    CHECK(t.duplicatedAt == set<size_t>{2});
}

TEST_CASE("repeated mutation respects the duplication cap") {
    auto pkg = compileCorpus("crowdsale.clite");
    auto g = buildGraph(pkg);
    auto t = orderSequence(g, pkg);
    for (int i = 0; i < 6; ++i) t = mutateSequence(t, g, /*maxDup=*/3);
    CHECK(count(t.calls.begin(), t.calls.end(), "invest") == 3);
    CHECK(count(t.calls.begin(), t.calls.end(), "withdraw") == 1);
}

TEST_CASE("mutation adds at most one call per self-dependent function") {
    Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        auto rf = randomFactSet(rng);
        auto g = graphFromFacts(rf.facts);
        auto t = orderSequence(g, rf.abiOrder, "constructor");
        auto m = mutateSequence(t, g);
        set<string> rawFns;
        for (auto& [fn, v] : g.rawSelf) rawFns.insert(fn);
        CHECK(m.calls.size() - t.calls.size() <= rawFns.size());
        CHECK(m.duplicatedAt.size() == m.calls.size() - t.calls.size());
    }
}

TEST_CASE("ordering is deterministic") {
    auto pkg = compileCorpus("crowdsale.clite");
    auto g = buildGraph(pkg);
    CHECK(orderSequence(g, pkg).calls == orderSequence(g, pkg).calls);
}

TEST_CASE("random fact sets never order a reader before its acyclic writer") {
    Rng rng(4242);
    size_t violations = 0;
    for (int i = 0; i < 100; ++i) {
        auto rf = randomFactSet(rng);
        auto g = graphFromFacts(rf.facts);
        auto t = orderSequence(g, rf.abiOrder, "constructor");
        violations += orderingViolations(g, t);
        CHECK(t.calls[0] == "constructor");
    }
    CHECK(violations == 0);
}
