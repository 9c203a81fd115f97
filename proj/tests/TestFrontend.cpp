#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "TestUtil.h"
#include "statefuzz/Compiler.h"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace std;
using namespace statefuzz;
using namespace statefuzz::testutil;

TEST_CASE("crowdsale parses into the expected function set") {
    auto r = parseContract(readFile(corpusPath("crowdsale.clite")));
    REQUIRE(r.ok());
    set<string> names;
    for (auto& f : r.contract->functions) names.insert(f.name);
    CHECK(names == set<string>{"constructor", "invest", "refund", "withdraw"});
}

TEST_CASE("empty file yields a diagnostic with a position") {
    auto r = parseContract("");
    CHECK(!r.ok());
    REQUIRE(!r.diagnostics.empty());
    CHECK(r.diagnostics[0].render().find("contract") != string::npos);
}

TEST_CASE("duplicate function names are rejected") {
    auto r = compileContract(
        "contract D { uint256 x; fn constructor() {} fn f() { x = 1; } fn f() { x = 2; } }");
    CHECK(!r.ok());
    REQUIRE(!r.diagnostics.empty());
    CHECK(r.diagnostics[0].message.find("duplicate") != string::npos);
}

TEST_CASE("unresolved names are rejected") {
    auto r = compileContract("contract U { fn constructor() {} fn f() { ghost = 1; } }");
    CHECK(!r.ok());
}

TEST_CASE("crowdsale access facts match the source") {
    auto pkg = compileCorpus("crowdsale.clite");

    CHECK(pkg.hasFact("invest", "invested", FactKind::Write));
    CHECK(pkg.hasFact("invest", "invests", FactKind::Write));
    CHECK(pkg.hasFact("invest", "phase", FactKind::Write));
    CHECK(pkg.hasFact("refund", "phase", FactKind::ReadInBranchCondition));
    CHECK(pkg.hasFact("refund", "invests", FactKind::ReadInBranchCondition));
    CHECK(pkg.hasFact("withdraw", "phase", FactKind::ReadInBranchCondition));
    CHECK(pkg.hasFact("withdraw", "invested", FactKind::Read));

    // the self read-after-write that drives sequence duplication
    CHECK(pkg.hasFact("invest", "invested", FactKind::RawSelfDependency));
    // withdraw only reads; no self dependency
    CHECK(!pkg.hasFact("withdraw", "invested", FactKind::RawSelfDependency));
    CHECK(!pkg.hasFact("refund", "invests", FactKind::Write));
}

TEST_CASE("function without state access produces no facts") {
    auto pkg = compileOrThrow(
        "contract P { uint256 x; fn constructor() { x = 1; } fn ping() { revert; } }");
    for (auto& f : pkg.accessFacts) CHECK(f.function != "ping");
}

TEST_CASE("write fact exists iff the function assigns the variable") {
    auto pkg = compileOrThrow(
        "contract W { uint256 a; uint256 b; fn constructor() {} "
        "fn w() { a = 1; } fn r() { if (a > 0) { b = 1; } } }");
    CHECK(pkg.hasFact("w", "a", FactKind::Write));
    CHECK(!pkg.hasFact("w", "b", FactKind::Write));
    CHECK(pkg.hasFact("r", "b", FactKind::Write));
    CHECK(!pkg.hasFact("r", "a", FactKind::Write));
    CHECK(pkg.hasFact("r", "a", FactKind::ReadInBranchCondition));
    CHECK(!pkg.hasFact("w", "a", FactKind::ReadInBranchCondition));
}

TEST_CASE("raw self dependency requires write, read, and a branch read somewhere") {
    // f writes and reads v, and v is branch-read (by f itself)
    auto withBranch = compileOrThrow(
        "contract A { uint256 v; fn constructor() {} "
        "fn f() { if (v < 10) { v = v + 1; } } }");
    CHECK(withBranch.hasFact("f", "v", FactKind::RawSelfDependency));

    // f writes and reads v but no branch in the contract reads v
    auto noBranch = compileOrThrow(
        "contract B { uint256 v; fn constructor() {} fn f() { v = v + 1; } }");
    CHECK(!noBranch.hasFact("f", "v", FactKind::RawSelfDependency));
}

TEST_CASE("abi records payability, params, and the constructor flag") {
    auto pkg = compileCorpus("guessnum.clite");
    auto* ctor = pkg.findFunction("constructor");
    REQUIRE(ctor != nullptr);
    CHECK(ctor->isConstructor);
    auto* guess = pkg.findFunction("guess");
    REQUIRE(guess != nullptr);
    CHECK(guess->payable);
    REQUIRE(guess->params.size() == 1);
    CHECK(guess->params[0].first == "n");
    CHECK(guess->params[0].second == VarTypeTag::Uint256);
    CHECK(pkg.findFunction("nothere") == nullptr);
}

TEST_CASE("package json round-trips") {
    auto pkg = compileCorpus("crowdsale.clite");
    auto back = ContractPackage::fromJson(pkg.toJson());
    CHECK(back.name == pkg.name);
    CHECK(back.bytecode == pkg.bytecode);
    CHECK(back.accessFacts == pkg.accessFacts);
    CHECK(back.hash() == pkg.hash());
    CHECK(back.functions.size() == pkg.functions.size());
    CHECK(back.cfg.edges() == pkg.cfg.edges());
}

TEST_CASE("compilation is deterministic") {
    auto src = readFile(corpusPath("crowdsale.clite"));
    auto a = compileOrThrow(src);
    auto b = compileOrThrow(src);
    CHECK(a.bytecode == b.bytecode);
    CHECK(a.hash() == b.hash());
}

TEST_CASE("distinct contracts hash differently") {
    auto a = compileCorpus("crowdsale.clite");
    auto b = compileCorpus("guessnum.clite");
    CHECK(a.hash() != b.hash());
}

TEST_CASE("push constants are harvestable from bytecode") {
    auto pkg = compileCorpus("guessnum.clite");
    auto consts = harvestConstants(pkg.bytecode);
    // the entry-fee guard constant: 88 finney in wei
    CHECK(find(consts.begin(), consts.end(), Word("88000000000000000")) != consts.end());
    // the game target
    CHECK(find(consts.begin(), consts.end(), Word(42)) != consts.end());
}
