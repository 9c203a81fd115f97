#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "TestUtil.h"
#include "statefuzz/Campaign.h"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace std;
using namespace statefuzz;
using namespace statefuzz::testutil;

namespace {

CampaignConfig quickConfig(uint64_t seed, uint64_t energy = 4000) {
    CampaignConfig cfg;
    cfg.rngSeed = seed;
    cfg.energyBudget = energy;
    cfg.timeBudgetSeconds = 60;
    return cfg;
}

const Finding* findClass(const CampaignReport& rep, BugClass c) {
    for (auto& f : rep.findings)
        if (f.bugClass == c) return &f;
    return nullptr;
}

size_t lineCount(const string& s) {
    return size_t(count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("identical seeds and configurations reproduce identical reports") {
    auto pkg = compileCorpus("guessnum.clite");
    auto a = Campaign(pkg, quickConfig(5)).run();
    auto b = Campaign(pkg, quickConfig(5)).run();
    CHECK(a.toJson(false).dump() == b.toJson(false).dump());

    // a different seed is allowed to behave differently, but stays reproducible
    auto c = Campaign(pkg, quickConfig(6)).run();
    auto d = Campaign(pkg, quickConfig(6)).run();
    CHECK(c.toJson(false).dump() == d.toJson(false).dump());
}

TEST_CASE("adding workers changes the schedule but not the report") {
    auto pkg = compileCorpus("guessnum.clite");
    auto solo = quickConfig(3, 3000);
    auto duo = quickConfig(3, 3000);
    duo.workers = 2;
    auto a = Campaign(pkg, solo).run();
    auto b = Campaign(pkg, duo).run();
    CHECK(a.toJson(false).dump() == b.toJson(false).dump());
}

TEST_CASE("a branch-free single function is saturated by the first execution") {
    auto pkg = compileOrThrow(R"(
contract Echo {
    fn ping(a: uint256) { }
}
)");
    auto rep = Campaign(pkg, quickConfig(1)).run();
    CHECK(rep.branchCoveragePercent == 100.0);
    CHECK(rep.totalBranches == 0);
    CHECK(rep.findings.empty());
    CHECK(rep.executions <= 10);
    CHECK(rep.executions >= 1);
}

TEST_CASE("the crowdsale campaign reaches full coverage and flags the silent payout") {
    auto pkg = compileCorpus("crowdsale.clite");
    CampaignConfig cfg = quickConfig(1, 50000);
    auto rep = Campaign(pkg, cfg).run();

    CHECK(rep.branchCoveragePercent == 100.0);
    CHECK(rep.coveredBranchIds.size() == rep.totalBranches);
    const Finding* ue = findClass(rep, BugClass::UE);
    REQUIRE(ue != nullptr);
    // the unchecked transfer sits in the withdraw body
    CHECK(pkg.functionAt(ue->pc).name == "withdraw");
}

TEST_CASE("a recorded witness replays to the finding that produced it") {
    auto pkg = compileCorpus("bounty_claim.clite");
    CampaignConfig cfg = quickConfig(1, 20000);
    auto rep = Campaign(pkg, cfg).run();

    const Finding* re = findClass(rep, BugClass::RE);
    REQUIRE(re != nullptr);
    REQUIRE(re->witness.is_object());

    auto replay = replaySeed(pkg, re->witness.dump(), cfg.vm, cfg.oracle);
    bool reproduced = any_of(replay.findings.begin(), replay.findings.end(), [&](auto& f) {
        return f.bugClass == BugClass::RE && f.pc == re->pc;
    });
    CHECK(reproduced);
}

TEST_CASE("replay refuses a witness minted for a different contract") {
    auto bounty = compileCorpus("bounty_claim.clite");
    auto other = compileCorpus("guessnum.clite");
    CampaignConfig cfg = quickConfig(1, 20000);
    auto rep = Campaign(bounty, cfg).run();
    REQUIRE(!rep.findings.empty());
    CHECK_THROWS(replaySeed(other, rep.findings[0].witness.dump(), cfg.vm));
}

TEST_CASE("an empty sequence replays to empty traces and no findings") {
    auto pkg = compileCorpus("bounty_claim.clite");
    Seed empty;
    auto rr = replaySeed(pkg, empty.toJson(pkg), defaultVmOptions());
    CHECK(rr.result.traces.empty());
    CHECK(rr.findings.empty());
}

TEST_CASE("round statistics grow monotonically and serialize one row per round") {
    auto pkg = compileCorpus("guessnum.clite");
    auto rep = Campaign(pkg, quickConfig(2)).run();

    REQUIRE(!rep.perRound.empty());
    CHECK(lineCount(rep.seriesCsv()) == rep.perRound.size() + 1);  // header + rows
    for (size_t i = 1; i < rep.perRound.size(); ++i) {
        CHECK(rep.perRound[i].coveragePercent >= rep.perRound[i - 1].coveragePercent);
        CHECK(rep.perRound[i].executions >= rep.perRound[i - 1].executions);
        CHECK(rep.perRound[i].round == rep.perRound[i - 1].round + 1);
    }
    CHECK(rep.perRound.back().coveragePercent == rep.branchCoveragePercent);
}

TEST_CASE("frozen funds carry the pre-fuzz witness and replay cleanly") {
    auto pkg = compileCorpus("piggy_bank.clite");
    CampaignConfig cfg = quickConfig(1);
    auto rep = Campaign(pkg, cfg).run();

    const Finding* ef = findClass(rep, BugClass::EF);
    REQUIRE(ef != nullptr);
    CHECK(ef->evidence.at("payableFunction") == "put");

    auto replay = replaySeed(pkg, ef->witness.dump(), cfg.vm, cfg.oracle);
    bool reproduced = any_of(replay.findings.begin(), replay.findings.end(),
                             [&](auto& f) { return f.bugClass == BugClass::EF; });
    CHECK(reproduced);

    // the patched bank can pay out, so nothing freezes
    auto fixedRep = Campaign(compileCorpus("piggy_bank_fixed.clite"), cfg).run();
    CHECK(findClass(fixedRep, BugClass::EF) == nullptr);
}

TEST_CASE("each bug class and location is reported exactly once") {
    auto pkg = compileCorpus("tip_jar.clite");
    auto rep = Campaign(pkg, quickConfig(1)).run();

    set<pair<uint8_t, uint32_t>> keys;
    for (auto& f : rep.findings) CHECK(keys.insert({uint8_t(f.bugClass), f.pc}).second);
    REQUIRE(findClass(rep, BugClass::UE) != nullptr);
    size_t ueCount = 0;
    for (auto& f : rep.findings)
        if (f.bugClass == BugClass::UE) ++ueCount;
    CHECK(ueCount == 1);
}
