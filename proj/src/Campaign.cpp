#include "statefuzz/Campaign.h"

#include <algorithm>
#include <future>
#include <sstream>

using namespace std;
using namespace std::chrono;

namespace statefuzz {

nlohmann::json CampaignReport::toJson(bool includeWallClock) const {
    nlohmann::json rounds = nlohmann::json::array();
    for (auto& r : perRound)
        rounds.push_back({{"round", r.round},
                          {"executions", r.executions},
                          {"coveredBranches", r.coveredBranches},
                          {"coveragePercent", r.coveragePercent}});
    nlohmann::json fs = nlohmann::json::array();
    for (auto& f : findings) fs.push_back(f.toJson());
    nlohmann::json j{{"contract", contractName},
                     {"packageHash", packageHash},
                     {"rngSeed", rngSeed},
                     {"totalBranches", totalBranches},
                     {"branchCoveragePercent", branchCoveragePercent},
                     {"coveredBranchIds", coveredBranchIds},
                     {"executions", executions},
                     {"findings", fs},
                     {"perRound", rounds}};
    if (includeWallClock) j["wallClockMs"] = wallClockMs;
    return j;
}

string CampaignReport::seriesCsv() const {
    ostringstream os;
    os << "round,executions,coveredBranches,coveragePercent\n";
    for (auto& r : perRound)
        os << r.round << ',' << r.executions << ',' << r.coveredBranches << ','
           << r.coveragePercent << '\n';
    return os.str();
}

Campaign::Campaign(ContractPackage pkg, CampaignConfig cfg)
    : pkg_(move(pkg)), cfg_(move(cfg)), vm_(pkg_, cfg_.vm), rng_(cfg_.rngSeed) {
    injBase_ = rng_.next();
    interesting_ = InterestingTable::make(pkg_, !cfg_.noHarvest);
}

CampaignReport Campaign::run() {
    auto t0 = steady_clock::now();
    deadline_ = t0 + seconds(cfg_.timeBudgetSeconds);

    graph_ = buildGraph(pkg_);
    SequenceTemplate ordered = orderSequence(graph_, pkg_);
    tmpl_ = cfg_.noSeqMutation ? ordered : mutateSequence(ordered, graph_, cfg_.maxDup);
    auto vulnList = vulnerableInstructionOffsets(pkg_.bytecode);
    vuln_ = set<uint32_t>(vulnList.begin(), vulnList.end());

    set<BranchId> all(pkg_.cfg.edges().begin(), pkg_.cfg.edges().end());
    queue_ = make_unique<SeedQueue>(all, cfg_.queueCap);

    /* pre-fuzz: one free instrumented run of the plain template feeds the
     * branch weight table */
    auto pre = makePreFuzzSeed();
    preSeedJson_ = pre->toJson(pkg_);
    SequenceResult preRes;
    executeCandidate(pre, /*charge=*/false, &preRes);

    table_ = branchWeighted(pkg_, preRes.traces, vuln_, cfg_.noEnergy ? 0 : cfg_.w2Const);
    if (cfg_.noEnergy)
        for (auto& [b, r] : table_.rows) {
            r.nestedScore = 0;
            r.w1 = 0;
            r.w2 = 0;
        }
    allocate(table_, cfg_.energyBudget);
    lastRefreshCov_ = coverageFraction();

    /* A branch-free contract has an empty weight table and thus zero energy;
     * the pre-fuzz run already exercised everything worth seeing. */
    auto batch = table_.unitsLeft() > 0 ? initSeeds() : vector<shared_ptr<Seed>>{};
    pushRoundStats(0);

    uint64_t round = 0;
    while (table_.unitsLeft() > 0 && steady_clock::now() < deadline_) {
        selectSeeds(*queue_, batch);
        if (!cfg_.noEnergy) maybeRefresh();
        sliceLeft_ = min<uint64_t>(4096, table_.unitsLeft());
        MutationContext ctx{pkg_, interesting_,
                            [this](shared_ptr<Seed> c) { return executeCandidate(move(c), true); },
                            [this] { return min(sliceLeft_, table_.unitsLeft()); },
                            {}};
        if (cfg_.noMask) {
            batch = randomMutationRound(*queue_, rng_, ctx);
        } else {
            auto order = cfg_.noEnergy ? admissionOrder() : seedPriority(*queue_, table_);
            batch = mutationRound(*queue_, order, rng_, ctx);
        }
        ++round;
        pushRoundStats(round);
        if (batch.empty()) break;  // every seed gated off or unaffordable: a dead end
    }
    selectSeeds(*queue_, batch);

    if (auto ef = checkEf(pkg_, everReleased_)) {
        if (findingKeys_.insert({ef->bugClass, ef->pc}).second) {
            Finding f;
            f.bugClass = ef->bugClass;
            f.pc = ef->pc;
            f.evidence = ef->evidence;
            f.witness = nlohmann::json::parse(preSeedJson_);
            findings_.push_back(move(f));
        }
    }

    CampaignReport rep;
    rep.contractName = pkg_.name;
    rep.packageHash = pkg_.hash();
    rep.rngSeed = cfg_.rngSeed;
    rep.totalBranches = pkg_.cfg.edges().size();
    rep.branchCoveragePercent = coverageFraction() * 100.0;
    for (auto& b : queue_->globalCoverage()) rep.coveredBranchIds.push_back(branchIdToString(b));
    rep.findings = findings_;
    rep.executions = executions_;
    rep.wallClockMs = uint64_t(duration_cast<milliseconds>(steady_clock::now() - t0).count());
    rep.perRound = perRound_;
    return rep;
}

shared_ptr<Seed> Campaign::makePreFuzzSeed() const {
    auto s = make_shared<Seed>();
    s->tmpl = tmpl_;
    for (auto& fname : tmpl_.calls) {
        const FunctionAbi* fn = pkg_.findFunction(fname);
        TxInput tx;
        tx.function = fname;
        tx.sender = cfg_.vm.accounts.at(0);
        tx.value = fn->payable ? 1 : 0;
        tx.args.assign(fn->params.size(), Word(0));
        s->rawTxs.push_back(encodeTx(tx, *fn, cfg_.vm.accounts));
    }
    return s;
}

Word Campaign::drawValue() {
    switch (rng_.range(0, 4)) {
        case 0: return 0;
        case 1: return 1;
        case 2: return 2;
        case 3: return Word(rng_.range(0, 1024));
        default: return interesting_.values[size_t(rng_.range(0, interesting_.values.size() - 1))];
    }
}

Word Campaign::drawArg(VarTypeTag t) {
    if (t == VarTypeTag::Address)
        return cfg_.vm.accounts[size_t(rng_.range(0, cfg_.vm.accounts.size() - 1))];
    if (t == VarTypeTag::Bool) return rng_.coin() ? 1 : 0;
    return drawValue();
}

vector<shared_ptr<Seed>> Campaign::initSeeds() {
    vector<shared_ptr<Seed>> cands;
    set<Bytes> seen;
    seen.insert(makePreFuzzSeed()->stream());
    for (size_t a = 0; a < cfg_.vm.accounts.size(); ++a) {
        for (int k = 0; k < 4; ++k) {
            auto s = make_shared<Seed>();
            s->tmpl = tmpl_;
            for (auto& fname : tmpl_.calls) {
                const FunctionAbi* fn = pkg_.findFunction(fname);
                TxInput tx;
                tx.function = fname;
                tx.sender = cfg_.vm.accounts[a];
                tx.value = fn->payable ? drawValue() : 0;
                for (auto& p : fn->params) tx.args.push_back(drawArg(p.second));
                s->rawTxs.push_back(encodeTx(tx, *fn, cfg_.vm.accounts));
            }
            if (!seen.insert(s->stream()).second) continue;
            cands.push_back(move(s));
        }
    }

    /* injection seeds are stamped at schedule time by execution ordinal, so
     * results do not depend on how the batch is partitioned over workers */
    for (auto& c : cands) c->injectionSeed = mixSeed(injBase_, execOrdinal_++);
    vector<SequenceResult> results(cands.size());
    if (cfg_.workers > 1) {
        vector<future<SequenceResult>> futs;
        futs.reserve(cands.size());
        for (auto& c : cands)
            futs.push_back(async(launch::async, [this, c] {
                return vm_.executeSequence(c->decode(pkg_, cfg_.vm.accounts), c->injectionSeed);
            }));
        for (size_t i = 0; i < futs.size(); ++i) results[i] = futs[i].get();
    } else {
        for (size_t i = 0; i < cands.size(); ++i)
            results[i] =
                vm_.executeSequence(cands[i]->decode(pkg_, cfg_.vm.accounts), cands[i]->injectionSeed);
    }

    vector<shared_ptr<Seed>> batch;
    for (size_t i = 0; i < cands.size(); ++i)
        batch.push_back(integrate(cands[i], results[i], /*charge=*/true).seed);
    return batch;
}

ExecutionOutcome Campaign::executeCandidate(shared_ptr<Seed> cand, bool charge,
                                            SequenceResult* tracesOut) {
    cand->injectionSeed = mixSeed(injBase_, execOrdinal_++);
    auto res = vm_.executeSequence(cand->decode(pkg_, cfg_.vm.accounts), cand->injectionSeed);
    if (tracesOut) *tracesOut = res;
    return integrate(move(cand), res, charge);
}

ExecutionOutcome Campaign::integrate(shared_ptr<Seed> cand, const SequenceResult& res,
                                     bool charge) {
    ++executions_;
    evaluateSeed(*cand, res.traces, pkg_, queue_->uncovered());
    processOracles(*cand, res);

    bool fresh = false;
    optional<BranchId> firstNew;
    for (auto& b : cand->coveredBranches)
        if (!queue_->globalCoverage().count(b)) {
            fresh = true;
            firstNew = b;
            break;
        }

    if (charge) {
        if (sliceLeft_ > 0) --sliceLeft_;
        auto charged = chargeSpent(table_, cand->targetBranch);
        if (fresh && charged && !cfg_.noEnergy) refundSpent(table_, *charged, cfg_.refundNew);
    }

    if (fresh) {
        bool decreased = false;
        for (auto& [b, d] : cand->minDistances) {
            auto it = queue_->bestDistances().find(b);
            if (it == queue_->bestDistances().end() || d < it->second) {
                decreased = true;
                break;
            }
        }
        queue_->admit(cand, firstNew, decreased);
    }
    return {cand, fresh};
}

void Campaign::processOracles(const Seed& cand, const SequenceResult& res) {
    Word deployer = res.traces.empty() ? Word(0) : res.traces[0].input.sender;
    for (auto& tr : res.traces) {
        for (auto& rf : checkTrace(tr, cfg_.vm.attacker(), deployer, cfg_.oracle)) {
            if (!findingKeys_.insert({rf.bugClass, rf.pc}).second) continue;
            Finding f;
            f.bugClass = rf.bugClass;
            f.pc = rf.pc;
            f.evidence = rf.evidence;
            f.witness = nlohmann::json::parse(cand.toJson(pkg_));
            findings_.push_back(move(f));
        }
        if (!tr.reverted)
            for (auto& ce : tr.callEvents)
                if ((ce.kind == Op::CALL && ce.value > 0 && ce.succeeded) ||
                    ce.kind == Op::DELEGATECALL || ce.kind == Op::SELFDESTRUCT)
                    everReleased_ = true;
    }
}

void Campaign::maybeRefresh() {
    double cov = coverageFraction();
    if (cov - lastRefreshCov_ < 0.10) return;
    lastRefreshCov_ = cov;
    uint64_t remaining = table_.unitsLeft();
    if (remaining == 0) return;

    shared_ptr<Seed> best;  // widest coverage, earliest admission on ties
    for (auto& s : queue_->seeds()) {
        if (!best) {
            best = s;
        } else if (s->coveredBranches.size() != best->coveredBranches.size()) {
            if (s->coveredBranches.size() > best->coveredBranches.size()) best = s;
        } else if (s->admissionOrdinal < best->admissionOrdinal) {
            best = s;
        }
    }
    if (!best) return;

    auto res = vm_.executeSequence(best->decode(pkg_, cfg_.vm.accounts), best->injectionSeed);
    ++executions_;
    table_ = branchWeighted(pkg_, res.traces, vuln_, cfg_.w2Const);
    allocate(table_, remaining);
}

void Campaign::pushRoundStats(uint64_t round) {
    RoundStats r;
    r.round = round;
    r.executions = executions_;
    r.coveredBranches = queue_->globalCoverage().size();
    r.coveragePercent = coverageFraction() * 100.0;
    perRound_.push_back(r);
}

double Campaign::coverageFraction() const {
    size_t all = pkg_.cfg.edges().size();
    if (all == 0) return 1.0;
    return double(queue_->globalCoverage().size()) / double(all);
}

vector<shared_ptr<Seed>> Campaign::admissionOrder() const {
    auto v = queue_->seeds();
    sort(v.begin(), v.end(),
         [](auto& a, auto& b) { return a->admissionOrdinal < b->admissionOrdinal; });
    return v;
}

ReplayResult replaySeed(const ContractPackage& pkg, const string& seedJson,
                        const VmOptions& vmOpt, const OracleOptions& opt) {
    ReplayResult rr;
    rr.seed = Seed::fromJson(seedJson, pkg);
    Vm vm(pkg, vmOpt);
    rr.result = vm.executeSequence(rr.seed.decode(pkg, vmOpt.accounts), rr.seed.injectionSeed);

    Word deployer = rr.result.traces.empty() ? Word(0) : rr.result.traces[0].input.sender;
    set<pair<BugClass, uint32_t>> keys;
    bool released = false;
    for (auto& tr : rr.result.traces) {
        for (auto& rf : checkTrace(tr, vmOpt.attacker(), deployer, opt)) {
            if (!keys.insert({rf.bugClass, rf.pc}).second) continue;
            Finding f;
            f.bugClass = rf.bugClass;
            f.pc = rf.pc;
            f.evidence = rf.evidence;
            f.witness = nlohmann::json::parse(rr.seed.toJson(pkg));
            rr.findings.push_back(move(f));
        }
        if (!tr.reverted)
            for (auto& ce : tr.callEvents)
                if ((ce.kind == Op::CALL && ce.value > 0 && ce.succeeded) ||
                    ce.kind == Op::DELEGATECALL || ce.kind == Op::SELFDESTRUCT)
                    released = true;
    }
    if (auto ef = checkEf(pkg, released)) {
        Finding f;
        f.bugClass = ef->bugClass;
        f.pc = ef->pc;
        f.evidence = ef->evidence;
        f.witness = nlohmann::json::parse(rr.seed.toJson(pkg));
        rr.findings.push_back(move(f));
    }
    return rr;
}

}  // namespace statefuzz
