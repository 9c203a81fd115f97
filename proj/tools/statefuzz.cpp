#include "statefuzz/Campaign.h"
#include "statefuzz/Compiler.h"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace std;
using namespace statefuzz;

namespace {

string readFile(const string& path) {
    ifstream in(path, ios::binary);
    if (!in) throw runtime_error("cannot open " + path);
    return string(istreambuf_iterator<char>(in), istreambuf_iterator<char>());
}

void writeFile(const string& path, const string& text) {
    ofstream out(path, ios::binary);
    if (!out) throw runtime_error("cannot write " + path);
    out << text;
}

bool endsWith(const string& s, const string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ContractPackage loadPackage(const string& path) {
    string text = readFile(path);
    if (endsWith(path, ".json")) return ContractPackage::fromJson(text);
    auto res = compileContract(text);
    for (auto& d : res.diagnostics) cerr << path << ": " << d.render() << "\n";
    if (!res.ok()) throw runtime_error("compilation failed");
    return *res.package;
}

shared_ptr<Seed> widestSeed(const SeedQueue& q) {
    shared_ptr<Seed> best;
    for (auto& s : q.seeds()) {
        if (!best) {
            best = s;
        } else if (s->coveredBranches.size() != best->coveredBranches.size()) {
            if (s->coveredBranches.size() > best->coveredBranches.size()) best = s;
        } else if (s->admissionOrdinal < best->admissionOrdinal) {
            best = s;
        }
    }
    return best;
}

struct FuzzArgs {
    string target, reportPath, csvPath;
    CampaignConfig cfg;
    bool dumpDepgraph = false, dumpWeights = false, dumpMask = false, dumpTrace = false;
};

int runFuzz(const FuzzArgs& a) {
    CampaignConfig cfg = a.cfg;
    Campaign campaign(loadPackage(a.target), cfg);
    CampaignReport rep = campaign.run();

    if (a.dumpDepgraph) cout << campaign.graph().toJson() << "\n";
    if (a.dumpWeights) cout << campaign.weights().toJson().dump(2) << "\n";

    auto best = widestSeed(campaign.queue());
    if (a.dumpTrace && best) {
        Vm vm(campaign.package(), cfg.vm);
        auto res = vm.executeSequence(best->decode(campaign.package(), cfg.vm.accounts),
                                      best->injectionSeed);
        for (auto& tr : res.traces) cout << tr.renderText();
    }
    if (a.dumpMask && best) {
        /* one extra mask computation over the widest seed, off-budget */
        Vm vm(campaign.package(), cfg.vm);
        Rng rng(cfg.rngSeed);
        auto uncovered = campaign.queue().uncovered();
        MutationContext ctx{campaign.package(), campaign.interesting(),
                            [&](shared_ptr<Seed> cand) {
                                cand->injectionSeed = best->injectionSeed;
                                auto res = vm.executeSequence(
                                    cand->decode(campaign.package(), cfg.vm.accounts),
                                    cand->injectionSeed);
                                evaluateSeed(*cand, res.traces, campaign.package(), uncovered);
                                return ExecutionOutcome{cand, false};
                            },
                            [] { return uint64_t(1); },
                            {}};
        auto nested = nestedHit(*best, campaign.package().cfg);
        cout << computeMask(*best, nested, uncovered, rng, ctx).render();
    }

    string reportText = rep.toJson().dump(2) + "\n";
    if (!a.reportPath.empty()) {
        writeFile(a.reportPath, reportText);
        cout << "coverage " << rep.branchCoveragePercent << "% | " << rep.findings.size()
             << " finding(s) | " << rep.executions << " executions | report " << a.reportPath
             << "\n";
    } else {
        cout << reportText;
    }
    if (!a.csvPath.empty()) writeFile(a.csvPath, rep.seriesCsv());

    return rep.hasFindings() ? 2 : 0;
}

int runCompile(const string& source, const string& outPath) {
    auto res = compileContract(readFile(source));
    for (auto& d : res.diagnostics) cerr << source << ": " << d.render() << "\n";
    if (!res.ok()) return 1;
    string text = res.package->toJson();
    if (outPath.empty())
        cout << text << "\n";
    else
        writeFile(outPath, text);
    return 0;
}

int runReplay(const string& seedFile, const string& pkgFile, const OracleOptions& oracle) {
    ContractPackage pkg = loadPackage(pkgFile);
    ReplayResult rr = replaySeed(pkg, readFile(seedFile), defaultVmOptions(), oracle);
    for (auto& tr : rr.result.traces) cout << tr.renderText();
    nlohmann::json fs = nlohmann::json::array();
    for (auto& f : rr.findings) fs.push_back(f.toJson());
    cout << fs.dump(2) << "\n";
    return rr.findings.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coverage-guided fuzzer for stateful stack-machine contracts"};
    app.require_subcommand(1);

    FuzzArgs fa;
    auto* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
    fuzz->add_option("target", fa.target, "contract source (.clite) or package (.json)")
        ->required();
    fuzz->add_option("--time", fa.cfg.timeBudgetSeconds, "time budget, seconds");
    fuzz->add_option("--energy", fa.cfg.energyBudget, "total execution budget");
    fuzz->add_option("--seed", fa.cfg.rngSeed, "campaign RNG seed");
    fuzz->add_option("--report", fa.reportPath, "write the JSON report to this path");
    fuzz->add_option("--csv", fa.csvPath, "write the per-round coverage series CSV");
    fuzz->add_option("--max-dup", fa.cfg.maxDup, "max copies of one function per sequence");
    fuzz->add_option("--workers", fa.cfg.workers, "worker threads for batch execution");
    fuzz->add_flag("--no-seq-mutation", fa.cfg.noSeqMutation, "fuzz the plain ordered sequence");
    fuzz->add_flag("--no-mask", fa.cfg.noMask, "random mutation without mask guidance");
    fuzz->add_flag("--no-energy", fa.cfg.noEnergy, "uniform allocation, no refunds");
    fuzz->add_flag("--no-harvest", fa.cfg.noHarvest, "keep bytecode constants out of the dictionary");
    fuzz->add_flag("--se-include-ordering", fa.cfg.oracle.seIncludeOrdering,
                   "widen the balance-equality oracle to LT/GT");
    fuzz->add_flag("--dump-depgraph", fa.dumpDepgraph, "print the dependency graph JSON");
    fuzz->add_flag("--dump-weights", fa.dumpWeights, "print the branch weight table JSON");
    fuzz->add_flag("--dump-mask", fa.dumpMask, "print a mutation mask for the widest seed");
    fuzz->add_flag("--dump-trace", fa.dumpTrace, "print the widest seed's execution trace");

    string compileSrc, compileOut;
    auto* comp = app.add_subcommand("compile", "compile a contract to a package");
    comp->add_option("source", compileSrc, "contract source file")->required();
    comp->add_option("-o,--output", compileOut, "package output path (stdout when omitted)");

    string seedFile, pkgFile;
    OracleOptions replayOracle;
    auto* rep = app.add_subcommand("replay", "re-execute a recorded seed deterministically");
    rep->add_option("seedfile", seedFile, "serialized seed JSON")->required();
    rep->add_option("package", pkgFile, "contract source or package")->required();
    rep->add_flag("--se-include-ordering", replayOracle.seIncludeOrdering,
                  "widen the balance-equality oracle to LT/GT");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fuzz->parsed()) return runFuzz(fa);
        if (comp->parsed()) return runCompile(compileSrc, compileOut);
        if (rep->parsed()) return runReplay(seedFile, pkgFile, replayOracle);
    } catch (const exception& e) {
        cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
