#include "statefuzz/Corpus.h"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <stdexcept>

using namespace std;
using json = nlohmann::ordered_json;

namespace statefuzz {

size_t seedStreamWidth(const SequenceTemplate& tmpl, const ContractPackage& pkg) {
    size_t w = 0;
    for (auto& name : tmpl.calls) {
        const FunctionAbi* fn = pkg.findFunction(name);
        if (!fn) throw runtime_error("unknown function in template: " + name);
        w += encodedTxWidth(*fn);
    }
    return w;
}

Bytes Seed::stream() const {
    Bytes out;
    for (auto& tx : rawTxs) out.insert(out.end(), tx.begin(), tx.end());
    return out;
}

void Seed::setStream(const Bytes& stream, const ContractPackage& pkg) {
    rawTxs.clear();
    size_t off = 0;
    for (auto& name : tmpl.calls) {
        const FunctionAbi* fn = pkg.findFunction(name);
        if (!fn) throw runtime_error("unknown function in template: " + name);
        size_t w = encodedTxWidth(*fn);
        Bytes tx(w, 0);
        for (size_t i = 0; i < w && off + i < stream.size(); ++i) tx[i] = stream[off + i];
        off += w;
        rawTxs.push_back(move(tx));
    }
}

vector<TxInput> Seed::decode(const ContractPackage& pkg, const vector<Word>& accounts) const {
    vector<TxInput> seq;
    for (size_t i = 0; i < tmpl.calls.size(); ++i) {
        const FunctionAbi* fn = pkg.findFunction(tmpl.calls[i]);
        if (!fn) throw runtime_error("unknown function in template: " + tmpl.calls[i]);
        const Bytes& raw = i < rawTxs.size() ? rawTxs[i] : Bytes{};
        seq.push_back(decodeTx(raw.data(), raw.size(), *fn, accounts));
    }
    return seq;
}

string Seed::toJson(const ContractPackage& pkg) const {
    json o;
    o["schema"] = "statefuzz-seed-v1";
    o["packageHash"] = pkg.hash();
    o["calls"] = tmpl.calls;
    o["duplicatedAt"] = tmpl.duplicatedAt;
    json txs = json::array();
    for (auto& tx : rawTxs) txs.push_back(toHex(tx));
    o["rawTxs"] = txs;
    o["injectionSeed"] = injectionSeed;
    return o.dump(2);
}

Seed Seed::fromJson(const string& text, const ContractPackage& pkg) {
    json o = json::parse(text);
    if (o.value("schema", "") != "statefuzz-seed-v1") throw runtime_error("not a seed file");
    if (o.at("packageHash").get<uint64_t>() != pkg.hash())
        throw runtime_error("seed was recorded against a different package");
    Seed s;
    s.tmpl.calls = o.at("calls").get<vector<string>>();
    for (auto& idx : o.value("duplicatedAt", vector<size_t>{})) s.tmpl.duplicatedAt.insert(idx);
    for (auto& h : o.at("rawTxs")) s.rawTxs.push_back(fromHex(h.get<string>()));
    s.injectionSeed = o.at("injectionSeed").get<uint64_t>();
    /* normalize widths */
    s.setStream(s.stream(), pkg);
    return s;
}

/* ---- branch distance ---- */

namespace {

/* Follows an ISZERO chain down to the underlying comparison, flipping the
 * wanted outcome at every inversion, then applies the distance rule. */
Distance provenanceDistance(const ExecutionTrace& trace, int32_t prov, bool wantTrue) {
    if (prov < 0) return {1};
    const CmpEvent* c = &trace.cmpEvents[size_t(prov)];
    while (c->op == Op::ISZERO) {
        if (c->operandProvenance < 0) {
            /* bare truth test: distance to make the operand zero / nonzero */
            if (wantTrue) return {c->a};
            return {c->a != 0 ? Word(0) : Word(1)};
        }
        wantTrue = !wantTrue;
        c = &trace.cmpEvents[size_t(c->operandProvenance)];
    }
    const Word &a = c->a, &b = c->b;
    switch (c->op) {
        case Op::EQ:
            if (wantTrue) return {a > b ? a - b : b - a};
            return {a == b ? Word(1) : Word(0)};
        case Op::LT:
            if (wantTrue) return {a < b ? Word(0) : a - b + 1};
            return {a < b ? b - a : Word(0)};
        case Op::GT:
            if (wantTrue) return {a > b ? Word(0) : b - a + 1};
            return {a > b ? a - b : Word(0)};
        default:
            return {1};
    }
}

}  // namespace

optional<Distance> branchDistance(const ExecutionTrace& trace, const BranchId& b, const Cfg& cfg) {
    auto blockIt = cfg.blocks().find(b.first);
    if (blockIt == cfg.blocks().end()) return nullopt;
    const BasicBlock& blk = blockIt->second;

    optional<Distance> best;
    auto consider = [&](const Distance& d) {
        if (!best || d < *best) best = d;
    };
    for (auto& ev : trace.branchEvents) {
        if (ev.branchId.first != b.first) continue;
        bool wantTaken;
        if (blk.jumpTarget && *blk.jumpTarget == b.second) wantTaken = true;
        else if (blk.end == b.second) wantTaken = false;
        else continue;  // edge does not belong to this JUMPI
        if (ev.taken == wantTaken) {
            consider({0});
            continue;
        }
        consider(provenanceDistance(trace, ev.condProvenance, wantTaken));
    }
    return best;
}

optional<Distance> branchDistance(const vector<ExecutionTrace>& traces, const BranchId& b,
                                  const Cfg& cfg) {
    optional<Distance> best;
    for (auto& t : traces) {
        auto d = branchDistance(t, b, cfg);
        if (d && (!best || *d < *best)) best = d;
    }
    return best;
}

void evaluateSeed(Seed& seed, const vector<ExecutionTrace>& traces, const ContractPackage& pkg,
                  const set<BranchId>& uncovered) {
    seed.coveredBranches = coverageOf(traces);
    seed.minDistances.clear();
    for (auto& b : uncovered) {
        if (seed.coveredBranches.count(b)) {
            seed.minDistances[b] = {0};
            continue;
        }
        if (auto d = branchDistance(traces, b, pkg.cfg)) seed.minDistances[b] = *d;
    }
    seed.hitNestedBranch = false;
    for (auto& b : seed.coveredBranches)
        if (pkg.cfg.nestingDepth(b) >= 2) {
            seed.hitNestedBranch = true;
            break;
        }
}

/* ---- queue ---- */

SeedQueue::SeedQueue(set<BranchId> allBranches, size_t cap)
    : all_(move(allBranches)), cap_(cap) {}

set<BranchId> SeedQueue::uncovered() const {
    set<BranchId> u;
    set_difference(all_.begin(), all_.end(), covered_.begin(), covered_.end(),
                   inserter(u, u.begin()));
    return u;
}

bool SeedQueue::contains(const shared_ptr<Seed>& s) const {
    return find(seeds_.begin(), seeds_.end(), s) != seeds_.end();
}

bool SeedQueue::admit(const shared_ptr<Seed>& s, optional<BranchId> target, bool decreased) {
    if (contains(s)) return false;
    s->targetBranch = target;
    s->decreasedDistance = decreased;
    s->admissionOrdinal = nextOrdinal_++;
    seeds_.push_back(s);
    absorbCoverage(s->coveredBranches);
    if (seeds_.size() > cap_) evict();
    return true;
}

void SeedQueue::absorbCoverage(const set<BranchId>& cov) {
    for (auto& b : cov) {
        covered_.insert(b);
        best_.erase(b);  // distance tracking only matters while uncovered
    }
}

void SeedQueue::noteDistance(const BranchId& b, const Distance& d) {
    if (covered_.count(b)) return;
    auto it = best_.find(b);
    if (it == best_.end() || d < it->second) best_[b] = d;
}

void SeedQueue::evict() {
    /* Count branches covered by exactly one seed; drop the seed contributing
     * fewest of them (ties: the newest goes). */
    map<BranchId, int> owners;
    for (auto& s : seeds_)
        for (auto& b : s->coveredBranches) ++owners[b];
    size_t victim = 0;
    size_t victimUnique = SIZE_MAX;
    for (size_t i = 0; i < seeds_.size(); ++i) {
        size_t unique = 0;
        for (auto& b : seeds_[i]->coveredBranches)
            if (owners[b] == 1) ++unique;
        if (unique <= victimUnique) {  // <= prefers the later (newer) seed on ties
            victimUnique = unique;
            victim = i;
        }
    }
    seeds_.erase(seeds_.begin() + ptrdiff_t(victim));
}

void selectSeeds(SeedQueue& queue, const vector<shared_ptr<Seed>>& executed) {
    /* Baseline for the "decreased a distance" flag: best distances known
     * before this batch. */
    map<BranchId, Distance> baseline = queue.bestDistances();
    auto decreasedAny = [&](const shared_ptr<Seed>& s) {
        for (auto& [b, d] : s->minDistances) {
            if (queue.globalCoverage().count(b)) continue;
            auto it = baseline.find(b);
            if (it == baseline.end() || d < it->second) return true;
        }
        return false;
    };

    /* Rule (a): new coverage, processed in execution order so earlier seeds
     * win ties for the same branch. */
    for (auto& s : executed) {
        set<BranchId> fresh;
        set_difference(s->coveredBranches.begin(), s->coveredBranches.end(),
                       queue.globalCoverage().begin(), queue.globalCoverage().end(),
                       inserter(fresh, fresh.begin()));
        if (fresh.empty()) continue;
        if (!queue.contains(s)) queue.admit(s, *fresh.begin(), decreasedAny(s));
        else queue.absorbCoverage(s->coveredBranches);
    }

    /* Rule (b): per uncovered branch, the batch's minimum-distance seed. */
    for (auto& b : queue.uncovered()) {
        shared_ptr<Seed> argmin;
        Distance bestD;
        for (auto& s : executed) {
            auto it = s->minDistances.find(b);
            if (it == s->minDistances.end()) continue;
            if (!argmin || it->second < bestD) {
                argmin = s;
                bestD = it->second;
            }
        }
        if (!argmin || queue.contains(argmin)) continue;
        auto it = baseline.find(b);
        bool decreased = it == baseline.end() || bestD < it->second;
        queue.admit(argmin, b, decreased);
    }

    for (auto& s : executed)
        for (auto& [b, d] : s->minDistances) queue.noteDistance(b, d);
}

}  // namespace statefuzz
