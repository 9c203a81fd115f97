#include "statefuzz/Energy.h"

#include <algorithm>

using namespace std;

namespace statefuzz {

uint64_t BranchWeightTable::unitsLeft() const {
    uint64_t total = 0;
    for (auto& [b, r] : rows) total += r.remaining();
    return total;
}

nlohmann::json BranchWeightTable::toJson() const {
    nlohmann::json arr = nlohmann::json::array();
    for (auto& [b, r] : rows)
        arr.push_back({{"branch", branchIdToString(b)},
                       {"nestedScore", r.nestedScore},
                       {"w1", r.w1},
                       {"w2", r.w2},
                       {"allocated", r.allocated},
                       {"spent", r.spent}});
    return arr;
}

set<uint32_t> prefixInference(const ContractPackage& pkg, uint32_t fromBlock) {
    set<uint32_t> blocks = pkg.cfg.reachableBlocks(fromBlock);
    set<uint32_t> pcs;
    for (auto& ins : pkg.cfg.instructions())
        if (blocks.count(pkg.cfg.blockOf(ins.pc))) pcs.insert(ins.pc);
    return pcs;
}

BranchWeightTable branchWeighted(const ContractPackage& pkg,
                                 const vector<ExecutionTrace>& preTraces,
                                 const set<uint32_t>& vulnerableOffsets, uint64_t w2Const) {
    BranchWeightTable table;
    for (auto& e : pkg.cfg.edges()) table.rows[e];  // every static edge gets a row

    map<uint32_t, bool> riskyBeyond;  // branching block -> closure holds a risky pc
    auto risky = [&](uint32_t block) {
        auto it = riskyBeyond.find(block);
        if (it != riskyBeyond.end()) return it->second;
        bool hit = false;
        for (uint32_t pc : prefixInference(pkg, block))
            if (vulnerableOffsets.count(pc)) {
                hit = true;
                break;
            }
        return riskyBeyond[block] = hit;
    };

    uint64_t counter = 0;  // guard depth along the whole sequence path
    for (auto& trace : preTraces) {
        for (auto& ev : trace.branchEvents) {
            ++counter;
            auto it = table.rows.find(ev.branchId);
            if (it == table.rows.end()) continue;
            BranchWeight& r = it->second;
            r.nestedScore = max(r.nestedScore, counter);
            r.w1 = r.nestedScore;
            if (risky(pkg.cfg.blockOf(ev.pc))) r.w2 = w2Const;
        }
    }
    return table;
}

void allocate(BranchWeightTable& table, uint64_t totalBudget) {
    auto& rows = table.rows;
    if (rows.empty()) return;

    unsigned __int128 sum = 0;
    for (auto& [b, r] : rows) sum += 1 + r.weight();

    uint64_t given = 0;
    for (auto& [b, r] : rows) {
        r.allocated = uint64_t((unsigned __int128)totalBudget * (1 + r.weight()) / sum);
        r.spent = 0;
        given += r.allocated;
    }

    if (given < totalBudget) {  // remainder to the heaviest row, ties to lowest id
        auto best = rows.begin();
        for (auto it = next(rows.begin()); it != rows.end(); ++it)
            if (it->second.weight() > best->second.weight()) best = it;
        best->second.allocated += totalBudget - given;
    }

    if (totalBudget >= rows.size()) {  // floor every row at 1 unit
        for (auto& [b, r] : rows) {
            if (r.allocated > 0) continue;
            auto donor = rows.end();
            for (auto it = rows.begin(); it != rows.end(); ++it)
                if (it->second.allocated >= 2 &&
                    (donor == rows.end() || it->second.allocated > donor->second.allocated))
                    donor = it;
            if (donor == rows.end()) break;
            donor->second.allocated -= 1;
            r.allocated += 1;
        }
    }
}

uint64_t updateEnergy(uint64_t energy, bool newCoverage, uint64_t allocatedCap,
                      uint64_t refundNew) {
    uint64_t v = energy == 0 ? 0 : energy - 1;
    if (newCoverage) v = min(v + refundNew, allocatedCap);
    return v;
}

optional<BranchId> chargeSpent(BranchWeightTable& table, const optional<BranchId>& target) {
    if (target) {
        auto it = table.rows.find(*target);
        if (it != table.rows.end() && it->second.remaining() > 0) {
            ++it->second.spent;
            return *target;
        }
    }
    for (auto& [b, r] : table.rows)
        if (r.remaining() > 0) {
            ++r.spent;
            return b;
        }
    return nullopt;
}

void refundSpent(BranchWeightTable& table, const BranchId& charged, uint64_t refundNew) {
    auto it = table.rows.find(charged);
    if (it == table.rows.end()) return;
    it->second.spent -= min(refundNew, it->second.spent);
}

vector<shared_ptr<Seed>> seedPriority(const SeedQueue& queue, const BranchWeightTable& table) {
    auto weightOf = [&](const Seed& s) {
        uint64_t w = 0;
        for (auto& b : s.coveredBranches) {
            auto it = table.rows.find(b);
            if (it != table.rows.end()) w = max(w, it->second.weight());
        }
        return w;
    };
    vector<shared_ptr<Seed>> out = queue.seeds();
    stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
        uint64_t wa = weightOf(*a), wb = weightOf(*b);
        if (wa != wb) return wa > wb;
        return a->admissionOrdinal < b->admissionOrdinal;
    });
    return out;
}

}  // namespace statefuzz
