#include "statefuzz/MaskMut.h"

#include <algorithm>
#include <sstream>

using namespace std;

namespace statefuzz {

const char* mutKindName(MutKind k) {
    switch (k) {
        case MutKind::O: return "O";
        case MutKind::I: return "I";
        case MutKind::R: return "R";
        case MutKind::D: return "D";
    }
    return "?";
}

Bytes applyMutation(const Bytes& t, const Mutation& m) {
    Bytes out = t;
    switch (m.x) {
        case MutKind::O:
        case MutKind::R: {
            size_t end = min<size_t>(t.size(), size_t(m.i) + m.n);
            for (size_t j = m.i; j < end; ++j) out[j] = m.payload[j - m.i];
            break;
        }
        case MutKind::I: {
            size_t at = min<size_t>(t.size(), m.i);
            out.insert(out.begin() + ptrdiff_t(at), m.payload.begin(), m.payload.end());
            break;
        }
        case MutKind::D: {
            size_t from = min<size_t>(t.size(), m.i);
            size_t to = min<size_t>(t.size(), size_t(m.i) + m.n);
            out.erase(out.begin() + ptrdiff_t(from), out.begin() + ptrdiff_t(to));
            break;
        }
    }
    return out;
}

bool MutationMask::okToMutate(const Mutation& m) const {
    size_t end = min<size_t>(perPosition.size(), size_t(m.i) + m.n);
    for (size_t j = m.i; j < end; ++j)
        if (!((perPosition[j] >> unsigned(m.x)) & 1u)) return false;
    return true;
}

string MutationMask::render() const {
    ostringstream os;
    os << "pos  OIRD\n";
    for (size_t i = 0; i < perPosition.size(); ++i) {
        os.width(3);
        os << i << "  ";
        for (MutKind k : {MutKind::O, MutKind::I, MutKind::R, MutKind::D})
            os << (allows(i, k) ? mutKindName(k) : ".");
        os << "\n";
    }
    return os.str();
}

InterestingTable InterestingTable::make(const ContractPackage& pkg, bool harvest) {
    InterestingTable t;
    t.values = {Word(0),
                Word(1),
                Word(2),
                Word((uint64_t(1) << 8) - 1),
                Word((uint64_t(1) << 16) - 1),
                Word(~uint64_t(0)),
                Word(1) << 255,
                Word(0) - 1};
    if (harvest) {
        set<Word> seen(t.values.begin(), t.values.end());
        for (auto& w : harvestConstants(pkg.bytecode))
            if (seen.insert(w).second) t.values.push_back(w);
    }
    return t;
}

set<BranchId> nestedHit(const Seed& seed, const Cfg& cfg) {
    set<BranchId> out;
    for (auto& b : seed.coveredBranches)
        if (cfg.nestingDepth(b) >= 2) out.insert(b);
    return out;
}

namespace {

constexpr MutKind kKinds[] = {MutKind::O, MutKind::I, MutKind::R, MutKind::D};

vector<pair<size_t, size_t>> fieldRanges(const SequenceTemplate& tmpl,
                                         const ContractPackage& pkg) {
    vector<pair<size_t, size_t>> out;
    size_t off = 0;
    for (auto& name : tmpl.calls) {
        const FunctionAbi* fn = pkg.findFunction(name);
        if (!fn) continue;
        out.push_back({off, off + 1});
        out.push_back({off + 1, off + 1 + kWordBytes});
        for (size_t k = 0; k < fn->params.size(); ++k) {
            size_t s = off + 1 + kWordBytes * (k + 1);
            out.push_back({s, s + kWordBytes});
        }
        off += encodedTxWidth(*fn);
    }
    return out;
}

size_t fieldEnd(const vector<pair<size_t, size_t>>& fields, size_t i) {
    for (auto& [s, e] : fields)
        if (i >= s && i < e) return e;
    return i + 1;
}

Bytes randomBytes(Rng& rng, size_t n) {
    Bytes b(n);
    for (auto& x : b) x = rng.byte();
    return b;
}

Word pickWord(const InterestingTable& table, Rng& rng) {
    return table.values[size_t(rng.range(0, table.values.size() - 1))];
}

shared_ptr<Seed> makeChild(const Seed& parent, const Bytes& rawStream,
                           const ContractPackage& pkg) {
    auto child = make_shared<Seed>();
    child->tmpl = parent.tmpl;
    child->targetBranch = parent.targetBranch;  // energy is charged against the lineage's target
    child->setStream(rawStream, pkg);
    return child;
}

bool hitsAll(const Seed& mutant, const set<BranchId>& nested) {
    return includes(mutant.coveredBranches.begin(), mutant.coveredBranches.end(), nested.begin(),
                    nested.end());
}

bool movesCloser(const Seed& mutant, const Seed& parent) {
    for (auto& [b, d] : mutant.minDistances) {
        auto it = parent.minDistances.find(b);
        if (it == parent.minDistances.end() || d < it->second) return true;
    }
    return false;
}

/* Sweep-stage mutation: O takes a fresh random block, I/D shift a few bytes,
 * R rewrites the tail of the enclosing 32-byte field with a dictionary value
 * so equality guards can be matched exactly. */
Mutation drawSweepMutation(MutKind x, uint32_t i, size_t len,
                           const vector<pair<size_t, size_t>>& fields,
                           const InterestingTable& table, Rng& rng) {
    Mutation m;
    m.x = x;
    m.i = i;
    size_t room = len - i;
    switch (x) {
        case MutKind::O:
            m.n = uint32_t(rng.range(1, min<uint64_t>(32, room)));
            m.payload = randomBytes(rng, m.n);
            break;
        case MutKind::I:
            m.n = uint32_t(rng.range(1, min<uint64_t>(8, room)));
            m.payload = randomBytes(rng, m.n);
            break;
        case MutKind::R: {
            m.n = uint32_t(fieldEnd(fields, i) - i);
            m.payload = wordLowBytes(pickWord(table, rng), m.n);
            break;
        }
        case MutKind::D:
            m.n = uint32_t(rng.range(1, min<uint64_t>(8, room)));
            break;
    }
    return m;
}

}  // namespace

MutationMask computeMask(const Seed& parent, const set<BranchId>& nestedBranches,
                         const set<BranchId>& uncovered, Rng& rng, const MutationContext& ctx) {
    Bytes stream = parent.stream();
    size_t len = stream.size();
    MutationMask mask(len);
    if (len == 0) return mask;

    uint64_t sharedN = rng.range(1, len);  // one shared draw per mask computation
    (void)uncovered;                       // mutants are re-evaluated against live coverage

    for (uint32_t i = 0; i < len; ++i) {
        for (MutKind x : kKinds) {
            Mutation m;
            m.x = x;
            m.i = i;
            size_t room = len - i;
            switch (x) {
                case MutKind::O:
                    m.n = uint32_t(min<uint64_t>(sharedN, room));
                    m.payload = randomBytes(rng, m.n);
                    break;
                case MutKind::I:
                    m.n = uint32_t(sharedN);
                    m.payload = randomBytes(rng, m.n);
                    break;
                case MutKind::R:
                    m.n = uint32_t(min<uint64_t>(sharedN, room));
                    m.payload = wordLowBytes(pickWord(ctx.table, rng), m.n);
                    break;
                case MutKind::D:
                    m.n = uint32_t(min<uint64_t>(sharedN, room));
                    break;
            }
            auto out = ctx.execute(makeChild(parent, applyMutation(stream, m), ctx.pkg));
            if (hitsAll(*out.seed, nestedBranches) || movesCloser(*out.seed, parent))
                mask.allow(i, x);
        }
    }
    return mask;
}

vector<shared_ptr<Seed>> mutationRound(SeedQueue& queue, const vector<shared_ptr<Seed>>& order,
                                       Rng& rng, const MutationContext& ctx) {
    vector<shared_ptr<Seed>> batch;
    MutationContext local = ctx;
    local.execute = [&](shared_ptr<Seed> cand) {
        auto out = ctx.execute(move(cand));
        batch.push_back(out.seed);
        return out;
    };

    bool progress = true;
    while (progress && local.unitsLeft() > 0) {
        progress = false;
        for (auto& seed : order) {
            if (local.unitsLeft() == 0) break;
            if (!seed->hitNestedBranch && !seed->decreasedDistance) continue;  // line-18 gate
            Bytes stream = seed->stream();
            size_t len = stream.size();
            if (len == 0) continue;
            if (local.unitsLeft() < 4 * len) continue;  // cannot afford the probe pass

            auto nested = nestedHit(*seed, ctx.pkg.cfg);
            MutationMask mask = computeMask(*seed, nested, queue.uncovered(), rng, local);
            progress = true;

            auto fields = fieldRanges(seed->tmpl, ctx.pkg);
            bool spent = false;
            for (uint32_t i = 0; i < len && local.unitsLeft() > 0; ++i) {
                for (MutKind x : kKinds) {
                    if (local.unitsLeft() == 0) break;
                    Mutation m = drawSweepMutation(x, i, len, fields, ctx.table, rng);
                    if (!mask.okToMutate(m)) continue;
                    if (ctx.onMutant) ctx.onMutant(*seed, mask, m);
                    local.execute(makeChild(*seed, applyMutation(stream, m), ctx.pkg));
                    spent = true;
                }
            }
            (void)spent;
        }
    }
    return batch;
}

vector<shared_ptr<Seed>> randomMutationRound(SeedQueue& queue, Rng& rng,
                                             const MutationContext& ctx) {
    vector<shared_ptr<Seed>> batch;
    while (ctx.unitsLeft() > 0 && !queue.seeds().empty()) {
        auto& parent = queue.seeds()[size_t(rng.range(0, queue.seeds().size() - 1))];
        Bytes stream = parent->stream();
        size_t len = stream.size();
        if (len == 0) break;
        Mutation m;
        m.x = kKinds[size_t(rng.range(0, 3))];
        m.i = uint32_t(rng.range(0, len - 1));
        size_t room = len - m.i;
        switch (m.x) {
            case MutKind::O:
                m.n = uint32_t(rng.range(1, min<uint64_t>(32, room)));
                m.payload = randomBytes(rng, m.n);
                break;
            case MutKind::I:
                m.n = uint32_t(rng.range(1, min<uint64_t>(8, room)));
                m.payload = randomBytes(rng, m.n);
                break;
            case MutKind::R:
                m.n = uint32_t(rng.range(1, min<uint64_t>(32, room)));
                m.payload = wordLowBytes(pickWord(ctx.table, rng), m.n);
                break;
            case MutKind::D:
                m.n = uint32_t(rng.range(1, min<uint64_t>(8, room)));
                break;
        }
        auto out = ctx.execute(makeChild(*parent, applyMutation(stream, m), ctx.pkg));
        batch.push_back(out.seed);
    }
    return batch;
}

}  // namespace statefuzz
