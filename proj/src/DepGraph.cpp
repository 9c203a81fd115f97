#include "statefuzz/DepGraph.h"

#include <nlohmann/json.hpp>

#include <algorithm>

using namespace std;
using json = nlohmann::ordered_json;

namespace statefuzz {

bool DependencyGraph::functionWrites(const string& fn, const string& v) const {
    auto it = writes.find(fn);
    return it != writes.end() && it->second.count(v);
}

bool DependencyGraph::functionReads(const string& fn, const string& v) const {
    auto it = reads.find(fn);
    return it != reads.end() && it->second.count(v);
}

string DependencyGraph::toJson() const {
    json o;
    auto mapOut = [](const map<string, set<string>>& m) {
        json r = json::object();
        for (auto& [fn, vars] : m) r[fn] = vars;
        return r;
    };
    o["writes"] = mapOut(writes);
    o["reads"] = mapOut(reads);
    o["branchReads"] = mapOut(branchReads);
    json rs = json::array();
    for (auto& [fn, v] : rawSelf) rs.push_back({{"function", fn}, {"stateVar", v}});
    o["rawSelf"] = rs;
    return o.dump(2);
}

DependencyGraph graphFromFacts(const vector<AccessFact>& facts) {
    DependencyGraph g;
    for (auto& f : facts) {
        switch (f.kind) {
            case FactKind::Write: g.writes[f.function].insert(f.stateVar); break;
            case FactKind::Read: g.reads[f.function].insert(f.stateVar); break;
            case FactKind::ReadInBranchCondition: g.branchReads[f.function].insert(f.stateVar); break;
            case FactKind::RawSelfDependency: g.rawSelf.insert({f.function, f.stateVar}); break;
        }
    }
    return g;
}

DependencyGraph buildGraph(const ContractPackage& pkg) { return graphFromFacts(pkg.accessFacts); }

namespace {

bool touchesState(const DependencyGraph& g, const string& fn) {
    auto nonEmpty = [&](const map<string, set<string>>& m) {
        auto it = m.find(fn);
        return it != m.end() && !it->second.empty();
    };
    return nonEmpty(g.writes) || nonEmpty(g.reads);
}

bool dependsOn(const DependencyGraph& g, const string& writer, const string& reader) {
    auto wit = g.writes.find(writer);
    auto rit = g.reads.find(reader);
    if (wit == g.writes.end() || rit == g.reads.end()) return false;
    for (auto& v : wit->second)
        if (rit->second.count(v)) return true;
    return false;
}

/* Tarjan strongly-connected components over the writer→reader graph; the
 * emitted component order and in-component order both follow declaration
 * order, so mutually dependent functions come out as declared. */
struct SccBuilder {
    const vector<string>& nodes;
    const vector<vector<size_t>>& succ;
    vector<int> index, low, comp;
    vector<bool> onStack;
    vector<size_t> stack;
    int counter = 0, comps = 0;

    SccBuilder(const vector<string>& n, const vector<vector<size_t>>& s)
        : nodes(n), succ(s), index(n.size(), -1), low(n.size(), 0), comp(n.size(), -1),
          onStack(n.size(), false) {}

    void strongConnect(size_t v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        onStack[v] = true;
        for (size_t w : succ[v]) {
            if (index[w] < 0) {
                strongConnect(w);
                low[v] = min(low[v], low[w]);
            } else if (onStack[w]) {
                low[v] = min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            while (true) {
                size_t w = stack.back();
                stack.pop_back();
                onStack[w] = false;
                comp[w] = comps;
                if (w == v) break;
            }
            ++comps;
        }
    }

    void run() {
        for (size_t v = 0; v < nodes.size(); ++v)
            if (index[v] < 0) strongConnect(v);
    }
};

}  // namespace

SequenceTemplate orderSequence(const DependencyGraph& g, const vector<string>& abiOrder,
                               const string& ctorName) {
    SequenceTemplate t;
    t.calls.push_back(ctorName);

    vector<string> nodes;
    for (auto& fn : abiOrder)
        if (fn != ctorName && touchesState(g, fn)) nodes.push_back(fn);

    vector<vector<size_t>> succ(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i)
        for (size_t j = 0; j < nodes.size(); ++j)
            if (i != j && dependsOn(g, nodes[i], nodes[j])) succ[i].push_back(j);

    SccBuilder scc(nodes, succ);
    scc.run();

    /* Condensation is a DAG; Kahn's algorithm over components, preferring the
     * component whose earliest-declared member comes first. */
    int n = scc.comps;
    vector<set<int>> compSucc(n);
    vector<int> indeg(n, 0);
    for (size_t i = 0; i < nodes.size(); ++i)
        for (size_t j : succ[i])
            if (scc.comp[i] != scc.comp[j] && compSucc[scc.comp[i]].insert(scc.comp[j]).second)
                ++indeg[scc.comp[j]];

    vector<vector<size_t>> members(n);  // node indices, already in declaration order
    for (size_t i = 0; i < nodes.size(); ++i) members[scc.comp[i]].push_back(i);

    vector<bool> done(n, false);
    for (int emitted = 0; emitted < n; ++emitted) {
        int pick = -1;
        for (size_t i = 0; i < nodes.size(); ++i) {  // declaration order scan
            int c = scc.comp[i];
            if (!done[c] && indeg[c] == 0) {
                pick = c;
                break;
            }
        }
        if (pick < 0) break;  // unreachable: condensation is acyclic
        done[pick] = true;
        for (size_t i : members[pick]) t.calls.push_back(nodes[i]);
        for (int s : compSucc[pick]) --indeg[s];
    }
    /* Functions that touch no storage have no ordering constraints; they
     * still belong in the sequence so their code gets fuzzed at all. */
    for (auto& fn : abiOrder)
        if (fn != ctorName && !touchesState(g, fn)) t.calls.push_back(fn);
    return t;
}

SequenceTemplate orderSequence(const DependencyGraph& g, const ContractPackage& pkg) {
    vector<string> abiOrder;
    string ctorName = "constructor";
    for (auto& f : pkg.functions) {
        abiOrder.push_back(f.name);
        if (f.isConstructor) ctorName = f.name;
    }
    return orderSequence(g, abiOrder, ctorName);
}

SequenceTemplate mutateSequence(const SequenceTemplate& t, const DependencyGraph& g,
                                size_t maxDup) {
    SequenceTemplate out = t;

    set<string> branchReadVars;
    for (auto& [fn, vars] : g.branchReads) branchReadVars.insert(vars.begin(), vars.end());

    /* Distinct functions in first-appearance order of the input template. */
    vector<string> order;
    for (auto& fn : t.calls)
        if (find(order.begin(), order.end(), fn) == order.end()) order.push_back(fn);

    for (auto& fn : order) {
        set<string> vars;
        for (auto& [f, v] : g.rawSelf)
            if (f == fn && branchReadVars.count(v)) vars.insert(v);
        if (vars.empty()) continue;
        if (size_t(count(out.calls.begin(), out.calls.end(), fn)) >= maxDup) continue;

        size_t pos = out.calls.size();
        for (size_t i = 0; i < out.calls.size(); ++i)
            if (out.calls[i] == fn) {
                pos = i;
                break;
            }
        /* earliest later reader across the qualifying variables */
        size_t insertAt = out.calls.size();
        for (size_t j = pos + 1; j < out.calls.size() && j < insertAt; ++j)
            for (auto& v : vars)
                if (g.functionReads(out.calls[j], v)) {
                    insertAt = j;
                    break;
                }

        set<size_t> shifted;
        for (size_t idx : out.duplicatedAt) shifted.insert(idx >= insertAt ? idx + 1 : idx);
        shifted.insert(insertAt);
        out.duplicatedAt = move(shifted);
        out.calls.insert(out.calls.begin() + ptrdiff_t(insertAt), fn);
    }
    return out;
}

}  // namespace statefuzz
