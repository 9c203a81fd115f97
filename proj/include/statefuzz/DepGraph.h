#pragma once

#include "statefuzz/Package.h"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace statefuzz {

/* State-variable data dependencies between functions, derived entirely from
 * a package's access facts. */
struct DependencyGraph {
    std::map<std::string, std::set<std::string>> writes;
    std::map<std::string, std::set<std::string>> reads;
    std::map<std::string, std::set<std::string>> branchReads;
    std::set<std::pair<std::string, std::string>> rawSelf;  // (function, stateVar)

    bool functionWrites(const std::string& fn, const std::string& v) const;
    bool functionReads(const std::string& fn, const std::string& v) const;
    std::string toJson() const;
};

struct SequenceTemplate {
    std::vector<std::string> calls;     // calls[0] is the constructor
    std::set<size_t> duplicatedAt;      // indices introduced by RAW duplication
};

DependencyGraph graphFromFacts(const std::vector<AccessFact>& facts);
DependencyGraph buildGraph(const ContractPackage& pkg);

/* Writer-before-reader ordering. `abiOrder` lists every callable function in
 * declaration order (used both to enumerate candidates and as the tie-break);
 * `ctorName` is pinned to index 0. Functions touching no state carry no
 * ordering constraints and are appended after the ordered calls. Mutual
 * dependencies are ordered by declaration order. */
SequenceTemplate orderSequence(const DependencyGraph& g, const std::vector<std::string>& abiOrder,
                               const std::string& ctorName);
SequenceTemplate orderSequence(const DependencyGraph& g, const ContractPackage& pkg);

/* Duplicates each function that has a read-after-write self dependency on a
 * variable some branch condition observes: one extra call, placed immediately
 * before the earliest later reader of that variable (appended when no later
 * reader exists). No function exceeds maxDup copies. */
SequenceTemplate mutateSequence(const SequenceTemplate& t, const DependencyGraph& g,
                                size_t maxDup = 3);

}  // namespace statefuzz
