#include "statefuzz/Package.h"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>

using namespace std;
using nlohmann::json;

namespace statefuzz {

const char* varTypeTagName(VarTypeTag t) {
    switch (t) {
        case VarTypeTag::Uint256: return "uint256";
        case VarTypeTag::Address: return "address";
        case VarTypeTag::Bool: return "bool";
        case VarTypeTag::MappingAddrToUint: return "mapping(address=>uint256)";
    }
    return "?";
}

optional<VarTypeTag> varTypeTagFromName(const string& s) {
    if (s == "uint256") return VarTypeTag::Uint256;
    if (s == "address") return VarTypeTag::Address;
    if (s == "bool") return VarTypeTag::Bool;
    if (s == "mapping(address=>uint256)") return VarTypeTag::MappingAddrToUint;
    return nullopt;
}

const char* factKindName(FactKind k) {
    switch (k) {
        case FactKind::Write: return "write";
        case FactKind::Read: return "read";
        case FactKind::ReadInBranchCondition: return "branch-read";
        case FactKind::RawSelfDependency: return "raw-self";
    }
    return "?";
}

static FactKind factKindFromName(const string& s) {
    if (s == "write") return FactKind::Write;
    if (s == "read") return FactKind::Read;
    if (s == "branch-read") return FactKind::ReadInBranchCondition;
    if (s == "raw-self") return FactKind::RawSelfDependency;
    throw runtime_error("unknown fact kind: " + s);
}

const FunctionAbi* ContractPackage::findFunction(const string& fn) const {
    for (const auto& f : functions)
        if (f.name == fn) return &f;
    return nullptr;
}

const FunctionAbi& ContractPackage::constructor() const {
    for (const auto& f : functions)
        if (f.isConstructor) return f;
    throw runtime_error("package has no constructor");
}

const FunctionAbi& ContractPackage::functionAt(uint32_t pc) const {
    const FunctionAbi* best = nullptr;
    for (const auto& f : functions)
        if (f.entryOffset <= pc && (!best || f.entryOffset > best->entryOffset)) best = &f;
    if (!best) throw runtime_error("pc outside every function");
    return *best;
}

bool ContractPackage::hasFact(const string& fn, const string& var, FactKind kind) const {
    AccessFact probe{fn, var, kind};
    return binary_search(accessFacts.begin(), accessFacts.end(), probe);
}

uint64_t ContractPackage::hash() const {
    uint64_t h = fnv1a64(bytecode.data(), bytecode.size());
    h = fnv1a64(name, h);
    for (const auto& f : functions) {
        h = fnv1a64(f.name, h);
        h = fnv1a64(to_string(f.entryOffset), h);
        for (const auto& [pn, pt] : f.params) h = fnv1a64(pn + ":" + varTypeTagName(pt), h);
    }
    for (const auto& v : stateVars) h = fnv1a64(v.name + "@" + to_string(v.slot), h);
    return h;
}

string ContractPackage::toJson() const {
    json j;
    j["schema"] = "statefuzz-package-v1";
    j["name"] = name;
    j["bytecode"] = toHex(bytecode);
    json fns = json::array();
    for (const auto& f : functions) {
        json jf;
        jf["name"] = f.name;
        jf["payable"] = f.payable;
        jf["entryOffset"] = f.entryOffset;
        jf["isConstructor"] = f.isConstructor;
        json ps = json::array();
        for (const auto& [pn, pt] : f.params) ps.push_back({{"name", pn}, {"type", varTypeTagName(pt)}});
        jf["params"] = ps;
        fns.push_back(jf);
    }
    j["functions"] = fns;
    json vars = json::array();
    for (const auto& v : stateVars)
        vars.push_back({{"name", v.name}, {"type", varTypeTagName(v.type)}, {"slot", v.slot}});
    j["stateVars"] = vars;
    json facts = json::array();
    for (const auto& f : accessFacts)
        facts.push_back({{"function", f.function}, {"stateVar", f.stateVar}, {"kind", factKindName(f.kind)}});
    j["accessFacts"] = facts;
    j["hash"] = hash();
    return j.dump(2) + "\n";
}

ContractPackage ContractPackage::fromJson(const string& text) {
    json j = json::parse(text);
    if (j.value("schema", "") != "statefuzz-package-v1")
        throw runtime_error("not a statefuzz package");
    ContractPackage pkg;
    pkg.name = j.at("name").get<string>();
    pkg.bytecode = fromHex(j.at("bytecode").get<string>());
    for (const auto& jf : j.at("functions")) {
        FunctionAbi f;
        f.name = jf.at("name").get<string>();
        f.payable = jf.at("payable").get<bool>();
        f.entryOffset = jf.at("entryOffset").get<uint32_t>();
        f.isConstructor = jf.at("isConstructor").get<bool>();
        for (const auto& jp : jf.at("params")) {
            auto t = varTypeTagFromName(jp.at("type").get<string>());
            if (!t) throw runtime_error("bad param type");
            f.params.emplace_back(jp.at("name").get<string>(), *t);
        }
        pkg.functions.push_back(move(f));
    }
    for (const auto& jv : j.at("stateVars")) {
        StateVarInfo v;
        v.name = jv.at("name").get<string>();
        auto t = varTypeTagFromName(jv.at("type").get<string>());
        if (!t) throw runtime_error("bad state var type");
        v.type = *t;
        v.slot = jv.at("slot").get<uint32_t>();
        pkg.stateVars.push_back(move(v));
    }
    for (const auto& jf : j.at("accessFacts")) {
        pkg.accessFacts.push_back({jf.at("function").get<string>(), jf.at("stateVar").get<string>(),
                                   factKindFromName(jf.at("kind").get<string>())});
    }
    sort(pkg.accessFacts.begin(), pkg.accessFacts.end());
    pkg.rebuildCfg();
    if (j.contains("hash") && j.at("hash").get<uint64_t>() != pkg.hash())
        throw runtime_error("package hash mismatch");
    return pkg;
}

void ContractPackage::rebuildCfg() {
    vector<uint32_t> entries;
    for (const auto& f : functions) entries.push_back(f.entryOffset);
    cfg = Cfg(bytecode, entries);
}

}  // namespace statefuzz
