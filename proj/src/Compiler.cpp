#include "statefuzz/Compiler.h"

#include <algorithm>
#include <map>
#include <set>

using namespace std;

namespace statefuzz {

namespace {

enum class Ty { Uint, Addr, Bool };

const char* tyName(Ty t) {
    switch (t) {
        case Ty::Uint: return "uint256";
        case Ty::Addr: return "address";
        case Ty::Bool: return "bool";
    }
    return "?";
}

VarTypeTag toTag(VarType t) {
    switch (t) {
        case VarType::Uint256: return VarTypeTag::Uint256;
        case VarType::Address: return VarTypeTag::Address;
        case VarType::Bool: return VarTypeTag::Bool;
        case VarType::MappingAddrToUint: return VarTypeTag::MappingAddrToUint;
    }
    return VarTypeTag::Uint256;
}

Ty scalarTy(VarType t) {
    switch (t) {
        case VarType::Address: return Ty::Addr;
        case VarType::Bool: return Ty::Bool;
        default: return Ty::Uint;
    }
}

class Compiler {
public:
    explicit Compiler(const ContractAst& ast) : ast_(ast) {}

    CompileResult run() {
        CompileResult res;
        analyze();
        if (diags_.empty()) {
            generate();
            collectFacts();
        }
        res.diagnostics = move(diags_);
        if (res.diagnostics.empty()) {
            pkg_.name = ast_.name;
            pkg_.bytecode = asm_.code();
            sort(facts_.begin(), facts_.end());
            facts_.erase(unique(facts_.begin(), facts_.end()), facts_.end());
            pkg_.accessFacts = move(facts_);
            pkg_.rebuildCfg();
            res.package = move(pkg_);
        }
        return res;
    }

private:
    const ContractAst& ast_;
    ContractPackage pkg_;
    Assembler asm_;
    vector<Diagnostic> diags_;
    vector<AccessFact> facts_;

    map<string, const StateVarAst*> stateVarByName_;
    map<string, uint32_t> slotOf_;
    const FunctionAst* curFn_ = nullptr;
    map<string, uint8_t> curParams_;

    void error(SourcePos pos, const string& msg) { diags_.push_back({pos, msg}); }

    /* ---- semantic analysis ---- */

    void analyze() {
        set<string> seenVars;
        uint32_t slot = 0;
        for (const auto& sv : ast_.stateVars) {
            if (!seenVars.insert(sv.name).second) {
                error(sv.pos, "duplicate state variable '" + sv.name + "'");
                continue;
            }
            stateVarByName_[sv.name] = &sv;
            slotOf_[sv.name] = slot;
            pkg_.stateVars.push_back({sv.name, toTag(sv.type), slot});
            ++slot;
        }
        set<string> seenFns;
        int ctorCount = 0;
        for (const auto& fn : ast_.functions) {
            if (!seenFns.insert(fn.name).second)
                error(fn.pos, "duplicate function '" + fn.name + "'");
            if (fn.name == "constructor") ++ctorCount;
            set<string> seenParams;
            for (const auto& p : fn.params) {
                if (!seenParams.insert(p.name).second)
                    error(p.pos, "duplicate parameter '" + p.name + "'");
                if (stateVarByName_.count(p.name))
                    error(p.pos, "parameter '" + p.name + "' shadows a state variable");
            }
            if (fn.params.size() > 255) error(fn.pos, "too many parameters");
        }
        if (ctorCount > 1) error({0, 0}, "multiple constructors");
        for (const auto& fn : ast_.functions) checkFunction(fn);
    }

    void checkFunction(const FunctionAst& fn) {
        curFn_ = &fn;
        curParams_.clear();
        for (size_t i = 0; i < fn.params.size(); ++i) curParams_[fn.params[i].name] = uint8_t(i);
        for (const auto& st : fn.body) checkStmt(*st);
        curFn_ = nullptr;
    }

    optional<Ty> paramTy(const string& name) const {
        if (!curFn_) return nullopt;
        for (const auto& p : curFn_->params)
            if (p.name == name) return scalarTy(p.type);
        return nullopt;
    }

    void checkStmt(const Stmt& st) {
        switch (st.kind) {
            case StmtKind::Assign: {
                auto it = stateVarByName_.find(st.lhsName);
                if (it == stateVarByName_.end()) {
                    error(st.pos, "assignment to unknown state variable '" + st.lhsName + "'");
                    return;
                }
                const auto* sv = it->second;
                if (sv->type == VarType::MappingAddrToUint) {
                    if (!st.lhsKey) { error(st.pos, "mapping '" + st.lhsName + "' needs an index"); return; }
                    expectTy(*st.lhsKey, Ty::Addr);
                    expectTy(*st.expr, Ty::Uint);
                } else {
                    if (st.lhsKey) { error(st.pos, "'" + st.lhsName + "' is not a mapping"); return; }
                    expectTy(*st.expr, scalarTy(sv->type));
                }
                break;
            }
            case StmtKind::If:
            case StmtKind::Require:
                expectTy(*st.expr, Ty::Bool);
                for (const auto& s : st.thenBody) checkStmt(*s);
                for (const auto& s : st.elseBody) checkStmt(*s);
                break;
            case StmtKind::SendStmt:
                expectTy(*st.expr, Ty::Addr);
                expectTy(*st.value, Ty::Uint);
                break;
            case StmtKind::Delegate:
            case StmtKind::SelfDestruct:
                expectTy(*st.expr, Ty::Addr);
                break;
            case StmtKind::Revert:
                break;
        }
    }

    void expectTy(const Expr& e, Ty want) {
        auto got = typeOf(e);
        if (got && *got != want)
            error(e.pos, string("expected ") + tyName(want) + ", got " + tyName(*got));
    }

    optional<Ty> typeOf(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Number: return Ty::Uint;
            case ExprKind::BoolLit: return Ty::Bool;
            case ExprKind::MsgSender:
            case ExprKind::MsgOrigin: return Ty::Addr;
            case ExprKind::MsgValue:
            case ExprKind::BlockTimestamp:
            case ExprKind::BlockNumber:
            case ExprKind::BalanceThis: return Ty::Uint;
            case ExprKind::Param:
            case ExprKind::StateVar: {
                if (auto pt = paramTy(e.name)) return pt;
                auto it = stateVarByName_.find(e.name);
                if (it == stateVarByName_.end()) {
                    error(e.pos, "unknown identifier '" + e.name + "'");
                    return nullopt;
                }
                if (it->second->type == VarType::MappingAddrToUint) {
                    error(e.pos, "mapping '" + e.name + "' needs an index");
                    return nullopt;
                }
                return scalarTy(it->second->type);
            }
            case ExprKind::MappingRead: {
                if (paramTy(e.name)) { error(e.pos, "'" + e.name + "' is not a mapping"); return nullopt; }
                auto it = stateVarByName_.find(e.name);
                if (it == stateVarByName_.end() || it->second->type != VarType::MappingAddrToUint) {
                    error(e.pos, "'" + e.name + "' is not a mapping");
                    return nullopt;
                }
                expectTy(*e.lhs, Ty::Addr);
                return Ty::Uint;
            }
            case ExprKind::Not:
                expectTy(*e.lhs, Ty::Bool);
                return Ty::Bool;
            case ExprKind::SendCall:
                expectTy(*e.target, Ty::Addr);
                expectTy(*e.value, Ty::Uint);
                return Ty::Bool;
            case ExprKind::Binary: {
                switch (e.binOp) {
                    case BinOp::Add:
                    case BinOp::Sub:
                    case BinOp::Mul:
                        expectTy(*e.lhs, Ty::Uint);
                        expectTy(*e.rhs, Ty::Uint);
                        return Ty::Uint;
                    case BinOp::Lt:
                    case BinOp::Gt:
                        expectTy(*e.lhs, Ty::Uint);
                        expectTy(*e.rhs, Ty::Uint);
                        return Ty::Bool;
                    case BinOp::Eq: {
                        auto lt = typeOf(*e.lhs);
                        auto rt = typeOf(*e.rhs);
                        if (lt && rt && *lt != *rt)
                            error(e.pos, string("'==' on mismatched types ") + tyName(*lt) + " and " + tyName(*rt));
                        return Ty::Bool;
                    }
                    case BinOp::And:
                    case BinOp::Or:
                        expectTy(*e.lhs, Ty::Bool);
                        expectTy(*e.rhs, Ty::Bool);
                        return Ty::Bool;
                }
                return nullopt;
            }
        }
        return nullopt;
    }

    /* ---- code generation ---- */

    void generate() {
        bool haveCtor = false;
        for (const auto& fn : ast_.functions) {
            FunctionAbi abi;
            abi.name = fn.name;
            abi.payable = fn.payable;
            abi.isConstructor = fn.name == "constructor";
            haveCtor = haveCtor || abi.isConstructor;
            abi.entryOffset = asm_.here();
            for (const auto& p : fn.params) abi.params.emplace_back(p.name, toTag(p.type));
            pkg_.functions.push_back(move(abi));
            curFn_ = &fn;
            curParams_.clear();
            for (size_t i = 0; i < fn.params.size(); ++i) curParams_[fn.params[i].name] = uint8_t(i);
            for (const auto& st : fn.body) genStmt(*st);
            asm_.emit(Op::STOP);
            curFn_ = nullptr;
        }
        if (!haveCtor) {
            FunctionAbi abi;
            abi.name = "constructor";
            abi.isConstructor = true;
            abi.entryOffset = asm_.here();
            pkg_.functions.push_back(move(abi));
            asm_.emit(Op::STOP);
        }
    }

    void genStmt(const Stmt& st) {
        switch (st.kind) {
            case StmtKind::Assign: {
                uint32_t slot = slotOf_.at(st.lhsName);
                if (st.lhsKey) {
                    genExpr(*st.expr);
                    genExpr(*st.lhsKey);
                    asm_.emitPush(slot);
                    asm_.emit(Op::MAPSTORE);
                } else {
                    genExpr(*st.expr);
                    asm_.emitPush(slot);
                    asm_.emit(Op::SSTORE);
                }
                break;
            }
            case StmtKind::If: {
                genExpr(*st.expr);
                if (st.elseBody.empty()) {
                    /* if (c) { body }  —  skip over the body when !c */
                    asm_.emit(Op::ISZERO);
                    size_t toEnd = asm_.emitPushLabel();
                    asm_.emit(Op::JUMPI);
                    for (const auto& s : st.thenBody) genStmt(*s);
                    asm_.bindLabel(toEnd, asm_.here());
                } else {
                    size_t toThen = asm_.emitPushLabel();
                    asm_.emit(Op::JUMPI);
                    for (const auto& s : st.elseBody) genStmt(*s);
                    size_t toEnd = asm_.emitPushLabel();
                    asm_.emit(Op::JUMP);
                    asm_.bindLabel(toThen, asm_.here());
                    for (const auto& s : st.thenBody) genStmt(*s);
                    asm_.bindLabel(toEnd, asm_.here());
                }
                break;
            }
            case StmtKind::Require: {
                genExpr(*st.expr);
                size_t toOk = asm_.emitPushLabel();
                asm_.emit(Op::JUMPI);
                asm_.emit(Op::REVERT);
                asm_.bindLabel(toOk, asm_.here());
                break;
            }
            case StmtKind::SendStmt:
                genExpr(*st.value);
                genExpr(*st.expr);
                asm_.emitArg(Op::CALL, st.forwardsGas ? 1 : 0);
                asm_.emit(Op::POP);
                break;
            case StmtKind::Delegate:
                genExpr(*st.expr);
                asm_.emit(Op::DELEGATECALL);
                asm_.emit(Op::POP);
                break;
            case StmtKind::SelfDestruct:
                genExpr(*st.expr);
                asm_.emit(Op::SELFDESTRUCT);
                break;
            case StmtKind::Revert:
                asm_.emit(Op::REVERT);
                break;
        }
    }

    void genExpr(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Number: asm_.emitPush(e.number); break;
            case ExprKind::BoolLit: asm_.emitPush(e.boolVal ? 1 : 0); break;
            case ExprKind::MsgSender: asm_.emit(Op::CALLER); break;
            case ExprKind::MsgValue: asm_.emit(Op::CALLVALUE); break;
            case ExprKind::MsgOrigin: asm_.emit(Op::ORIGIN); break;
            case ExprKind::BlockTimestamp: asm_.emit(Op::TIMESTAMP); break;
            case ExprKind::BlockNumber: asm_.emit(Op::NUMBER); break;
            case ExprKind::BalanceThis: asm_.emit(Op::BALANCE); break;
            case ExprKind::Param:
            case ExprKind::StateVar: {
                auto it = curParams_.find(e.name);
                if (it != curParams_.end()) {
                    asm_.emitArg(Op::PARAM, it->second);
                } else {
                    asm_.emitPush(slotOf_.at(e.name));
                    asm_.emit(Op::SLOAD);
                }
                break;
            }
            case ExprKind::MappingRead:
                genExpr(*e.lhs);
                asm_.emitPush(slotOf_.at(e.name));
                asm_.emit(Op::MAPLOAD);
                break;
            case ExprKind::Not:
                genExpr(*e.lhs);
                asm_.emit(Op::ISZERO);
                break;
            case ExprKind::SendCall:
                genExpr(*e.value);
                genExpr(*e.target);
                asm_.emitArg(Op::CALL, e.forwardsGas ? 1 : 0);
                break;
            case ExprKind::Binary:
                switch (e.binOp) {
                    case BinOp::Add:
                    case BinOp::Sub:
                    case BinOp::Mul:
                    case BinOp::Lt:
                    case BinOp::Gt:
                    case BinOp::Eq: {
                        genExpr(*e.lhs);
                        genExpr(*e.rhs);
                        Op op = e.binOp == BinOp::Add ? Op::ADD
                              : e.binOp == BinOp::Sub ? Op::SUB
                              : e.binOp == BinOp::Mul ? Op::MUL
                              : e.binOp == BinOp::Lt  ? Op::LT
                              : e.binOp == BinOp::Gt  ? Op::GT
                                                      : Op::EQ;
                        asm_.emit(op);
                        break;
                    }
                    case BinOp::And: {
                        /* a && b: only evaluate b when a holds. */
                        genExpr(*e.lhs);
                        size_t toRhs = asm_.emitPushLabel();
                        asm_.emit(Op::JUMPI);
                        asm_.emitPush(0);
                        size_t toEnd = asm_.emitPushLabel();
                        asm_.emit(Op::JUMP);
                        asm_.bindLabel(toRhs, asm_.here());
                        genExpr(*e.rhs);
                        asm_.bindLabel(toEnd, asm_.here());
                        break;
                    }
                    case BinOp::Or: {
                        genExpr(*e.lhs);
                        asm_.emit(Op::ISZERO);
                        size_t toRhs = asm_.emitPushLabel();
                        asm_.emit(Op::JUMPI);
                        asm_.emitPush(1);
                        size_t toEnd = asm_.emitPushLabel();
                        asm_.emit(Op::JUMP);
                        asm_.bindLabel(toRhs, asm_.here());
                        genExpr(*e.rhs);
                        asm_.bindLabel(toEnd, asm_.here());
                        break;
                    }
                }
                break;
        }
    }

    /* ---- state-access facts ---- */

    void collectFacts() {
        for (const auto& fn : ast_.functions) {
            curFn_ = &fn;
            curParams_.clear();
            for (size_t i = 0; i < fn.params.size(); ++i) curParams_[fn.params[i].name] = uint8_t(i);
            for (const auto& st : fn.body) factStmt(fn.name, *st);
            curFn_ = nullptr;
        }
        /* A function that both writes and reads the same variable carries a
         * read-after-write self dependency — but only when some branch
         * condition in the contract actually observes that variable. */
        set<pair<string, string>> writes, reads;
        set<string> branchReadVars;
        for (const auto& f : facts_) {
            if (f.kind == FactKind::Write) writes.insert({f.function, f.stateVar});
            if (f.kind == FactKind::Read) reads.insert({f.function, f.stateVar});
            if (f.kind == FactKind::ReadInBranchCondition) branchReadVars.insert(f.stateVar);
        }
        for (const auto& wr : writes)
            if (reads.count(wr) && branchReadVars.count(wr.second))
                facts_.push_back({wr.first, wr.second, FactKind::RawSelfDependency});
    }

    void factStmt(const string& fn, const Stmt& st) {
        switch (st.kind) {
            case StmtKind::Assign:
                facts_.push_back({fn, st.lhsName, FactKind::Write});
                if (st.lhsKey) factExpr(fn, *st.lhsKey, false);
                factExpr(fn, *st.expr, false);
                break;
            case StmtKind::If:
            case StmtKind::Require:
                factExpr(fn, *st.expr, true);
                for (const auto& s : st.thenBody) factStmt(fn, *s);
                for (const auto& s : st.elseBody) factStmt(fn, *s);
                break;
            case StmtKind::SendStmt:
                factExpr(fn, *st.expr, false);
                factExpr(fn, *st.value, false);
                break;
            case StmtKind::Delegate:
            case StmtKind::SelfDestruct:
                factExpr(fn, *st.expr, false);
                break;
            case StmtKind::Revert:
                break;
        }
    }

    void factExpr(const string& fn, const Expr& e, bool inCondition) {
        switch (e.kind) {
            case ExprKind::Param:
            case ExprKind::StateVar: {
                if (curParams_.count(e.name)) return;
                if (!stateVarByName_.count(e.name)) return;
                facts_.push_back({fn, e.name, FactKind::Read});
                if (inCondition) facts_.push_back({fn, e.name, FactKind::ReadInBranchCondition});
                break;
            }
            case ExprKind::MappingRead:
                facts_.push_back({fn, e.name, FactKind::Read});
                if (inCondition) facts_.push_back({fn, e.name, FactKind::ReadInBranchCondition});
                factExpr(fn, *e.lhs, inCondition);
                break;
            case ExprKind::Not:
                factExpr(fn, *e.lhs, inCondition);
                break;
            case ExprKind::Binary:
                factExpr(fn, *e.lhs, inCondition);
                factExpr(fn, *e.rhs, inCondition);
                break;
            case ExprKind::SendCall:
                factExpr(fn, *e.target, inCondition);
                factExpr(fn, *e.value, inCondition);
                break;
            default:
                break;
        }
    }
};

}  // namespace

CompileResult compileAst(const ContractAst& ast) { return Compiler(ast).run(); }

CompileResult compileContract(const string& source) {
    auto parsed = parseContract(source);
    if (!parsed.ok()) {
        CompileResult res;
        res.diagnostics = move(parsed.diagnostics);
        if (res.diagnostics.empty()) res.diagnostics.push_back({{0, 0}, "empty input"});
        return res;
    }
    return compileAst(*parsed.contract);
}

}  // namespace statefuzz
