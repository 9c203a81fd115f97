#pragma once

#include "statefuzz/Word.h"

#include <memory>
#include <string>
#include <vector>

namespace statefuzz {

struct SourcePos {
    uint32_t line = 0;
    uint32_t col = 0;
};

struct Diagnostic {
    SourcePos pos;
    std::string message;
    std::string render() const;
};

enum class VarType { Uint256, Address, Bool, MappingAddrToUint };

const char* varTypeName(VarType t);

/* ---- expressions ---- */

enum class ExprKind {
    Number,       // literal (unit suffix already applied)
    BoolLit,
    StateVar,     // scalar state variable
    MappingRead,  // m[key]
    Param,        // function parameter
    MsgSender,
    MsgValue,
    MsgOrigin,
    BlockTimestamp,
    BlockNumber,
    BalanceThis,
    Binary,       // + - * < > == && ||
    Not,          // !e
    SendCall,     // send(target, value) or call(target, value) used as a bool expression
};

enum class BinOp { Add, Sub, Mul, Lt, Gt, Eq, And, Or };

struct Expr {
    ExprKind kind;
    SourcePos pos;

    Word number = 0;
    bool boolVal = false;
    std::string name;                 // StateVar / MappingRead / Param
    BinOp binOp = BinOp::Add;
    std::unique_ptr<Expr> lhs, rhs;   // Binary; MappingRead key in lhs; Not operand in lhs
    std::unique_ptr<Expr> target, value;  // SendCall
    bool forwardsGas = false;             // SendCall: call(...) forwards gas, send(...) does not
};

using ExprPtr = std::unique_ptr<Expr>;

/* ---- statements ---- */

enum class StmtKind {
    Assign,        // lhs = expr;  lhs is a state var or mapping cell
    If,
    Require,
    SendStmt,      // send/call in statement position, result dropped
    Delegate,      // dcall(target);
    SelfDestruct,  // selfdestruct(target);
    Revert,
};

struct Stmt {
    StmtKind kind;
    SourcePos pos;

    std::string lhsName;   // Assign
    ExprPtr lhsKey;        // Assign into mapping
    ExprPtr expr;          // Assign rhs / If & Require condition / targets
    ExprPtr value;         // SendStmt value
    bool forwardsGas = false;  // SendStmt
    std::vector<std::unique_ptr<Stmt>> thenBody, elseBody;  // If
};

using StmtPtr = std::unique_ptr<Stmt>;

/* ---- declarations ---- */

struct ParamDecl {
    std::string name;
    VarType type = VarType::Uint256;
    SourcePos pos;
};

struct StateVarAst {
    std::string name;
    VarType type = VarType::Uint256;
    SourcePos pos;
};

struct FunctionAst {
    std::string name;
    bool payable = false;
    std::vector<ParamDecl> params;
    std::vector<StmtPtr> body;
    SourcePos pos;
};

struct ContractAst {
    std::string name;
    std::vector<StateVarAst> stateVars;
    std::vector<FunctionAst> functions;  // declaration order
};

struct ParseResult {
    std::unique_ptr<ContractAst> contract;  // null when errors are present
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return contract != nullptr && diagnostics.empty(); }
};

ParseResult parseContract(const std::string& source);

}  // namespace statefuzz
