#include "statefuzz/Ast.h"

#include <cctype>
#include <map>

using namespace std;

namespace statefuzz {

string Diagnostic::render() const {
    return to_string(pos.line) + ":" + to_string(pos.col) + ": " + message;
}

const char* varTypeName(VarType t) {
    switch (t) {
        case VarType::Uint256: return "uint256";
        case VarType::Address: return "address";
        case VarType::Bool: return "bool";
        case VarType::MappingAddrToUint: return "mapping(address=>uint256)";
    }
    return "?";
}

namespace {

enum class Tok {
    End, Ident, Number,
    LBrace, RBrace, LParen, RParen, LBracket, RBracket,
    Semi, Comma, Colon, Dot, Arrow,
    Assign, EqEq, AndAnd, OrOr, Bang, Lt, Gt, Plus, Minus, Star,
};

struct Token {
    Tok kind = Tok::End;
    string text;
    Word number = 0;
    SourcePos pos;
};

class Lexer {
public:
    Lexer(const string& src) : src_(src) {}

    Token next() {
        skipWs();
        Token t;
        t.pos = {line_, uint32_t(pos_ - lineStart_ + 1)};
        if (pos_ >= src_.size()) { t.kind = Tok::End; return t; }
        char c = src_[pos_];
        if (isalpha(uint8_t(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() && (isalnum(uint8_t(src_[pos_])) || src_[pos_] == '_')) ++pos_;
            t.kind = Tok::Ident;
            t.text = src_.substr(start, pos_ - start);
            return t;
        }
        if (isdigit(uint8_t(c))) {
            size_t start = pos_;
            while (pos_ < src_.size() && isdigit(uint8_t(src_[pos_]))) ++pos_;
            t.kind = Tok::Number;
            t.text = src_.substr(start, pos_ - start);
            t.number = Word(t.text);
            return t;
        }
        ++pos_;
        auto two = [&](char n) { return pos_ < src_.size() && src_[pos_] == n; };
        switch (c) {
            case '{': t.kind = Tok::LBrace; return t;
            case '}': t.kind = Tok::RBrace; return t;
            case '(': t.kind = Tok::LParen; return t;
            case ')': t.kind = Tok::RParen; return t;
            case '[': t.kind = Tok::LBracket; return t;
            case ']': t.kind = Tok::RBracket; return t;
            case ';': t.kind = Tok::Semi; return t;
            case ',': t.kind = Tok::Comma; return t;
            case ':': t.kind = Tok::Colon; return t;
            case '.': t.kind = Tok::Dot; return t;
            case '+': t.kind = Tok::Plus; return t;
            case '-': t.kind = Tok::Minus; return t;
            case '*': t.kind = Tok::Star; return t;
            case '<': t.kind = Tok::Lt; return t;
            case '>': t.kind = Tok::Gt; return t;
            case '!': t.kind = Tok::Bang; return t;
            case '=':
                if (two('=')) { ++pos_; t.kind = Tok::EqEq; return t; }
                if (two('>')) { ++pos_; t.kind = Tok::Arrow; return t; }
                t.kind = Tok::Assign; return t;
            case '&':
                if (two('&')) { ++pos_; t.kind = Tok::AndAnd; return t; }
                break;
            case '|':
                if (two('|')) { ++pos_; t.kind = Tok::OrOr; return t; }
                break;
        }
        t.kind = Tok::End;
        t.text = string(1, c);
        t.number = Word(0xffff);  // marker: bad char
        return t;
    }

private:
    void skipWs() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') { ++line_; ++pos_; lineStart_ = pos_; }
            else if (isspace(uint8_t(c))) ++pos_;
            else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
                pos_ += 2;
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) {
                    if (src_[pos_] == '\n') { ++line_; lineStart_ = pos_ + 1; }
                    ++pos_;
                }
                pos_ = min(pos_ + 2, src_.size());
            } else break;
        }
    }

    const string& src_;
    size_t pos_ = 0;
    size_t lineStart_ = 0;
    uint32_t line_ = 1;
};

class Parser {
public:
    Parser(const string& src) : lex_(src) { advance(); }

    ParseResult run() {
        ParseResult res;
        auto c = parseContractDecl();
        res.diagnostics = move(diags_);
        if (c && res.diagnostics.empty()) res.contract = move(c);
        return res;
    }

private:
    Lexer lex_;
    Token cur_;
    vector<Diagnostic> diags_;
    bool dead_ = false;  // stop piling errors after the first

    void advance() { cur_ = lex_.next(); }

    bool isIdent(const char* kw) const { return cur_.kind == Tok::Ident && cur_.text == kw; }

    void error(const string& msg) {
        if (dead_) return;
        diags_.push_back({cur_.pos, msg});
        dead_ = true;
    }

    bool expect(Tok k, const char* what) {
        if (dead_) return false;
        if (cur_.kind != k) { error(string("expected ") + what); return false; }
        advance();
        return true;
    }

    string expectIdent(const char* what) {
        if (dead_) return "";
        if (cur_.kind != Tok::Ident) { error(string("expected ") + what); return ""; }
        string s = cur_.text;
        advance();
        return s;
    }

    unique_ptr<ContractAst> parseContractDecl() {
        if (!isIdent("contract")) { error("expected 'contract'"); return nullptr; }
        advance();
        auto ast = make_unique<ContractAst>();
        ast->name = expectIdent("contract name");
        expect(Tok::LBrace, "'{'");
        while (!dead_ && cur_.kind != Tok::RBrace && cur_.kind != Tok::End) {
            if (isIdent("fn") || isIdent("payable")) {
                auto fn = parseFunction();
                if (!dead_) ast->functions.push_back(move(fn));
            } else {
                auto sv = parseStateVar();
                if (!dead_) ast->stateVars.push_back(move(sv));
            }
        }
        expect(Tok::RBrace, "'}'");
        return ast;
    }

    VarType parseType(bool allowMapping) {
        if (isIdent("uint256")) { advance(); return VarType::Uint256; }
        if (isIdent("address")) { advance(); return VarType::Address; }
        if (isIdent("bool")) { advance(); return VarType::Bool; }
        if (allowMapping && isIdent("mapping")) {
            advance();
            expect(Tok::LParen, "'('");
            if (!isIdent("address")) error("mapping key must be address");
            else advance();
            expect(Tok::Arrow, "'=>'");
            if (!isIdent("uint256")) error("mapping value must be uint256");
            else advance();
            expect(Tok::RParen, "')'");
            return VarType::MappingAddrToUint;
        }
        error("expected type");
        return VarType::Uint256;
    }

    StateVarAst parseStateVar() {
        StateVarAst sv;
        sv.pos = cur_.pos;
        sv.type = parseType(true);
        sv.name = expectIdent("state variable name");
        expect(Tok::Semi, "';'");
        return sv;
    }

    FunctionAst parseFunction() {
        FunctionAst fn;
        fn.pos = cur_.pos;
        if (isIdent("payable")) { fn.payable = true; advance(); }
        if (!isIdent("fn")) { error("expected 'fn'"); return fn; }
        advance();
        fn.name = expectIdent("function name");
        expect(Tok::LParen, "'('");
        if (cur_.kind != Tok::RParen) {
            while (!dead_) {
                ParamDecl p;
                p.pos = cur_.pos;
                p.name = expectIdent("parameter name");
                expect(Tok::Colon, "':'");
                p.type = parseType(false);
                fn.params.push_back(move(p));
                if (cur_.kind == Tok::Comma) { advance(); continue; }
                break;
            }
        }
        expect(Tok::RParen, "')'");
        fn.body = parseBlock();
        return fn;
    }

    vector<StmtPtr> parseBlock() {
        vector<StmtPtr> body;
        expect(Tok::LBrace, "'{'");
        while (!dead_ && cur_.kind != Tok::RBrace && cur_.kind != Tok::End)
            body.push_back(parseStmt());
        expect(Tok::RBrace, "'}'");
        return body;
    }

    StmtPtr parseStmt() {
        auto st = make_unique<Stmt>();
        st->pos = cur_.pos;
        if (isIdent("if")) {
            advance();
            st->kind = StmtKind::If;
            expect(Tok::LParen, "'('");
            st->expr = parseExpr();
            expect(Tok::RParen, "')'");
            st->thenBody = parseBlock();
            if (isIdent("else")) { advance(); st->elseBody = parseBlock(); }
            return st;
        }
        if (isIdent("require")) {
            advance();
            st->kind = StmtKind::Require;
            expect(Tok::LParen, "'('");
            st->expr = parseExpr();
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return st;
        }
        if (isIdent("send") || isIdent("call")) {
            st->kind = StmtKind::SendStmt;
            st->forwardsGas = cur_.text == "call";
            advance();
            expect(Tok::LParen, "'('");
            st->expr = parseExpr();
            expect(Tok::Comma, "','");
            st->value = parseExpr();
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return st;
        }
        if (isIdent("dcall")) {
            advance();
            st->kind = StmtKind::Delegate;
            expect(Tok::LParen, "'('");
            st->expr = parseExpr();
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return st;
        }
        if (isIdent("selfdestruct")) {
            advance();
            st->kind = StmtKind::SelfDestruct;
            expect(Tok::LParen, "'('");
            st->expr = parseExpr();
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return st;
        }
        if (isIdent("revert")) {
            advance();
            st->kind = StmtKind::Revert;
            expect(Tok::Semi, "';'");
            return st;
        }
        /* assignment: name = e;  or  name[k] = e; */
        st->kind = StmtKind::Assign;
        st->lhsName = expectIdent("statement");
        if (cur_.kind == Tok::LBracket) {
            advance();
            st->lhsKey = parseExpr();
            expect(Tok::RBracket, "']'");
        }
        expect(Tok::Assign, "'='");
        st->expr = parseExpr();
        expect(Tok::Semi, "';'");
        return st;
    }

    ExprPtr mkExpr(ExprKind k) {
        auto e = make_unique<Expr>();
        e->kind = k;
        e->pos = cur_.pos;
        return e;
    }

    ExprPtr parseExpr() { return parseOr(); }

    ExprPtr parseOr() {
        auto lhs = parseAnd();
        while (!dead_ && cur_.kind == Tok::OrOr) {
            advance();
            auto e = mkExpr(ExprKind::Binary);
            e->binOp = BinOp::Or;
            e->lhs = move(lhs);
            e->rhs = parseAnd();
            lhs = move(e);
        }
        return lhs;
    }

    ExprPtr parseAnd() {
        auto lhs = parseEquality();
        while (!dead_ && cur_.kind == Tok::AndAnd) {
            advance();
            auto e = mkExpr(ExprKind::Binary);
            e->binOp = BinOp::And;
            e->lhs = move(lhs);
            e->rhs = parseEquality();
            lhs = move(e);
        }
        return lhs;
    }

    ExprPtr parseEquality() {
        auto lhs = parseRelational();
        while (!dead_ && cur_.kind == Tok::EqEq) {
            advance();
            auto e = mkExpr(ExprKind::Binary);
            e->binOp = BinOp::Eq;
            e->lhs = move(lhs);
            e->rhs = parseRelational();
            lhs = move(e);
        }
        return lhs;
    }

    ExprPtr parseRelational() {
        auto lhs = parseAdditive();
        while (!dead_ && (cur_.kind == Tok::Lt || cur_.kind == Tok::Gt)) {
            BinOp op = cur_.kind == Tok::Lt ? BinOp::Lt : BinOp::Gt;
            advance();
            auto e = mkExpr(ExprKind::Binary);
            e->binOp = op;
            e->lhs = move(lhs);
            e->rhs = parseAdditive();
            lhs = move(e);
        }
        return lhs;
    }

    ExprPtr parseAdditive() {
        auto lhs = parseMultiplicative();
        while (!dead_ && (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus)) {
            BinOp op = cur_.kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
            advance();
            auto e = mkExpr(ExprKind::Binary);
            e->binOp = op;
            e->lhs = move(lhs);
            e->rhs = parseMultiplicative();
            lhs = move(e);
        }
        return lhs;
    }

    ExprPtr parseMultiplicative() {
        auto lhs = parseUnary();
        while (!dead_ && cur_.kind == Tok::Star) {
            advance();
            auto e = mkExpr(ExprKind::Binary);
            e->binOp = BinOp::Mul;
            e->lhs = move(lhs);
            e->rhs = parseUnary();
            lhs = move(e);
        }
        return lhs;
    }

    ExprPtr parseUnary() {
        if (cur_.kind == Tok::Bang) {
            auto e = mkExpr(ExprKind::Not);
            advance();
            e->lhs = parseUnary();
            return e;
        }
        return parsePrimary();
    }

    ExprPtr parsePrimary() {
        if (cur_.kind == Tok::Number) {
            auto e = mkExpr(ExprKind::Number);
            e->number = cur_.number;
            advance();
            /* optional denomination suffix */
            if (isIdent("wei")) advance();
            else if (isIdent("finney")) { e->number *= Word("1000000000000000"); advance(); }
            else if (isIdent("ether")) { e->number *= Word("1000000000000000000"); advance(); }
            return e;
        }
        if (cur_.kind == Tok::LParen) {
            advance();
            auto e = parseExpr();
            expect(Tok::RParen, "')'");
            return e;
        }
        if (isIdent("true") || isIdent("false")) {
            auto e = mkExpr(ExprKind::BoolLit);
            e->boolVal = cur_.text == "true";
            advance();
            return e;
        }
        if (isIdent("msg")) {
            advance();
            expect(Tok::Dot, "'.'");
            string field = expectIdent("msg field");
            ExprKind k;
            if (field == "sender") k = ExprKind::MsgSender;
            else if (field == "value") k = ExprKind::MsgValue;
            else if (field == "origin") k = ExprKind::MsgOrigin;
            else { error("unknown msg field '" + field + "'"); k = ExprKind::MsgSender; }
            return mkExpr(k);
        }
        if (isIdent("block")) {
            advance();
            expect(Tok::Dot, "'.'");
            string field = expectIdent("block field");
            ExprKind k;
            if (field == "timestamp") k = ExprKind::BlockTimestamp;
            else if (field == "number") k = ExprKind::BlockNumber;
            else { error("unknown block field '" + field + "'"); k = ExprKind::BlockTimestamp; }
            return mkExpr(k);
        }
        if (isIdent("balance")) {
            advance();
            expect(Tok::LParen, "'('");
            if (!isIdent("this")) error("expected 'this'");
            else advance();
            expect(Tok::RParen, "')'");
            return mkExpr(ExprKind::BalanceThis);
        }
        if (isIdent("send") || isIdent("call")) {
            auto e = mkExpr(ExprKind::SendCall);
            e->forwardsGas = cur_.text == "call";
            advance();
            expect(Tok::LParen, "'('");
            e->target = parseExpr();
            expect(Tok::Comma, "','");
            e->value = parseExpr();
            expect(Tok::RParen, "')'");
            return e;
        }
        if (cur_.kind == Tok::Ident) {
            auto e = mkExpr(ExprKind::StateVar);  // resolved to Param/StateVar later
            e->name = cur_.text;
            advance();
            if (cur_.kind == Tok::LBracket) {
                advance();
                e->kind = ExprKind::MappingRead;
                e->lhs = parseExpr();
                expect(Tok::RBracket, "']'");
            }
            return e;
        }
        error("expected expression");
        return mkExpr(ExprKind::Number);
    }
};

}  // namespace

ParseResult parseContract(const string& source) { return Parser(source).run(); }

}  // namespace statefuzz
