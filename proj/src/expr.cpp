#include "tcs/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "tcs/errors.hpp"

namespace tcs {

namespace {

struct Token {
    enum Kind { Number, Name, Symbol, End } kind;
    std::string text;
    double value = 0.0;
};

class Lexer {
public:
    Lexer(const std::string& s, int line) : s_(s), line_(line) {}

    Token next() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ >= s_.size()) return {Token::End, "", 0.0};
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) throw ParseError(line_, "bad number in '" + s_ + "'");
            const std::size_t n = static_cast<std::size_t>(end - begin);
            Token t{Token::Number, s_.substr(pos_, n), v};
            pos_ += n;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
            Token t{Token::Name, s_.substr(pos_, end - pos_), 0.0};
            pos_ = end;
            return t;
        }
        if (std::string("+-*/^(),").find(c) != std::string::npos) {
            ++pos_;
            if (c == '*' && pos_ < s_.size() && s_[pos_] == '*') {
                ++pos_;
                return {Token::Symbol, "^", 0.0};
            }
            return {Token::Symbol, std::string(1, c), 0.0};
        }
        throw ParseError(line_, "unexpected character '" + std::string(1, c) + "' in '" + s_ + "'");
    }

private:
    const std::string& s_;
    int line_;
    std::size_t pos_ = 0;
};

} // namespace

// Recursive descent straight into postfix code.
struct ExprParser {
    using Op = Expr::Op;
    using Instr = Expr::Instr;

    Lexer lex;
    Token tok;
    const std::vector<std::string>& vars;
    const std::map<std::string, double>& consts;
    const std::string& text;
    int line;
    std::vector<Instr> code;

    ExprParser(const std::string& t, const std::vector<std::string>& v, const std::map<std::string, double>& c, int l)
        : lex(t, l), vars(v), consts(c), text(t), line(l) {
        tok = lex.next();
    }

    [[noreturn]] void fail(const std::string& what) { throw ParseError(line, what + " in '" + text + "'"); }

    bool symbol(const char* s) const { return tok.kind == Token::Symbol && tok.text == s; }

    void expression() {
        term();
        while (symbol("+") || symbol("-")) {
            const Op op = tok.text == "+" ? Op::Add : Op::Sub;
            tok = lex.next();
            term();
            code.push_back({op});
        }
    }

    void term() {
        unary();
        while (symbol("*") || symbol("/")) {
            const Op op = tok.text == "*" ? Op::Mul : Op::Div;
            tok = lex.next();
            unary();
            code.push_back({op});
        }
    }

    void unary() {
        if (symbol("-")) {
            tok = lex.next();
            unary();
            code.push_back({Op::Neg});
        } else if (symbol("+")) {
            tok = lex.next();
            unary();
        } else {
            power();
        }
    }

    void power() {
        primary();
        if (symbol("^")) {
            tok = lex.next();
            unary();
            code.push_back({Op::Pow});
        }
    }

    void primary() {
        if (tok.kind == Token::Number) {
            code.push_back({Op::Num, tok.value});
            tok = lex.next();
            return;
        }
        if (symbol("(")) {
            tok = lex.next();
            expression();
            if (!symbol(")")) fail("missing ')'");
            tok = lex.next();
            return;
        }
        if (tok.kind == Token::Name) {
            const std::string name = tok.text;
            tok = lex.next();
            if (symbol("(")) {
                static const std::map<std::string, Op> functions{{"sin", Op::Sin},   {"cos", Op::Cos}, {"tan", Op::Tan},
                                                                 {"exp", Op::Exp},   {"log", Op::Log}, {"sqrt", Op::Sqrt},
                                                                 {"abs", Op::Abs}};
                auto f = functions.find(name);
                if (f == functions.end()) fail("unknown function '" + name + "'");
                tok = lex.next();
                expression();
                if (!symbol(")")) fail("missing ')' after argument of " + name);
                tok = lex.next();
                code.push_back({f->second});
                return;
            }
            auto v = std::find(vars.begin(), vars.end(), name);
            if (v != vars.end()) {
                code.push_back({Op::Var, 0.0, static_cast<int>(v - vars.begin())});
                return;
            }
            if (auto c = consts.find(name); c != consts.end()) {
                code.push_back({Op::Num, c->second});
                return;
            }
            if (name == "pi") {
                code.push_back({Op::Num, 3.14159265358979323846});
                return;
            }
            if (name == "e") {
                code.push_back({Op::Num, 2.71828182845904523536});
                return;
            }
            fail("unknown name '" + name + "'");
        }
        if (tok.kind == Token::End) fail("unexpected end of expression");
        fail("unexpected token '" + tok.text + "'");
    }
};

Expr Expr::compile(const std::string& text, const std::vector<std::string>& variables,
                   const std::map<std::string, double>& constants, int line) {
    ExprParser p(text, variables, constants, line);
    p.expression();
    if (p.tok.kind != Token::End) p.fail("unexpected token '" + p.tok.text + "'");
    Expr e;
    e.code_ = std::move(p.code);
    e.text_ = text;
    int depth = 0;
    for (const auto& in : e.code_) {
        switch (in.op) {
        case Op::Num:
        case Op::Var: ++depth; break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow: --depth; break;
        default: break;
        }
        e.depth_ = std::max(e.depth_, depth);
    }
    return e;
}

bool Expr::constant() const {
    return std::none_of(code_.begin(), code_.end(), [](const Instr& i) { return i.op == Op::Var; });
}

double Expr::operator()(const double* vars) const {
    constexpr int kInline = 32;
    double inline_stack[kInline] = {};
    std::vector<double> heap;
    double* st = inline_stack;
    if (depth_ > kInline) {
        heap.resize(static_cast<std::size_t>(depth_));
        st = heap.data();
    }
    int sp = 0;
    for (const auto& in : code_) {
        switch (in.op) {
        case Op::Num: st[sp++] = in.value; break;
        case Op::Var: st[sp++] = vars[in.index]; break;
        case Op::Add: --sp; st[sp - 1] += st[sp]; break;
        case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
        case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
        case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
        case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
        case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
        case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
        case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
        case Op::Tan: st[sp - 1] = std::tan(st[sp - 1]); break;
        case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
        case Op::Log: st[sp - 1] = std::log(st[sp - 1]); break;
        case Op::Sqrt: st[sp - 1] = std::sqrt(st[sp - 1]); break;
        case Op::Abs: st[sp - 1] = std::abs(st[sp - 1]); break;
        }
    }
    return st[0];
}

} // namespace tcs
