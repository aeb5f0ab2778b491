#pragma once

#include <map>
#include <string>
#include <vector>

namespace tcs {

/// Arithmetic expression compiled to postfix code. Grammar: numbers,
/// variables, + - * / ^ (right associative), unary minus, parentheses and the
/// functions sin cos tan exp log sqrt abs.
class Expr {
public:
    Expr() = default;

    /// Variables are bound by position; `constants` are folded in at compile
    /// time. Throws ParseError(line, ...) naming the offending token.
    static Expr compile(const std::string& text, const std::vector<std::string>& variables,
                        const std::map<std::string, double>& constants = {}, int line = 0);

    double operator()(const double* vars) const;
    double operator()(const std::vector<double>& vars) const { return (*this)(vars.data()); }

    const std::string& text() const { return text_; }
    bool constant() const;

private:
    friend struct ExprParser;
    enum class Op : unsigned char { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Abs };
    struct Instr {
        Op op;
        double value = 0.0;
        int index = 0;
    };
    std::vector<Instr> code_;
    std::string text_;
    int depth_ = 0;
};

} // namespace tcs
