#pragma once

#include <cctype>
#include <map>
#include <string>

#include "odeq/calculus.hpp"

namespace odeq {

// Declared variable set for parsing: maps accepted spellings to variable ids.
using VarSet = std::map<std::string, int>;

inline VarSet jet_vars() {
    return VarSet{{"x", VAR_X}, {"u", VAR_U}, {"u'", VAR_UX}, {"ux", VAR_UX}};
}

namespace detail_parse {

struct Token {
    enum Type { Number, Ident, Op, End } type;
    std::string text;
    std::size_t pos;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
        tok_.pos = i_;
        if (i_ >= src_.size()) {
            tok_ = Token{Token::End, "", i_};
            return;
        }
        char c = src_[i_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i_;
            while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
            if (j < src_.size() && src_[j] == '.')
                throw ParseError("decimal literals are not part of the grammar; use p/q", j);
            tok_ = Token{Token::Number, src_.substr(i_, j - i_), i_};
            i_ = j;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i_;
            while (j < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                ++j;
            while (j < src_.size() && src_[j] == '\'') ++j;  // primes belong to the name
            tok_ = Token{Token::Ident, src_.substr(i_, j - i_), i_};
            i_ = j;
            return;
        }
        static const std::string ops = "+-*/^()";
        if (ops.find(c) != std::string::npos) {
            tok_ = Token{Token::Op, std::string(1, c), i_};
            ++i_;
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", i_);
    }

    std::string src_;
    std::size_t i_ = 0;
    Token tok_{Token::End, "", 0};
};

class Parser {
public:
    Parser(const std::string& src, const VarSet& vars) : lex_(src), vars_(vars) {}

    ExprPtr run() {
        ExprPtr e = parse_sum();
        if (lex_.peek().type != Token::End)
            throw ParseError("trailing input '" + lex_.peek().text + "'", lex_.peek().pos);
        return e;
    }

private:
    bool is_op(const char* s) const {
        return lex_.peek().type == Token::Op && lex_.peek().text == s;
    }

    ExprPtr parse_sum() {
        ExprPtr e = parse_product();
        while (is_op("+") || is_op("-")) {
            bool plus = lex_.next().text == "+";
            ExprPtr rhs = parse_product();
            e = plus ? add(e, rhs) : sub(e, rhs);
        }
        return e;
    }

    ExprPtr parse_product() {
        ExprPtr e = parse_unary();
        while (is_op("*") || is_op("/")) {
            bool times = lex_.next().text == "*";
            ExprPtr rhs = parse_unary();
            e = times ? mul(e, rhs) : div(e, rhs);
        }
        return e;
    }

    ExprPtr parse_unary() {
        if (is_op("-")) {
            lex_.next();
            return neg(parse_unary());
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_atom();
        if (is_op("^")) {
            std::size_t pos = lex_.peek().pos;
            lex_.next();
            ExprPtr e = parse_exponent();
            if (e->kind != Kind::Num)
                throw ParseError("exponent must be a rational constant", pos);
            return pow(base, e->value);
        }
        return base;
    }

    // exponents allow a leading sign and nested powers: x^-2, x^2^3 is rejected
    ExprPtr parse_exponent() {
        if (is_op("-")) {
            lex_.next();
            return neg(parse_exponent());
        }
        return parse_atom();
    }

    ExprPtr parse_atom() {
        Token t = lex_.next();
        if (t.type == Token::Number) return num(Rat(Int(t.text)));
        if (t.type == Token::Op && t.text == "(") {
            ExprPtr e = parse_sum();
            expect(")");
            return e;
        }
        if (t.type == Token::Ident) {
            if (is_op("(")) {
                Func f;
                if (t.text == "exp") f = Func::Exp;
                else if (t.text == "log") f = Func::Log;
                else if (t.text == "sin") f = Func::Sin;
                else if (t.text == "cos") f = Func::Cos;
                else if (t.text == "abs") f = Func::Abs;
                else if (t.text == "sqrt") {
                    lex_.next();
                    ExprPtr a = parse_sum();
                    expect(")");
                    return sqrt_of(a);
                } else {
                    throw ParseError("unknown function '" + t.text + "'", t.pos);
                }
                lex_.next();
                ExprPtr a = parse_sum();
                expect(")");
                return fun(f, a);
            }
            auto it = vars_.find(t.text);
            if (it == vars_.end()) throw UndeclaredVariableError(t.text, t.pos);
            return var(it->second);
        }
        throw ParseError("expected a number, variable or '('", t.pos);
    }

    void expect(const char* s) {
        if (!is_op(s)) throw ParseError(std::string("expected '") + s + "'", lex_.peek().pos);
        lex_.next();
    }

    Lexer lex_;
    const VarSet& vars_;
};

}  // namespace detail_parse

inline ExprPtr parse(const std::string& text, const VarSet& vars = jet_vars()) {
    detail_parse::Parser p(text, vars);
    return p.run();
}

}  // namespace odeq
