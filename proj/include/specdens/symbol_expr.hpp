#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "invariant.hpp"

namespace specdens {

/// Syntax error with the 0-based character offset where it was detected.
class ParseError : public std::invalid_argument {
public:
    ParseError(std::size_t position, const std::string& what)
        : std::invalid_argument("at column " + std::to_string(position + 1) + ": " + what), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// One term c, c cos(k.xi) or c sin(k.xi) of a trigonometric polynomial.
struct TrigTerm {
    enum class Kind { constant, cosine, sine };
    Kind kind = Kind::constant;
    double coefficient = 0.0;
    std::vector<int> frequency;
};

/// Real trigonometric polynomial on the d-torus.
struct TrigPolynomial {
    int dimension = 1;
    std::vector<TrigTerm> terms;

    double operator()(const double* xi) const {
        double s = 0.0;
        for (const auto& t : terms) {
            if (t.kind == TrigTerm::Kind::constant) {
                s += t.coefficient;
                continue;
            }
            double arg = 0.0;
            for (std::size_t i = 0; i < t.frequency.size(); ++i)
                arg += t.frequency[i] * xi[i];
            s += t.coefficient * (t.kind == TrigTerm::Kind::cosine ? std::cos(arg) : std::sin(arg));
        }
        return s;
    }
};

namespace detail {

// Grammar:
//   expr   := sign? term (('+' | '-') term)*
//   term   := number ('*'? trig)? | trig
//   trig   := ('cos' | 'sin') '(' linear ')'
//   linear := sign? mono (('+' | '-') mono)*
//   mono   := integer '*'? var | var
//   var    := 'x' | 'y' | 'z' | 'x' digits   (x1 is the first axis)
class TrigParser {
public:
    explicit TrigParser(const std::string& text) : s_(text) {}

    TrigPolynomial parse() {
        TrigPolynomial p;
        skip();
        double sign = 1.0;
        if (peek() == '+' || peek() == '-') {
            sign = get() == '-' ? -1.0 : 1.0;
            skip();
        }
        if (at_end())
            fail("empty expression");
        p.terms.push_back(term(sign));
        while (true) {
            skip();
            if (at_end())
                break;
            const char c = peek();
            if (c != '+' && c != '-')
                fail(std::string("expected '+' or '-', found '") + c + "'");
            get();
            skip();
            p.terms.push_back(term(c == '-' ? -1.0 : 1.0));
        }
        p.dimension = std::max(1, max_axis_);
        for (auto& t : p.terms)
            t.frequency.resize(static_cast<std::size_t>(p.dimension), 0);
        return p;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(pos_, what); }
    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }
    char get() { return s_[pos_++]; }
    void skip() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(peek())))
            ++pos_;
    }
    bool starts_with(const char* word) const { return s_.compare(pos_, std::char_traits<char>::length(word), word) == 0; }

    double number() {
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin)
            fail("expected a number");
        pos_ += static_cast<std::size_t>(end - begin);
        if (!std::isfinite(v))
            fail("number out of range");
        return v;
    }

    TrigTerm term(double sign) {
        TrigTerm t;
        t.coefficient = sign;
        if (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.') {
            t.coefficient *= number();
            skip();
            if (peek() == '*') {
                get();
                skip();
                if (!starts_with("cos") && !starts_with("sin"))
                    fail("expected 'cos' or 'sin' after '*'");
            }
            if (!starts_with("cos") && !starts_with("sin"))
                return t;
        }
        if (starts_with("cos"))
            t.kind = TrigTerm::Kind::cosine;
        else if (starts_with("sin"))
            t.kind = TrigTerm::Kind::sine;
        else
            fail("expected a number, 'cos' or 'sin'");
        pos_ += 3;
        skip();
        if (peek() != '(')
            fail("expected '('");
        get();
        t.frequency = linear();
        skip();
        if (peek() != ')')
            fail("expected ')'");
        get();
        return t;
    }

    std::vector<int> linear() {
        std::vector<int> k;
        skip();
        int sign = 1;
        if (peek() == '+' || peek() == '-') {
            sign = get() == '-' ? -1 : 1;
            skip();
        }
        mono(k, sign);
        while (true) {
            skip();
            if (peek() != '+' && peek() != '-')
                break;
            sign = get() == '-' ? -1 : 1;
            skip();
            mono(k, sign);
        }
        return k;
    }

    void mono(std::vector<int>& k, int sign) {
        long c = 1;
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
            const std::size_t start = pos_;
            c = 0;
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                c = c * 10 + (get() - '0');
                if (c > 1000000)
                    throw ParseError(start, "frequency too large");
            }
            skip();
            if (peek() == '*') {
                get();
                skip();
            }
        }
        const std::size_t var_pos = pos_;
        int axis = 0;
        const char v = peek();
        if (v == 'y' || v == 'z') {
            get();
            axis = v == 'y' ? 2 : 3;
        } else if (v == 'x') {
            get();
            if (std::isdigit(static_cast<unsigned char>(peek()))) {
                axis = 0;
                while (std::isdigit(static_cast<unsigned char>(peek()))) {
                    axis = axis * 10 + (get() - '0');
                    if (axis > 64)
                        throw ParseError(var_pos, "axis index too large");
                }
                if (axis == 0)
                    throw ParseError(var_pos, "axes are numbered from x1");
            } else {
                axis = 1;
            }
        } else {
            fail("expected a variable x, y, z or x<k>");
        }
        max_axis_ = std::max(max_axis_, axis);
        if (k.size() < static_cast<std::size_t>(axis))
            k.resize(static_cast<std::size_t>(axis), 0);
        k[static_cast<std::size_t>(axis - 1)] += sign * static_cast<int>(c);
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int max_axis_ = 0;
};

} // namespace detail

inline TrigPolynomial parse_trig_polynomial(const std::string& text) { return detail::TrigParser(text).parse(); }

/// Builds a symbol from a config value: "lattice_laplacian <d>", "discrete_bilaplacian <d>"
/// or a trigonometric polynomial such as "4 - 2 cos(x) - 2 cos(y)". `dimension`, when
/// positive, overrides the dimension inferred from the expression.
inline TorusSymbol symbol_from_spec(const std::string& spec, int dimension = 0) {
    auto builtin = [&](const std::string& name) -> int {
        if (spec.rfind(name, 0) != 0)
            return -1;
        std::string rest = spec.substr(name.size());
        for (char& c : rest)
            if (c == ':' || c == '=')
                c = ' ';
        const auto first = rest.find_first_not_of(' ');
        if (first == std::string::npos)
            return dimension > 0 ? dimension : 1;
        const auto last = rest.find_last_not_of(' ');
        const std::string num = rest.substr(first, last - first + 1);
        char* end = nullptr;
        const long d = std::strtol(num.c_str(), &end, 10);
        if (*end != '\0' || d < 1 || d > 16)
            throw ParseError(name.size() + first, "expected a dimension between 1 and 16");
        return static_cast<int>(d);
    };
    if (const int d = builtin("lattice_laplacian"); d > 0)
        return lattice_laplacian_symbol(d);
    if (const int d = builtin("discrete_bilaplacian"); d > 0)
        return discrete_bilaplacian_symbol(d);
    auto poly = parse_trig_polynomial(spec);
    if (dimension > 0) {
        if (dimension < poly.dimension)
            throw std::invalid_argument("symbol uses axis " + std::to_string(poly.dimension) + " but dimension is " +
                                        std::to_string(dimension));
        poly.dimension = dimension;
        for (auto& t : poly.terms)
            t.frequency.resize(static_cast<std::size_t>(dimension), 0);
    }
    const int d = poly.dimension;
    return scalar_symbol(d, [poly = std::move(poly)](const double* xi) { return poly(xi); }, spec);
}

} // namespace specdens
