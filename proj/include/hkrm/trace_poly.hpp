#pragma once

// Holomorphic trace polynomials C[{v_k : k != 0}] and unreduced word
// polynomials in the letters {A, A^-1, A*, (A*)^-1}.

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hkrm/errors.hpp"
#include "hkrm/linalg.hpp"

namespace hkrm {

/// Index k of the indeterminate v_k = tr(Z^k). Never zero: v_0 is the constant 1.
class HIndex {
public:
    explicit HIndex(int k) : k_(k) {
        if (k == 0) throw InvalidParameter("v_0 is the constant 1, not an indeterminate");
    }
    int value() const { return k_; }
    auto operator<=>(const HIndex&) const = default;

private:
    int k_;
};

/// Finitely supported exponent map k -> e (e > 0), keys ascending.
class Monomial {
public:
    using Factor = std::pair<int, int>; // (index, exponent)

    Monomial() = default;

    static Monomial var(HIndex k, int exponent = 1) {
        Monomial m;
        if (exponent > 0) m.factors_.emplace_back(k.value(), exponent);
        return m;
    }

    /// Builds from arbitrary (index, exponent) pairs; index 0 and zero exponents are dropped.
    static Monomial from_factors(std::vector<Factor> factors) {
        Monomial m;
        for (auto [k, e] : factors) {
            if (k != 0 && e != 0) m.multiply_var(k, e);
        }
        return m;
    }

    const std::vector<Factor>& factors() const { return factors_; }
    bool is_one() const { return factors_.empty(); }

    int exponent(int k) const {
        for (auto [idx, e] : factors_) {
            if (idx == k) return e;
        }
        return 0;
    }

    /// Trace degree sum |k| e_k.
    int degree() const {
        int d = 0;
        for (auto [k, e] : factors_) d += std::abs(k) * e;
        return d;
    }

    /// Signed degree sum k e_k; conserved by both intertwining operators.
    int charge() const {
        int c = 0;
        for (auto [k, e] : factors_) c += k * e;
        return c;
    }

    Monomial operator*(const Monomial& other) const {
        Monomial out = *this;
        for (auto [k, e] : other.factors_) out.multiply_var(k, e);
        return out;
    }

    /// Multiplies by v_k^e. k == 0 is the constant and leaves the monomial unchanged.
    Monomial times_var(int k, int e = 1) const {
        Monomial out = *this;
        if (k != 0) out.multiply_var(k, e);
        return out;
    }

    /// Divides by v_k^e; the caller guarantees exponent(k) >= e.
    Monomial divided_by_var(int k, int e = 1) const {
        Monomial out = *this;
        for (auto it = out.factors_.begin(); it != out.factors_.end(); ++it) {
            if (it->first == k) {
                it->second -= e;
                if (it->second == 0) out.factors_.erase(it);
                return out;
            }
        }
        return out;
    }

    std::string to_string() const {
        std::string s;
        for (auto [k, e] : factors_) {
            for (int i = 0; i < e; ++i) {
                if (!s.empty()) s += '*';
                s += 'v';
                s += std::to_string(k);
            }
        }
        return s;
    }

    auto operator<=>(const Monomial&) const = default;

private:
    void multiply_var(int k, int e) {
        auto it = factors_.begin();
        while (it != factors_.end() && it->first < k) ++it;
        if (it != factors_.end() && it->first == k) {
            it->second += e;
        } else {
            factors_.insert(it, {k, e});
        }
    }

    std::vector<Factor> factors_;
};

/// Sparse polynomial in HP with complex coefficients; exact-zero pruning only.
class TracePoly {
public:
    using Terms = std::map<Monomial, cplx>;

    TracePoly() = default;
    explicit TracePoly(cplx c) { add_term(Monomial{}, c); }
    explicit TracePoly(double c) : TracePoly(cplx(c)) {}

    /// v_k; v(0) is the constant 1.
    static TracePoly v(int k) {
        TracePoly p;
        p.add_term(k == 0 ? Monomial{} : Monomial::var(HIndex(k)), 1.0);
        return p;
    }

    static TracePoly monomial(const Monomial& m, cplx c = 1.0) {
        TracePoly p;
        p.add_term(m, c);
        return p;
    }

    void add_term(const Monomial& m, cplx c) {
        if (c == cplx(0.0)) return;
        auto [it, inserted] = terms_.try_emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == cplx(0.0)) terms_.erase(it);
        }
    }

    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    cplx coefficient(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? cplx(0.0) : it->second;
    }

    int degree() const {
        int d = 0;
        for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
        return d;
    }

    double l1_norm() const {
        double s = 0.0;
        for (const auto& [m, c] : terms_) s += std::abs(c);
        return s;
    }

    cplx eval_at_one() const {
        cplx s = 0.0;
        for (const auto& [m, c] : terms_) s += c;
        return s;
    }

    /// Conjugate in the unitary shadow: v_k -> v_{-k}, coefficients conjugated.
    TracePoly star() const {
        TracePoly out;
        for (const auto& [m, c] : terms_) {
            std::vector<Monomial::Factor> f;
            for (auto [k, e] : m.factors()) f.emplace_back(-k, e);
            out.add_term(Monomial::from_factors(std::move(f)), std::conj(c));
        }
        return out;
    }

    TracePoly& operator+=(const TracePoly& o) {
        for (const auto& [m, c] : o.terms_) add_term(m, c);
        return *this;
    }
    TracePoly& operator-=(const TracePoly& o) {
        for (const auto& [m, c] : o.terms_) add_term(m, -c);
        return *this;
    }
    TracePoly& operator*=(cplx s) {
        if (s == cplx(0.0)) {
            terms_.clear();
            return *this;
        }
        for (auto it = terms_.begin(); it != terms_.end();) {
            it->second *= s;
            if (it->second == cplx(0.0)) {
                it = terms_.erase(it);
            } else {
                ++it;
            }
        }
        return *this;
    }

    friend TracePoly operator+(TracePoly a, const TracePoly& b) { return a += b; }
    friend TracePoly operator-(TracePoly a, const TracePoly& b) { return a -= b; }
    friend TracePoly operator-(TracePoly a) { return a *= -1.0; }
    friend TracePoly operator*(TracePoly a, cplx s) { return a *= s; }
    friend TracePoly operator*(cplx s, TracePoly a) { return a *= s; }

    friend TracePoly operator*(const TracePoly& a, const TracePoly& b) {
        TracePoly out;
        for (const auto& [ma, ca] : a.terms_) {
            for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
        }
        return out;
    }

    friend bool operator==(const TracePoly&, const TracePoly&) = default;

    /// Parsable text form, e.g. "3*v-1*v2 + (0,-1)*v1".
    std::string to_string() const;

private:
    Terms terms_;
};

// ---------------------------------------------------------------------------
// Free-function surface.

inline TracePoly tp_mul(const TracePoly& a, const TracePoly& b) { return a * b; }
inline int trace_degree(const TracePoly& p) { return p.degree(); }
inline double l1_norm(const TracePoly& p) { return p.l1_norm(); }
inline cplx eval_at_one(const TracePoly& p) { return p.eval_at_one(); }

/// Substitutes v_k -> tr(Z^k). Negative powers use Z^{-1}, computed once.
inline cplx eval_on_matrix(const TracePoly& p, const CMatrix& z, double condition_cap = 1e12) {
    if (z.rows() != z.cols()) throw InvalidParameter("eval_on_matrix: matrix must be square");
    int max_pos = 0;
    int max_neg = 0;
    for (const auto& [m, c] : p.terms()) {
        for (auto [k, e] : m.factors()) {
            if (k > 0) max_pos = std::max(max_pos, k);
            if (k < 0) max_neg = std::max(max_neg, -k);
        }
    }
    CMatrix inv;
    if (max_neg > 0) {
        if (condition_estimate(z) > condition_cap) {
            throw SingularMatrix("eval_on_matrix: matrix is numerically singular");
        }
        inv = z.partialPivLu().inverse();
    }
    std::map<int, cplx> traces;
    for (const auto& [m, c] : p.terms()) {
        for (auto [k, e] : m.factors()) {
            if (traces.count(k)) continue;
            traces[k] = normalized_trace(k > 0 ? matrix_power(z, k) : matrix_power(inv, -k));
        }
    }
    cplx total = 0.0;
    for (const auto& [m, c] : p.terms()) {
        cplx term = c;
        for (auto [k, e] : m.factors()) term *= std::pow(traces[k], e);
        total += term;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Text form.

namespace detail {

inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string format_coeff(cplx c) {
    if (c.imag() == 0.0) return format_double(c.real());
    return "(" + format_double(c.real()) + "," + format_double(c.imag()) + ")";
}

class PolyParser {
public:
    explicit PolyParser(std::string_view text) : s_(text) {}

    TracePoly parse() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("empty polynomial");
        TracePoly out;
        bool negate = false;
        if (peek() == '+' || peek() == '-') {
            negate = peek() == '-';
            ++pos_;
        }
        out += negate ? -term() : term();
        while (true) {
            skip_ws();
            if (pos_ >= s_.size()) break;
            char op = peek();
            if (op != '+' && op != '-') fail("expected '+' or '-'");
            ++pos_;
            out += op == '-' ? -term() : term();
        }
        return out;
    }

private:
    char peek() const { return s_[pos_]; }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("polynomial parse error at position " + std::to_string(pos_) + ": " + what +
                         " in '" + std::string(s_) + "'");
    }

    TracePoly term() {
        TracePoly t = factor();
        while (true) {
            skip_ws();
            if (pos_ < s_.size() && peek() == '*') {
                ++pos_;
                t = t * factor();
            } else {
                break;
            }
        }
        return t;
    }

    TracePoly factor() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        char c = peek();
        if (c == 'v') {
            ++pos_;
            return TracePoly::v(static_cast<int>(integer()));
        }
        if (c == '(') {
            ++pos_;
            double re = number();
            skip_ws();
            if (pos_ >= s_.size() || peek() != ',') fail("expected ',' in complex literal");
            ++pos_;
            double im = number();
            skip_ws();
            if (pos_ >= s_.size() || peek() != ')') fail("expected ')' in complex literal");
            ++pos_;
            return TracePoly(cplx(re, im));
        }
        return TracePoly(number());
    }

    double number() {
        skip_ws();
        std::string rest(s_.substr(pos_));
        const char* begin = rest.c_str();
        char* end = nullptr;
        double x = std::strtod(begin, &end);
        if (end == begin || !std::isfinite(x)) fail("expected a number");
        pos_ += static_cast<std::size_t>(end - begin);
        return x;
    }

    long integer() {
        std::string rest(s_.substr(pos_));
        const char* begin = rest.c_str();
        char* end = nullptr;
        long k = std::strtol(begin, &end, 10);
        if (end == begin) fail("expected an integer index after 'v'");
        pos_ += static_cast<std::size_t>(end - begin);
        return k;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string TracePoly::to_string() const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& [m, c] : terms_) {
        if (!out.empty()) out += " + ";
        out += detail::format_coeff(c);
        if (!m.is_one()) out += "*" + m.to_string();
    }
    return out;
}

/// Parses `term ::= coeff ('*' 'v' int)*` joined by '+'/'-'. Coefficients are
/// real literals or `(re,im)`; a bare `v2` has coefficient 1; `v0` is 1.
inline TracePoly parse_trace_poly(std::string_view text) { return detail::PolyParser(text).parse(); }

// ---------------------------------------------------------------------------
// Word polynomials.

enum class Letter : std::int8_t {
    A,        // +1
    AInv,     // -1
    AStar,    // +*
    AStarInv, // -*
};

/// (±1)* = ±*, (±*)* = ±1.
inline Letter star(Letter l) {
    switch (l) {
    case Letter::A: return Letter::AStar;
    case Letter::AInv: return Letter::AStarInv;
    case Letter::AStar: return Letter::A;
    case Letter::AStarInv: return Letter::AInv;
    }
    return l;
}

/// Exponent contributed by a letter when A is unitary (A* = A^-1).
inline int unitary_exponent(Letter l) {
    switch (l) {
    case Letter::A: return 1;
    case Letter::AInv: return -1;
    case Letter::AStar: return -1;
    case Letter::AStarInv: return 1;
    }
    return 0;
}

using Word = std::vector<Letter>;

struct WordTerm {
    Word word;
    cplx coeff;
};

/// Linear combination of unreduced words.
class WordPoly {
public:
    WordPoly() = default;
    WordPoly(std::vector<WordTerm> terms) : terms_(std::move(terms)) {} // NOLINT

    static WordPoly word(Word w, cplx c = 1.0) { return WordPoly({WordTerm{std::move(w), c}}); }
    static WordPoly constant(cplx c) { return word({}, c); }

    const std::vector<WordTerm>& terms() const { return terms_; }

    /// Reverses each word, stars each letter and conjugates coefficients.
    WordPoly star() const {
        std::vector<WordTerm> out;
        out.reserve(terms_.size());
        for (const auto& t : terms_) {
            Word w(t.word.rbegin(), t.word.rend());
            for (auto& l : w) l = hkrm::star(l);
            out.push_back({std::move(w), std::conj(t.coeff)});
        }
        return WordPoly(std::move(out));
    }

    friend WordPoly operator+(const WordPoly& a, const WordPoly& b) {
        std::vector<WordTerm> out = a.terms_;
        out.insert(out.end(), b.terms_.begin(), b.terms_.end());
        return WordPoly(std::move(out));
    }

    friend WordPoly operator*(const WordPoly& a, const WordPoly& b) {
        std::vector<WordTerm> out;
        out.reserve(a.terms_.size() * b.terms_.size());
        for (const auto& ta : a.terms_) {
            for (const auto& tb : b.terms_) {
                Word w = ta.word;
                w.insert(w.end(), tb.word.begin(), tb.word.end());
                out.push_back({std::move(w), ta.coeff * tb.coeff});
            }
        }
        return WordPoly(std::move(out));
    }

    /// Matrix f(Z, Z*) with letters Z, Z^-1, Z*, (Z*)^-1.
    CMatrix evaluate(const CMatrix& z) const {
        const Eigen::Index n = z.rows();
        bool need_inv = false;
        for (const auto& t : terms_) {
            for (auto l : t.word) need_inv = need_inv || l == Letter::AInv || l == Letter::AStarInv;
        }
        CMatrix inv;
        if (need_inv) {
            if (condition_estimate(z) > 1e12) throw SingularMatrix("WordPoly::evaluate: singular matrix");
            inv = z.partialPivLu().inverse();
        }
        CMatrix total = CMatrix::Zero(n, n);
        for (const auto& t : terms_) {
            CMatrix w = CMatrix::Identity(n, n);
            for (auto l : t.word) {
                switch (l) {
                case Letter::A: w = w * z; break;
                case Letter::AInv: w = w * inv; break;
                case Letter::AStar: w = w * z.adjoint(); break;
                case Letter::AStarInv: w = w * inv.adjoint(); break;
                }
            }
            total += t.coeff * w;
        }
        return total;
    }

private:
    std::vector<WordTerm> terms_;
};

/// Collapses each word to v_k with k the signed letter count (A* = A^-1).
inline TracePoly unitary_reduce(const WordPoly& w) {
    TracePoly out;
    for (const auto& t : w.terms()) {
        int k = 0;
        for (auto l : t.word) k += unitary_exponent(l);
        out += TracePoly::v(k) * t.coeff;
    }
    return out;
}

/// (f f*)^{p/2} for even p >= 2.
inline WordPoly lp_word(const WordPoly& f, int p) {
    if (p < 2 || p % 2 != 0) throw InvalidParameter("lp_word: p must be an even integer >= 2");
    WordPoly g = f * f.star();
    WordPoly out = g;
    for (int i = 1; i < p / 2; ++i) out = out * g;
    return out;
}

} // namespace hkrm
