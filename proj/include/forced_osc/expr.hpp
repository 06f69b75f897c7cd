#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace forced_osc {

/// Small arithmetic expression language used by scenario files.
///
/// Supports + - * / ^, unary minus, parentheses, the constants `pi` and `e`,
/// and the functions sin cos tan exp log sqrt abs sinh cosh tanh atan.
/// Variables are bound by name at parse time and evaluated positionally.
/// Expressions can be differentiated symbolically, which is how barrier
/// derivatives and rotation-law derivatives are obtained.
class Expr {
public:
    struct Node;

    Expr();  // the constant 0
    static Expr constant(double value);

    /// Throws Error(ParseError) with a column diagnostic on malformed input or
    /// an unknown identifier.
    static Expr parse(const std::string& text, const std::vector<std::string>& variables);

    double operator()(std::span<const double> values) const;
    double eval(std::initializer_list<double> values) const;

    Expr derivative(std::size_t variable) const;

    bool is_constant() const;
    bool depends_on(std::size_t variable) const;
    std::string str() const;

private:
    explicit Expr(std::shared_ptr<const Node> node);
    std::shared_ptr<const Node> node_;
    std::vector<std::string> names_;
};

}  // namespace forced_osc
