#include "forced_osc/expr.hpp"

#include "forced_osc/errors.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

namespace forced_osc {

enum class Op { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Call };
enum class Fn { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Sinh, Cosh, Tanh, Atan, Sign };

struct Expr::Node {
    Op op;
    double value = 0.0;
    std::size_t var = 0;
    Fn fn = Fn::Sin;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr num(double v) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Num;
    n->value = v;
    return n;
}

NodePtr var(std::size_t i) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Var;
    n->var = i;
    return n;
}

bool is_num(const NodePtr& n, double v) { return n->op == Op::Num && n->value == v; }

NodePtr binary(Op op, NodePtr a, NodePtr b) {
    // Light constant folding keeps derivative trees small.
    if (a->op == Op::Num && b->op == Op::Num) {
        switch (op) {
            case Op::Add: return num(a->value + b->value);
            case Op::Sub: return num(a->value - b->value);
            case Op::Mul: return num(a->value * b->value);
            case Op::Div: return num(a->value / b->value);
            case Op::Pow: return num(std::pow(a->value, b->value));
            default: break;
        }
    }
    if (op == Op::Add) {
        if (is_num(a, 0.0)) return b;
        if (is_num(b, 0.0)) return a;
    }
    if (op == Op::Sub && is_num(b, 0.0)) return a;
    if (op == Op::Mul) {
        if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
        if (is_num(a, 1.0)) return b;
        if (is_num(b, 1.0)) return a;
    }
    if (op == Op::Div && is_num(a, 0.0)) return num(0.0);
    if (op == Op::Div && is_num(b, 1.0)) return a;
    if (op == Op::Pow && is_num(b, 1.0)) return a;
    if (op == Op::Pow && is_num(b, 0.0)) return num(1.0);
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodePtr neg(NodePtr a) {
    if (a->op == Op::Num) return num(-a->value);
    if (a->op == Op::Neg) return a->a;
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Neg;
    n->a = std::move(a);
    return n;
}

NodePtr call(Fn fn, NodePtr a) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Call;
    n->fn = fn;
    n->a = std::move(a);
    return n;
}

double apply(Fn fn, double x) {
    switch (fn) {
        case Fn::Sin: return std::sin(x);
        case Fn::Cos: return std::cos(x);
        case Fn::Tan: return std::tan(x);
        case Fn::Exp: return std::exp(x);
        case Fn::Log: return std::log(x);
        case Fn::Sqrt: return std::sqrt(x);
        case Fn::Abs: return std::abs(x);
        case Fn::Sinh: return std::sinh(x);
        case Fn::Cosh: return std::cosh(x);
        case Fn::Tanh: return std::tanh(x);
        case Fn::Atan: return std::atan(x);
        case Fn::Sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    }
    return 0.0;
}

double evaluate(const Expr::Node& n, std::span<const double> v) {
    switch (n.op) {
        case Op::Num: return n.value;
        case Op::Var: return v[n.var];
        case Op::Add: return evaluate(*n.a, v) + evaluate(*n.b, v);
        case Op::Sub: return evaluate(*n.a, v) - evaluate(*n.b, v);
        case Op::Mul: return evaluate(*n.a, v) * evaluate(*n.b, v);
        case Op::Div: return evaluate(*n.a, v) / evaluate(*n.b, v);
        case Op::Pow: {
            const double base = evaluate(*n.a, v);
            if (n.b->op == Op::Num) {
                const double p = n.b->value;
                if (p == 2.0) return base * base;
                if (p == 3.0) return base * base * base;
                return std::pow(base, p);
            }
            return std::pow(base, evaluate(*n.b, v));
        }
        case Op::Neg: return -evaluate(*n.a, v);
        case Op::Call: return apply(n.fn, evaluate(*n.a, v));
    }
    return 0.0;
}

bool depends(const NodePtr& n, std::size_t i) {
    switch (n->op) {
        case Op::Num: return false;
        case Op::Var: return n->var == i;
        case Op::Neg:
        case Op::Call: return depends(n->a, i);
        default: return depends(n->a, i) || depends(n->b, i);
    }
}

bool has_vars(const NodePtr& n) {
    switch (n->op) {
        case Op::Num: return false;
        case Op::Var: return true;
        case Op::Neg:
        case Op::Call: return has_vars(n->a);
        default: return has_vars(n->a) || has_vars(n->b);
    }
}

NodePtr diff(const NodePtr& n, std::size_t i) {
    if (!depends(n, i)) return num(0.0);
    switch (n->op) {
        case Op::Num: return num(0.0);
        case Op::Var: return num(n->var == i ? 1.0 : 0.0);
        case Op::Add: return binary(Op::Add, diff(n->a, i), diff(n->b, i));
        case Op::Sub: return binary(Op::Sub, diff(n->a, i), diff(n->b, i));
        case Op::Mul:
            return binary(Op::Add, binary(Op::Mul, diff(n->a, i), n->b),
                          binary(Op::Mul, n->a, diff(n->b, i)));
        case Op::Div:
            return binary(Op::Div,
                          binary(Op::Sub, binary(Op::Mul, diff(n->a, i), n->b),
                                 binary(Op::Mul, n->a, diff(n->b, i))),
                          binary(Op::Pow, n->b, num(2.0)));
        case Op::Pow:
            if (!depends(n->b, i)) {
                // d(u^c) = c u^(c-1) u'
                return binary(Op::Mul,
                              binary(Op::Mul, n->b, binary(Op::Pow, n->a, binary(Op::Sub, n->b, num(1.0)))),
                              diff(n->a, i));
            }
            // d(u^w) = u^w (w' ln u + w u'/u)
            return binary(Op::Mul, n,
                          binary(Op::Add, binary(Op::Mul, diff(n->b, i), call(Fn::Log, n->a)),
                                 binary(Op::Div, binary(Op::Mul, n->b, diff(n->a, i)), n->a)));
        case Op::Neg: return neg(diff(n->a, i));
        case Op::Call: {
            const NodePtr& u = n->a;
            NodePtr outer;
            switch (n->fn) {
                case Fn::Sin: outer = call(Fn::Cos, u); break;
                case Fn::Cos: outer = neg(call(Fn::Sin, u)); break;
                case Fn::Tan: outer = binary(Op::Add, num(1.0), binary(Op::Pow, n, num(2.0))); break;
                case Fn::Exp: outer = n; break;
                case Fn::Log: outer = binary(Op::Div, num(1.0), u); break;
                case Fn::Sqrt: outer = binary(Op::Div, num(0.5), n); break;
                case Fn::Abs: outer = call(Fn::Sign, u); break;
                case Fn::Sinh: outer = call(Fn::Cosh, u); break;
                case Fn::Cosh: outer = call(Fn::Sinh, u); break;
                case Fn::Tanh: outer = binary(Op::Sub, num(1.0), binary(Op::Pow, n, num(2.0))); break;
                case Fn::Atan:
                    outer = binary(Op::Div, num(1.0), binary(Op::Add, num(1.0), binary(Op::Pow, u, num(2.0))));
                    break;
                case Fn::Sign: return num(0.0);
            }
            return binary(Op::Mul, outer, diff(u, i));
        }
    }
    return num(0.0);
}

const char* fn_name(Fn fn) {
    switch (fn) {
        case Fn::Sin: return "sin";
        case Fn::Cos: return "cos";
        case Fn::Tan: return "tan";
        case Fn::Exp: return "exp";
        case Fn::Log: return "log";
        case Fn::Sqrt: return "sqrt";
        case Fn::Abs: return "abs";
        case Fn::Sinh: return "sinh";
        case Fn::Cosh: return "cosh";
        case Fn::Tanh: return "tanh";
        case Fn::Atan: return "atan";
        case Fn::Sign: return "sign";
    }
    return "?";
}

void print(const NodePtr& n, const std::vector<std::string>& names, std::ostringstream& os) {
    switch (n->op) {
        case Op::Num: os << n->value; return;
        case Op::Var: os << (n->var < names.size() ? names[n->var] : "?"); return;
        case Op::Neg: os << "(-"; print(n->a, names, os); os << ")"; return;
        case Op::Call: os << fn_name(n->fn) << "("; print(n->a, names, os); os << ")"; return;
        default: break;
    }
    const char* sym = n->op == Op::Add ? "+" : n->op == Op::Sub ? "-" : n->op == Op::Mul ? "*" : n->op == Op::Div ? "/" : "^";
    os << "(";
    print(n->a, names, os);
    os << sym;
    print(n->b, names, os);
    os << ")";
}

class Parser {
public:
    Parser(const std::string& text, const std::vector<std::string>& vars) : s_(text), vars_(vars) {}

    NodePtr parse() {
        NodePtr n = expression();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::ParseError,
                    "expression '" + s_ + "' column " + std::to_string(pos_ + 1) + ": " + msg);
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expression() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = binary(Op::Add, lhs, term());
            else if (accept('-')) lhs = binary(Op::Sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = binary(Op::Mul, lhs, unary());
            else if (accept('/')) lhs = binary(Op::Div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return neg(unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return binary(Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of expression");
        if (accept('(')) {
            NodePtr n = expression();
            if (!accept(')')) fail("expected ')'");
            return n;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            return num(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            skip();
            if (pos_ < s_.size() && s_[pos_] == '(') {
                ++pos_;
                NodePtr arg = expression();
                if (!accept(')')) fail("expected ')' after argument of " + id);
                return call(function(id), arg);
            }
            for (std::size_t i = 0; i < vars_.size(); ++i)
                if (vars_[i] == id) return var(i);
            if (id == "pi") return num(std::numbers::pi);
            if (id == "e") return num(std::numbers::e);
            std::string known;
            for (const auto& v : vars_) known += (known.empty() ? "" : ", ") + v;
            pos_ = start;
            fail("unknown identifier '" + id + "' (variables: " + (known.empty() ? "none" : known) + ")");
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Fn function(const std::string& id) {
        static const std::pair<const char*, Fn> table[] = {
            {"sin", Fn::Sin},   {"cos", Fn::Cos},   {"tan", Fn::Tan},   {"exp", Fn::Exp},
            {"log", Fn::Log},   {"sqrt", Fn::Sqrt}, {"abs", Fn::Abs},   {"sinh", Fn::Sinh},
            {"cosh", Fn::Cosh}, {"tanh", Fn::Tanh}, {"atan", Fn::Atan}, {"sign", Fn::Sign},
        };
        for (const auto& [name, fn] : table)
            if (id == name) return fn;
        fail("unknown function '" + id + "'");
    }

    const std::string& s_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr::Expr() : node_(num(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) { return Expr(num(value)); }

Expr Expr::parse(const std::string& text, const std::vector<std::string>& variables) {
    Parser p(text, variables);
    Expr e(p.parse());
    e.names_ = variables;
    return e;
}

double Expr::operator()(std::span<const double> values) const { return evaluate(*node_, values); }

double Expr::eval(std::initializer_list<double> values) const {
    return evaluate(*node_, std::span<const double>(values.begin(), values.size()));
}

Expr Expr::derivative(std::size_t variable) const {
    Expr d(diff(node_, variable));
    d.names_ = names_;
    return d;
}

bool Expr::is_constant() const { return !has_vars(node_); }

bool Expr::depends_on(std::size_t variable) const { return depends(node_, variable); }

std::string Expr::str() const {
    std::ostringstream os;
    os.precision(17);
    print(node_, names_, os);
    return os.str();
}

}  // namespace forced_osc
