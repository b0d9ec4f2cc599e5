#include "lichlab/expr.hpp"

#include <cctype>
#include <cmath>

namespace lichlab {

struct Expr::Node {
  enum Kind { Num, Coord, Const, Add, Sub, Mul, Div, Pow, Neg, Exp, Sin, Cos, Sqrt } kind;
  double num = 0;
  int coord = 0;
  std::string name;
  std::shared_ptr<const Node> a, b;

  double eval(const Vec3& x, const std::map<std::string, double>& consts) const {
    switch (kind) {
      case Num: return num;
      case Coord: return x[coord];
      case Const: {
        auto it = consts.find(name);
        if (it == consts.end()) throw std::runtime_error("unbound constant '" + name + "'");
        return it->second;
      }
      case Add: return a->eval(x, consts) + b->eval(x, consts);
      case Sub: return a->eval(x, consts) - b->eval(x, consts);
      case Mul: return a->eval(x, consts) * b->eval(x, consts);
      case Div: return a->eval(x, consts) / b->eval(x, consts);
      case Pow: return std::pow(a->eval(x, consts), b->eval(x, consts));
      case Neg: return -a->eval(x, consts);
      case Exp: return std::exp(a->eval(x, consts));
      case Sin: return std::sin(a->eval(x, consts));
      case Cos: return std::cos(a->eval(x, consts));
      case Sqrt: return std::sqrt(a->eval(x, consts));
    }
    return 0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

struct Parser {
  const std::string& s;
  std::size_t pos = 0;

  void skip() {
    while (pos < s.size() && std::isspace((unsigned char)s[pos])) ++pos;
  }
  bool peek(char c) {
    skip();
    return pos < s.size() && s[pos] == c;
  }
  bool accept(char c) {
    if (peek(c)) { ++pos; return true; }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) { throw ExprError(msg, pos); }

  NodePtr make(Expr::Node n) { return std::make_shared<Expr::Node>(std::move(n)); }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make({Expr::Node::Add, 0, 0, "", lhs, term()});
      else if (accept('-')) lhs = make({Expr::Node::Sub, 0, 0, "", lhs, term()});
      else return lhs;
    }
  }
  NodePtr term() {
    NodePtr lhs = factor();
    for (;;) {
      if (accept('*')) lhs = make({Expr::Node::Mul, 0, 0, "", lhs, factor()});
      else if (accept('/')) lhs = make({Expr::Node::Div, 0, 0, "", lhs, factor()});
      else return lhs;
    }
  }
  NodePtr factor() {
    NodePtr base = unary();
    if (accept('^')) return make({Expr::Node::Pow, 0, 0, "", base, factor()});
    return base;
  }
  NodePtr unary() {
    if (accept('-')) return make({Expr::Node::Neg, 0, 0, "", unary(), nullptr});
    accept('+');
    return primary();
  }
  NodePtr primary() {
    skip();
    if (pos >= s.size()) fail("unexpected end of expression");
    const char c = s[pos];
    if (std::isdigit((unsigned char)c) || c == '.') {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(s.substr(pos), &used);
      } catch (...) {
        fail("bad numeric literal");
      }
      pos += used;
      return make({Expr::Node::Num, v, 0, "", nullptr, nullptr});
    }
    if (c == '(') {
      ++pos;
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isalpha((unsigned char)c) || c == '_') {
      std::size_t start = pos;
      while (pos < s.size() && (std::isalnum((unsigned char)s[pos]) || s[pos] == '_')) ++pos;
      const std::string name = s.substr(start, pos - start);
      if (name == "x1" || name == "x2" || name == "x3")
        return make({Expr::Node::Coord, 0, name[1] - '1', "", nullptr, nullptr});
      auto fn = [&](Expr::Node::Kind k) {
        if (!accept('(')) fail("expected '(' after " + name);
        NodePtr e = expr();
        if (!accept(')')) fail("expected ')'");
        return make({k, 0, 0, "", e, nullptr});
      };
      if (name == "exp") return fn(Expr::Node::Exp);
      if (name == "sin") return fn(Expr::Node::Sin);
      if (name == "cos") return fn(Expr::Node::Cos);
      if (name == "sqrt") return fn(Expr::Node::Sqrt);
      if (peek('(')) fail("unknown function '" + name + "'");
      return make({Expr::Node::Const, 0, 0, name, nullptr, nullptr});
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

}  // namespace

Expr Expr::parse(const std::string& src) {
  Parser p{src};
  Expr e;
  e.root_ = p.expr();
  p.skip();
  if (p.pos != src.size()) throw ExprError("trailing input", p.pos);
  e.src_ = src;
  return e;
}

double Expr::eval(const Vec3& x, const std::map<std::string, double>& consts) const {
  return root_->eval(x, consts);
}

std::function<double(const Vec3&)> Expr::field_fn(std::map<std::string, double> consts) const {
  auto root = root_;
  return [root, consts = std::move(consts)](const Vec3& x) { return root->eval(x, consts); };
}

std::function<double(double)> Expr::scalar_fn(std::map<std::string, double> consts) const {
  auto root = root_;
  return [root, consts = std::move(consts)](double s) { return root->eval({s, 0, 0}, consts); };
}

}  // namespace lichlab
