#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "lichlab/core.hpp"

namespace lichlab {

struct ExprError : std::runtime_error {
  std::size_t pos;
  ExprError(const std::string& m, std::size_t p) : std::runtime_error(m), pos(p) {}
};

/// Minimal expression grammar: literals, + - * / ^, exp, sin, cos, sqrt,
/// coordinates x1 x2 x3, plus caller-registered named constants.
class Expr {
 public:
  static Expr parse(const std::string& src);

  double eval(const Vec3& x, const std::map<std::string, double>& consts = {}) const;

  std::function<double(const Vec3&)> field_fn(std::map<std::string, double> consts = {}) const;
  /// Single-argument view: the argument is bound to x1.
  std::function<double(double)> scalar_fn(std::map<std::string, double> consts = {}) const;

  const std::string& source() const { return src_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string src_;
};

}  // namespace lichlab
