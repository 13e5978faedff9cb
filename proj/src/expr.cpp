#include "kcontract/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace kcontract {

namespace {

using Node = Expr::Node;
using NodeP = std::shared_ptr<const Node>;

NodeP make_const(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Const;
  n->value = v;
  return n;
}

bool node_is_const(const NodeP& n, double v) {
  return n->kind == Node::Kind::Const && n->value == v;
}

}  // namespace

Expr::Expr(double c) : node_(make_const(c)) {}

Expr Expr::variable(VarRef v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Var;
  n->var = v;
  return Expr(std::move(n));
}

bool Expr::is_constant() const { return node_->kind == Node::Kind::Const; }
bool Expr::is_constant(double v) const { return node_is_const(node_, v); }

namespace {

double apply_unary(UnaryFn fn, double a) {
  switch (fn) {
    case UnaryFn::Neg: return -a;
    case UnaryFn::Sin: return std::sin(a);
    case UnaryFn::Cos: return std::cos(a);
    case UnaryFn::Tanh: return std::tanh(a);
    case UnaryFn::Exp: return std::exp(a);
    case UnaryFn::Sqrt:
      if (a < 0) throw EvalError("sqrt of negative value");
      return std::sqrt(a);
    case UnaryFn::Abs: return std::abs(a);
    case UnaryFn::Sign: return a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
  }
  throw EvalError("unknown unary function");
}

}  // namespace

Expr Expr::unary(UnaryFn fn, Expr a) {
  // Constant folding, except when folding would swallow a domain error.
  if (a.is_constant()) {
    double v = a.node().value;
    if (!(fn == UnaryFn::Sqrt && v < 0)) return Expr(apply_unary(fn, v));
  }
  if (fn == UnaryFn::Neg && a.node().kind == Node::Kind::Unary &&
      a.node().fn == UnaryFn::Neg) {
    return Expr(a.node().a);  // neg(neg(e)) -> e
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Unary;
  n->fn = fn;
  n->a = a.node_;
  return Expr(std::move(n));
}

Expr Expr::binary(BinOp op, Expr a, Expr b) {
  // Constant folding and the 0/1 identities; nothing fancier. Division keeps
  // its node when the denominator folds to zero so the error happens at eval.
  if (a.is_constant() && b.is_constant()) {
    double x = a.node().value, y = b.node().value;
    switch (op) {
      case BinOp::Add: return Expr(x + y);
      case BinOp::Sub: return Expr(x - y);
      case BinOp::Mul: return Expr(x * y);
      case BinOp::Div:
        if (y != 0.0) return Expr(x / y);
        break;
    }
  }
  switch (op) {
    case BinOp::Add:
      if (a.is_constant(0)) return b;
      if (b.is_constant(0)) return a;
      break;
    case BinOp::Sub:
      if (b.is_constant(0)) return a;
      if (a.is_constant(0)) return unary(UnaryFn::Neg, std::move(b));
      break;
    case BinOp::Mul:
      if (a.is_constant(0) || b.is_constant(0)) return Expr(0.0);
      if (a.is_constant(1)) return b;
      if (b.is_constant(1)) return a;
      break;
    case BinOp::Div:
      if (b.is_constant(1)) return a;
      break;
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Binary;
  n->op = op;
  n->a = a.node_;
  n->b = b.node_;
  return Expr(std::move(n));
}

Expr Expr::pow(Expr base, int exponent) {
  if (exponent == 0) return Expr(1.0);  // adopt 0^0 = 1
  if (exponent == 1) return base;
  if (base.is_constant()) {
    double v = base.node().value;
    if (!(v == 0.0 && exponent < 0)) return Expr(std::pow(v, exponent));
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Pow;
  n->exponent = exponent;
  n->a = base.node_;
  return Expr(std::move(n));
}

std::string var_name(VarRef v) {
  switch (v.block) {
    case VarBlock::X: return "x" + std::to_string(v.index);
    case VarBlock::U: return "u" + std::to_string(v.index);
    case VarBlock::Y: return "y" + std::to_string(v.index);
    case VarBlock::S: return "s";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parser

namespace {

const std::map<std::string, UnaryFn, std::less<>> kFunctions = {
    {"sin", UnaryFn::Sin},
    {"cos", UnaryFn::Cos},
    {"tanh", UnaryFn::Tanh},
    {"exp", UnaryFn::Exp},
    {"sqrt", UnaryFn::Sqrt},
    {"abs", UnaryFn::Abs},
    {"sign", UnaryFn::Sign},
};

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr run() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

private:
  std::string_view text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (eat('+')) {
        e = e + parse_term();
      } else if (eat('-')) {
        e = e - parse_term();
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    for (;;) {
      if (eat('*')) {
        e = e * parse_factor();
      } else if (eat('/')) {
        e = e / parse_factor();
      } else {
        return e;
      }
    }
  }

  Expr parse_factor() {
    Expr b = parse_base();
    if (eat('^')) return Expr::pow(std::move(b), parse_integer());
    return b;
  }

  int parse_integer() {
    skip_ws();
    std::size_t start = pos_;
    bool neg = false;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
      neg = text_[pos_] == '-';
      ++pos_;
    }
    if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
      fail("expected integer exponent");
    long v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > 1000) { pos_ = start; fail("exponent out of range"); }
      ++pos_;
    }
    return static_cast<int>(neg ? -v : v);
  }

  Expr parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      return -parse_base();
    }
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // 'e' belongs to something else
      }
    }
    std::string tok(text_.substr(start, pos_ - start));
    if (tok == ".") { pos_ = start; fail("malformed number"); }
    try {
      return Expr(std::stod(tok));
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number '" + tok + "'");
    }
  }

  Expr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);

    auto fn = kFunctions.find(name);
    if (fn != kFunctions.end()) {
      if (!eat('(')) { pos_ = start; fail("function '" + std::string(name) + "' needs '('"); }
      Expr arg = parse_expr();
      if (!eat(')')) fail("expected ')'");
      return Expr::unary(fn->second, std::move(arg));
    }

    if (name == "s") return Expr::variable({VarBlock::S, 1});
    if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u' || name[0] == 'y')) {
      bool digits = true;
      long idx = 0;
      for (std::size_t i = 1; i < name.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(name[i]))) { digits = false; break; }
        idx = idx * 10 + (name[i] - '0');
        if (idx > 1000000) { digits = false; break; }
      }
      if (digits && idx >= 1) {
        VarBlock b = name[0] == 'x' ? VarBlock::X : (name[0] == 'u' ? VarBlock::U : VarBlock::Y);
        return Expr::variable({b, static_cast<int>(idx)});
      }
    }

    pos_ = start;
    if (peek() == '(' || (pos_ + name.size() < text_.size() && text_[pos_ + name.size()] == '('))
      fail("unknown function '" + std::string(name) + "'");
    fail("unknown identifier '" + std::string(name) + "'");
  }
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* fn_name(UnaryFn fn) {
  switch (fn) {
    case UnaryFn::Neg: return "-";
    case UnaryFn::Sin: return "sin";
    case UnaryFn::Cos: return "cos";
    case UnaryFn::Tanh: return "tanh";
    case UnaryFn::Exp: return "exp";
    case UnaryFn::Sqrt: return "sqrt";
    case UnaryFn::Abs: return "abs";
    case UnaryFn::Sign: return "sign";
  }
  return "?";
}

// Precedence levels: 1 add/sub, 2 mul/div, 3 unary minus, 4 pow, 5 atom.
int precedence(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Const: return n.value < 0 ? 3 : 5;
    case Node::Kind::Var: return 5;
    case Node::Kind::Pow: return 4;
    case Node::Kind::Unary: return n.fn == UnaryFn::Neg ? 3 : 5;
    case Node::Kind::Binary:
      return (n.op == BinOp::Add || n.op == BinOp::Sub) ? 1 : 2;
  }
  return 5;
}

void print_node(const Node& n, std::string& out);

void print_wrapped(const Node& n, int min_prec, std::string& out) {
  if (precedence(n) < min_prec) {
    out += '(';
    print_node(n, out);
    out += ')';
  } else {
    print_node(n, out);
  }
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::Const:
      out += fmt_double(n.value);
      return;
    case Node::Kind::Var:
      out += var_name(n.var);
      return;
    case Node::Kind::Unary:
      if (n.fn == UnaryFn::Neg) {
        out += '-';
        // In this grammar a leading '-' binds before '^' ("-x^2" is (-x)^2),
        // so a negated power needs explicit parentheses.
        if (n.a->kind == Node::Kind::Pow) {
          out += '(';
          print_node(*n.a, out);
          out += ')';
        } else {
          print_wrapped(*n.a, 3, out);
        }
      } else {
        out += fn_name(n.fn);
        out += '(';
        print_node(*n.a, out);
        out += ')';
      }
      return;
    case Node::Kind::Pow:
      print_wrapped(*n.a, 5, out);  // parenthesize every non-atomic base
      out += '^';
      out += std::to_string(n.exponent);
      return;
    case Node::Kind::Binary: {
      int prec = precedence(n);
      const char* op = n.op == BinOp::Add ? " + "
                       : n.op == BinOp::Sub ? " - "
                       : n.op == BinOp::Mul ? "*"
                                            : "/";
      print_wrapped(*n.a, prec, out);
      out += op;
      // The grammar is left-associative, so a same-precedence right operand
      // always needs parentheses to reproduce the tree shape exactly.
      print_wrapped(*n.b, prec + 1, out);
      return;
    }
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print_node(e.node(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double lookup(const Env& env, VarRef v) {
  const Eigen::VectorXd* vec = nullptr;
  switch (v.block) {
    case VarBlock::X: vec = &env.x; break;
    case VarBlock::U: vec = &env.u; break;
    case VarBlock::Y: vec = &env.y; break;
    case VarBlock::S:
      if (!env.s) throw EvalError("unbound variable s");
      return *env.s;
  }
  if (v.index < 1 || v.index > vec->size())
    throw EvalError("unbound variable " + var_name(v));
  return (*vec)(v.index - 1);
}

double eval_node(const Node& n, const Env& env) {
  switch (n.kind) {
    case Node::Kind::Const: return n.value;
    case Node::Kind::Var: return lookup(env, n.var);
    case Node::Kind::Unary: return apply_unary(n.fn, eval_node(*n.a, env));
    case Node::Kind::Pow: {
      double b = eval_node(*n.a, env);
      if (b == 0.0 && n.exponent < 0) throw EvalError("division by zero (x^negative at x=0)");
      return std::pow(b, n.exponent);
    }
    case Node::Kind::Binary: {
      double a = eval_node(*n.a, env);
      double b = eval_node(*n.b, env);
      switch (n.op) {
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Mul: return a * b;
        case BinOp::Div:
          if (b == 0.0) throw EvalError("division by zero");
          return a / b;
      }
    }
  }
  throw EvalError("corrupt expression node");
}

}  // namespace

double eval(const Expr& e, const Env& env) { return eval_node(e.node(), env); }

// ---------------------------------------------------------------------------
// Differentiation and substitution. Subtrees are rebuilt through the public
// factories so folding applies to every derived expression as well.

namespace {

Expr clone(const Node& n);

Expr clone_child(const NodeP& p) { return clone(*p); }

Expr clone(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Const: return Expr(n.value);
    case Node::Kind::Var: return Expr::variable(n.var);
    case Node::Kind::Unary: return Expr::unary(n.fn, clone_child(n.a));
    case Node::Kind::Pow: return Expr::pow(clone_child(n.a), n.exponent);
    case Node::Kind::Binary: return Expr::binary(n.op, clone_child(n.a), clone_child(n.b));
  }
  return Expr(0.0);
}

Expr diff_node(const Node& n, VarRef v) {
  switch (n.kind) {
    case Node::Kind::Const: return Expr(0.0);
    case Node::Kind::Var: return Expr(n.var == v ? 1.0 : 0.0);
    case Node::Kind::Unary: {
      Expr a = clone_child(n.a);
      Expr da = diff_node(*n.a, v);
      switch (n.fn) {
        case UnaryFn::Neg: return -da;
        case UnaryFn::Sin: return Expr::unary(UnaryFn::Cos, a) * da;
        case UnaryFn::Cos: return -(Expr::unary(UnaryFn::Sin, a) * da);
        case UnaryFn::Tanh:
          return (Expr(1.0) - Expr::pow(Expr::unary(UnaryFn::Tanh, a), 2)) * da;
        case UnaryFn::Exp: return Expr::unary(UnaryFn::Exp, a) * da;
        case UnaryFn::Sqrt:
          return da / (Expr(2.0) * Expr::unary(UnaryFn::Sqrt, a));
        case UnaryFn::Abs: return Expr::unary(UnaryFn::Sign, a) * da;
        case UnaryFn::Sign: return Expr(0.0);  // a.e. zero; 0 at kinks by decision
      }
      break;
    }
    case Node::Kind::Pow: {
      Expr a = clone_child(n.a);
      Expr da = diff_node(*n.a, v);
      return Expr(static_cast<double>(n.exponent)) * Expr::pow(a, n.exponent - 1) * da;
    }
    case Node::Kind::Binary: {
      Expr a = clone_child(n.a);
      Expr b = clone_child(n.b);
      Expr da = diff_node(*n.a, v);
      Expr db = diff_node(*n.b, v);
      switch (n.op) {
        case BinOp::Add: return da + db;
        case BinOp::Sub: return da - db;
        case BinOp::Mul: return da * b + a * db;
        case BinOp::Div: return (da * b - a * db) / Expr::pow(b, 2);
      }
      break;
    }
  }
  return Expr(0.0);
}

Expr subst_node(const Node& n, VarRef v, const Expr& rep) {
  switch (n.kind) {
    case Node::Kind::Const: return Expr(n.value);
    case Node::Kind::Var: return n.var == v ? rep : Expr::variable(n.var);
    case Node::Kind::Unary: return Expr::unary(n.fn, subst_node(*n.a, v, rep));
    case Node::Kind::Pow: return Expr::pow(subst_node(*n.a, v, rep), n.exponent);
    case Node::Kind::Binary:
      return Expr::binary(n.op, subst_node(*n.a, v, rep), subst_node(*n.b, v, rep));
  }
  return Expr(0.0);
}

void collect_vars(const Node& n, std::set<std::pair<int, int>>& acc) {
  switch (n.kind) {
    case Node::Kind::Const: return;
    case Node::Kind::Var:
      acc.insert({static_cast<int>(n.var.block), n.var.index});
      return;
    case Node::Kind::Unary:
    case Node::Kind::Pow:
      collect_vars(*n.a, acc);
      return;
    case Node::Kind::Binary:
      collect_vars(*n.a, acc);
      collect_vars(*n.b, acc);
      return;
  }
}

}  // namespace

Expr diff(const Expr& e, VarRef v) { return diff_node(e.node(), v); }

Expr substitute(const Expr& e, VarRef v, const Expr& replacement) {
  return subst_node(e.node(), v, replacement);
}

std::vector<VarRef> variables_of(const Expr& e) {
  std::set<std::pair<int, int>> acc;
  collect_vars(e.node(), acc);
  std::vector<VarRef> out;
  for (auto [b, i] : acc) out.push_back({static_cast<VarBlock>(b), i});
  return out;
}

// ---------------------------------------------------------------------------
// VectorFunction

VectorFunction::VectorFunction(std::vector<Expr> components, int nx, int nu, int ny)
    : components_(std::move(components)), nx_(nx), nu_(nu), ny_(ny) {
  if (components_.empty()) throw DimensionError("vector function needs at least one component");
  for (std::size_t i = 0; i < components_.size(); ++i) {
    for (VarRef v : variables_of(components_[i])) {
      int limit = 0;
      switch (v.block) {
        case VarBlock::X: limit = nx_; break;
        case VarBlock::U: limit = nu_; break;
        case VarBlock::Y: limit = ny_; break;
        case VarBlock::S:
          throw DimensionError("component " + std::to_string(i + 1) +
                               ": unresolved alias 's'");
      }
      if (v.index > limit)
        throw DimensionError("component " + std::to_string(i + 1) + ": variable " +
                             var_name(v) + " exceeds declared arity " + std::to_string(limit));
    }
  }
}

int VectorFunction::arity(VarBlock b) const {
  switch (b) {
    case VarBlock::X: return nx_;
    case VarBlock::U: return nu_;
    case VarBlock::Y: return ny_;
    case VarBlock::S: return 0;
  }
  return 0;
}

Eigen::VectorXd VectorFunction::operator()(const Env& env) const {
  Eigen::VectorXd out(out_dim());
  for (int i = 0; i < out_dim(); ++i) out(i) = eval(components_[i], env);
  return out;
}

ExprMatrix jacobian(const VectorFunction& F, VarBlock block) {
  int cols = F.arity(block);
  if (cols <= 0) throw DimensionError("jacobian: block has zero arity");
  ExprMatrix J(F.out_dim());
  for (int i = 0; i < F.out_dim(); ++i) {
    J[i].reserve(cols);
    for (int j = 1; j <= cols; ++j) J[i].push_back(diff(F.components()[i], {block, j}));
  }
  return J;
}

Eigen::MatrixXd eval_matrix(const ExprMatrix& M, const Env& env) {
  if (M.empty()) return {};
  Eigen::MatrixXd out(M.size(), M[0].size());
  for (std::size_t i = 0; i < M.size(); ++i) {
    if (M[i].size() != M[0].size()) throw DimensionError("ragged expression matrix");
    for (std::size_t j = 0; j < M[i].size(); ++j) out(i, j) = eval(M[i][j], env);
  }
  return out;
}

std::vector<Expr> parse_components(const std::vector<std::string>& texts,
                                   std::optional<VarRef> s_target) {
  std::vector<Expr> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    Expr e = parse(t);
    if (s_target) e = substitute(e, {VarBlock::S, 1}, Expr::variable(*s_target));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace kcontract
