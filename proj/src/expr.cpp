#include "dhs/expr.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dhs {

ExprPtr Expr::constant(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Const;
  e->value = v;
  return e;
}

ExprPtr Expr::var(ExprKind k, int index0) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->index = index0;
  return e;
}

ExprPtr Expr::make(ExprKind k, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

ExprPtr Expr::pow(ExprPtr a, long long n) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Pow;
  e->a = std::move(a);
  e->ipow = n;
  return e;
}

double eval(const ExprPtr& e, const EvalContext& ctx) {
  switch (e->kind) {
    case ExprKind::Const: return e->value;
    case ExprKind::VarX:
      if (e->index >= ctx.nx) throw std::domain_error("x index out of range in expression");
      return ctx.x[e->index];
    case ExprKind::VarXd:
      if (e->index >= ctx.nx) throw std::domain_error("xd index out of range in expression");
      return ctx.xd[e->index];
    case ExprKind::VarW:
      if (e->index >= ctx.nw) throw std::domain_error("w index out of range in expression");
      return ctx.w[e->index];
    case ExprKind::VarT: return ctx.t;
    case ExprKind::Add: return eval(e->a, ctx) + eval(e->b, ctx);
    case ExprKind::Sub: return eval(e->a, ctx) - eval(e->b, ctx);
    case ExprKind::Mul: return eval(e->a, ctx) * eval(e->b, ctx);
    case ExprKind::Div: {
      const double d = eval(e->b, ctx);
      if (d == 0.0) throw std::domain_error("division by zero in term '" + to_string(e) + "'");
      return eval(e->a, ctx) / d;
    }
    case ExprKind::Neg: return -eval(e->a, ctx);
    case ExprKind::Sin: return std::sin(eval(e->a, ctx));
    case ExprKind::Cos: return std::cos(eval(e->a, ctx));
    case ExprKind::Exp: return std::exp(eval(e->a, ctx));
    case ExprKind::Pow: return std::pow(eval(e->a, ctx), (double)e->ipow);
  }
  throw std::logic_error("unreachable");
}

Interval eval_interval(const ExprPtr& e, const IntervalContext& ctx) {
  switch (e->kind) {
    case ExprKind::Const: return Interval(e->value);
    case ExprKind::VarX:
      if (e->index >= ctx.nx) throw std::domain_error("x index out of range in expression");
      return ctx.x[e->index];
    case ExprKind::VarXd:
      if (e->index >= ctx.nx) throw std::domain_error("xd index out of range in expression");
      return ctx.xd[e->index];
    case ExprKind::VarW:
      if (e->index >= ctx.nw) throw std::domain_error("w index out of range in expression");
      return ctx.w[e->index];
    case ExprKind::VarT: return ctx.t;
    case ExprKind::Add: return eval_interval(e->a, ctx) + eval_interval(e->b, ctx);
    case ExprKind::Sub: return eval_interval(e->a, ctx) - eval_interval(e->b, ctx);
    case ExprKind::Mul: return eval_interval(e->a, ctx) * eval_interval(e->b, ctx);
    case ExprKind::Div: return eval_interval(e->a, ctx) / eval_interval(e->b, ctx);
    case ExprKind::Neg: return -eval_interval(e->a, ctx);
    case ExprKind::Sin: return sin(eval_interval(e->a, ctx));
    case ExprKind::Cos: return cos(eval_interval(e->a, ctx));
    case ExprKind::Exp: return exp(eval_interval(e->a, ctx));
    case ExprKind::Pow: return pow_int(eval_interval(e->a, ctx), e->ipow);
  }
  throw std::logic_error("unreachable");
}

ExprPtr differentiate(const ExprPtr& e, ExprKind var, int index0) {
  using K = ExprKind;
  switch (e->kind) {
    case K::Const: return Expr::constant(0.0);
    case K::VarX:
    case K::VarXd:
    case K::VarW:
      return Expr::constant(e->kind == var && e->index == index0 ? 1.0 : 0.0);
    case K::VarT: return Expr::constant(var == K::VarT ? 1.0 : 0.0);
    case K::Add: return Expr::make(K::Add, differentiate(e->a, var, index0), differentiate(e->b, var, index0));
    case K::Sub: return Expr::make(K::Sub, differentiate(e->a, var, index0), differentiate(e->b, var, index0));
    case K::Mul:
      return Expr::make(K::Add,
                        Expr::make(K::Mul, differentiate(e->a, var, index0), e->b),
                        Expr::make(K::Mul, e->a, differentiate(e->b, var, index0)));
    case K::Div:
      // (a/b)' = a'/b - a b'/b^2
      return Expr::make(K::Sub,
                        Expr::make(K::Div, differentiate(e->a, var, index0), e->b),
                        Expr::make(K::Div, Expr::make(K::Mul, e->a, differentiate(e->b, var, index0)),
                                   Expr::pow(e->b, 2)));
    case K::Neg: return Expr::make(K::Neg, differentiate(e->a, var, index0));
    case K::Sin: return Expr::make(K::Mul, Expr::make(K::Cos, e->a), differentiate(e->a, var, index0));
    case K::Cos:
      return Expr::make(K::Neg, Expr::make(K::Mul, Expr::make(K::Sin, e->a), differentiate(e->a, var, index0)));
    case K::Exp: return Expr::make(K::Mul, Expr::make(K::Exp, e->a), differentiate(e->a, var, index0));
    case K::Pow:
      if (e->ipow == 0) return Expr::constant(0.0);
      return Expr::make(K::Mul,
                        Expr::make(K::Mul, Expr::constant((double)e->ipow), Expr::pow(e->a, e->ipow - 1)),
                        differentiate(e->a, var, index0));
  }
  throw std::logic_error("unreachable");
}

bool is_constant(const ExprPtr& e, double* value) {
  if (e->kind != ExprKind::Const) return false;
  if (value) *value = e->value;
  return true;
}

ExprPtr fold(const ExprPtr& e) {
  using K = ExprKind;
  if (!e->a) return e;
  ExprPtr a = fold(e->a);
  ExprPtr b = e->b ? fold(e->b) : nullptr;
  double ca = 0.0, cb = 0.0;
  const bool ka = is_constant(a, &ca);
  const bool kb = b && is_constant(b, &cb);
  switch (e->kind) {
    case K::Add:
      if (ka && kb) return Expr::constant(ca + cb);
      if (ka && ca == 0.0) return b;
      if (kb && cb == 0.0) return a;
      break;
    case K::Sub:
      if (ka && kb) return Expr::constant(ca - cb);
      if (kb && cb == 0.0) return a;
      if (ka && ca == 0.0) return fold(Expr::make(K::Neg, b));
      break;
    case K::Mul:
      if (ka && kb) return Expr::constant(ca * cb);
      if ((ka && ca == 0.0) || (kb && cb == 0.0)) return Expr::constant(0.0);
      if (ka && ca == 1.0) return b;
      if (kb && cb == 1.0) return a;
      break;
    case K::Div:
      if (kb && cb == 0.0) throw std::domain_error("constant division by zero");
      if (ka && kb) return Expr::constant(ca / cb);
      if (ka && ca == 0.0) return Expr::constant(0.0);
      if (kb && cb == 1.0) return a;
      break;
    case K::Neg:
      if (ka) return Expr::constant(-ca);
      break;
    case K::Sin:
      if (ka) return Expr::constant(std::sin(ca));
      break;
    case K::Cos:
      if (ka) return Expr::constant(std::cos(ca));
      break;
    case K::Exp:
      if (ka) return Expr::constant(std::exp(ca));
      break;
    case K::Pow:
      if (e->ipow == 0) return Expr::constant(1.0);
      if (ka) return Expr::constant(std::pow(ca, (double)e->ipow));
      if (e->ipow == 1) return a;
      return Expr::pow(a, e->ipow);
    default: break;
  }
  return Expr::make(e->kind, a, b);
}

bool uses_kind(const ExprPtr& e, ExprKind k) {
  if (e->kind == k) return true;
  if (e->a && uses_kind(e->a, k)) return true;
  if (e->b && uses_kind(e->b, k)) return true;
  return false;
}

int max_var_index(const ExprPtr& e, ExprKind k) {
  int m = e->kind == k ? e->index : -1;
  if (e->a) m = std::max(m, max_var_index(e->a, k));
  if (e->b) m = std::max(m, max_var_index(e->b, k));
  return m;
}

bool is_affine(const ExprPtr& e) {
  // affine iff every first partial derivative folds to a constant
  for (ExprKind k : {ExprKind::VarX, ExprKind::VarXd, ExprKind::VarW}) {
    const int m = max_var_index(e, k);
    for (int i = 0; i <= m; ++i)
      if (!is_constant(fold(differentiate(e, k, i)))) return false;
  }
  if (uses_kind(e, ExprKind::VarT) && !is_constant(fold(differentiate(e, ExprKind::VarT, 0))))
    return false;
  return true;
}

std::string to_string(const ExprPtr& e) {
  using K = ExprKind;
  std::ostringstream os;
  switch (e->kind) {
    case K::Const: os << e->value; break;
    case K::VarX: os << "x" << (e->index + 1); break;
    case K::VarXd: os << "xd" << (e->index + 1); break;
    case K::VarW: os << "w" << (e->index + 1); break;
    case K::VarT: os << "t"; break;
    case K::Add: os << "(" << to_string(e->a) << " + " << to_string(e->b) << ")"; break;
    case K::Sub: os << "(" << to_string(e->a) << " - " << to_string(e->b) << ")"; break;
    case K::Mul: os << "(" << to_string(e->a) << "*" << to_string(e->b) << ")"; break;
    case K::Div: os << "(" << to_string(e->a) << "/" << to_string(e->b) << ")"; break;
    case K::Neg: os << "(-" << to_string(e->a) << ")"; break;
    case K::Sin: os << "sin(" << to_string(e->a) << ")"; break;
    case K::Cos: os << "cos(" << to_string(e->a) << ")"; break;
    case K::Exp: os << "exp(" << to_string(e->a) << ")"; break;
    case K::Pow: os << to_string(e->a) << "^" << e->ipow; break;
  }
  return os.str();
}

namespace {

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  ExprPtr parse() {
    ExprPtr e = expression();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    return e;
  }

 private:
  const std::string& s_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("expression parse error at offset " + std::to_string(pos_) +
                                " in '" + s_ + "': " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  ExprPtr expression() {
    ExprPtr e = term();
    for (;;) {
      if (eat('+')) e = Expr::make(ExprKind::Add, e, term());
      else if (eat('-')) e = Expr::make(ExprKind::Sub, e, term());
      else return e;
    }
  }

  ExprPtr term() {
    ExprPtr e = unary();
    for (;;) {
      if (eat('*')) e = Expr::make(ExprKind::Mul, e, unary());
      else if (eat('/')) e = Expr::make(ExprKind::Div, e, unary());
      else return e;
    }
  }

  ExprPtr unary() {
    if (eat('-')) return Expr::make(ExprKind::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }

  ExprPtr power() {
    ExprPtr base = atom();
    if (eat('^')) {
      skip_ws();
      bool neg = eat('-');
      size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_])) ++pos_;
      if (pos_ == start) fail("integer exponent expected after '^'");
      long long n = std::stoll(s_.substr(start, pos_ - start));
      return Expr::pow(base, neg ? -n : n);
    }
    return base;
  }

  ExprPtr atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = expression();
      if (!eat(')')) fail("')' expected");
      return e;
    }
    if (std::isdigit((unsigned char)c) || c == '.') return number();
    if (std::isalpha((unsigned char)c)) return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  ExprPtr number() {
    size_t end = pos_;
    while (end < s_.size() &&
           (std::isdigit((unsigned char)s_[end]) || s_[end] == '.' || s_[end] == 'e' ||
            s_[end] == 'E' ||
            ((s_[end] == '+' || s_[end] == '-') && end > pos_ &&
             (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
      ++end;
    size_t used = 0;
    double v;
    try {
      v = std::stod(s_.substr(pos_, end - pos_), &used);
    } catch (const std::exception&) {
      fail("bad numeric literal");
    }
    pos_ += used;
    return Expr::constant(v);
  }

  ExprPtr identifier() {
    size_t end = pos_;
    while (end < s_.size() && (std::isalnum((unsigned char)s_[end]) || s_[end] == '_')) ++end;
    const std::string name = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (name == "sin" || name == "cos" || name == "exp") {
      if (!eat('(')) fail("'(' expected after " + name);
      ExprPtr arg = expression();
      if (!eat(')')) fail("')' expected");
      if (name == "sin") return Expr::make(ExprKind::Sin, arg);
      if (name == "cos") return Expr::make(ExprKind::Cos, arg);
      return Expr::make(ExprKind::Exp, arg);
    }
    if (name == "t") return Expr::var(ExprKind::VarT, 0);
    if (name == "pi") return Expr::constant(M_PI);
    auto indexed = [&](const std::string& prefix, ExprKind kind) -> ExprPtr {
      const std::string digits = name.substr(prefix.size());
      if (digits.empty()) return nullptr;
      for (char d : digits)
        if (!std::isdigit((unsigned char)d)) return nullptr;
      const int idx = std::stoi(digits);
      if (idx < 1) return nullptr;
      return Expr::var(kind, idx - 1);
    };
    if (name.rfind("xd", 0) == 0)
      if (auto e = indexed("xd", ExprKind::VarXd)) return e;
    if (name.rfind("x", 0) == 0)
      if (auto e = indexed("x", ExprKind::VarX)) return e;
    if (name.rfind("w", 0) == 0)
      if (auto e = indexed("w", ExprKind::VarW)) return e;
    fail("unknown identifier '" + name + "'");
  }
};

}  // namespace

ExprPtr parse_expression(const std::string& text) { return Parser(text).parse(); }

}  // namespace dhs
