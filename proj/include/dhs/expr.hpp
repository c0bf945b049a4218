#ifndef DHS_EXPR_HPP_
#define DHS_EXPR_HPP_

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhs/interval.hpp"

namespace dhs {

/* Expression AST for the extra (beyond A x + B xd + C w) terms of a mode's
 * dynamics. Variables: x<i>, xd<i> (delayed state), w<j>, t, 1-based in the
 * source text. Supports +, -, *, /, ^ (integer exponent), sin, cos, exp. */

enum class ExprKind { Const, VarX, VarXd, VarW, VarT, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Pow };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind;
  double value = 0.0;   // Const
  int index = -1;       // Var*: 0-based component
  long long ipow = 0;   // Pow exponent
  ExprPtr a, b;

  static ExprPtr constant(double v);
  static ExprPtr var(ExprKind k, int index0);
  static ExprPtr make(ExprKind k, ExprPtr a, ExprPtr b = nullptr);
  static ExprPtr pow(ExprPtr a, long long n);
};

struct EvalContext {
  const double* x = nullptr;
  const double* xd = nullptr;
  const double* w = nullptr;
  int nx = 0, nw = 0;
  double t = 0.0;
};

struct IntervalContext {
  const Interval* x = nullptr;
  const Interval* xd = nullptr;
  const Interval* w = nullptr;
  int nx = 0, nw = 0;
  Interval t{0.0};
};

double eval(const ExprPtr& e, const EvalContext& ctx);
Interval eval_interval(const ExprPtr& e, const IntervalContext& ctx);

/* d(e)/d(var), var identified by kind in {VarX, VarXd, VarW, VarT} and index. */
ExprPtr differentiate(const ExprPtr& e, ExprKind var, int index0);

/* Algebraic constant folding; identities like 0*e, e+0, e^1 collapse. */
ExprPtr fold(const ExprPtr& e);

bool is_constant(const ExprPtr& e, double* value = nullptr);
bool uses_kind(const ExprPtr& e, ExprKind k);
/* True when e is affine in x/xd/w/t (all second partials vanish). */
bool is_affine(const ExprPtr& e);
int max_var_index(const ExprPtr& e, ExprKind k);  // -1 when unused

std::string to_string(const ExprPtr& e);

/* Parses infix expressions, e.g. "0.2*xd1*(1+x2) - x1^2/100".
 * Throws std::invalid_argument with a position diagnostic on bad input. */
ExprPtr parse_expression(const std::string& text);

}  // namespace dhs

#endif
