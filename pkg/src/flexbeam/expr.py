"""Closed-form expressions in ``x`` for data fields.

Grammar: numbers, ``x``, ``pi``, ``e``, ``+ - * / **``, parentheses,
``sin cos tan exp log sqrt abs tanh cosh sinh`` and
``piecewise(cond1, val1, cond2, val2, ..., default)`` with comparisons
``< <= > >=`` and ``&`` / ``|`` in the conditions.  Parsed through Python's
``ast`` with a whitelist, then handed to sympy for derivatives.
"""

from __future__ import annotations

import ast
import operator

import numpy as np
import sympy

X = sympy.Symbol("x", real=True)

_FUNCS = {
    "sin": sympy.sin, "cos": sympy.cos, "tan": sympy.tan, "exp": sympy.exp,
    "log": sympy.log, "sqrt": sympy.sqrt, "abs": sympy.Abs, "tanh": sympy.tanh,
    "cosh": sympy.cosh, "sinh": sympy.sinh,
}
_CONSTS = {"x": X, "pi": sympy.pi, "e": sympy.E}
_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
    ast.BitAnd: sympy.And, ast.BitOr: sympy.Or,
}
_CMPOPS = {ast.Lt: sympy.Lt, ast.LtE: sympy.Le, ast.Gt: sympy.Gt, ast.GtE: sympy.Ge}


class ExpressionError(ValueError):
    pass


def _build(node):
    if isinstance(node, ast.Expression):
        return _build(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return sympy.nsimplify(node.value, rational=True) if isinstance(node.value, int) else sympy.Float(node.value)
    if isinstance(node, ast.Name):
        if node.id not in _CONSTS:
            raise ExpressionError(f"unknown name {node.id!r}")
        return _CONSTS[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _build(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_build(node.left), _build(node.right))
    if isinstance(node, ast.Compare):
        if len(node.ops) != 1 or type(node.ops[0]) not in _CMPOPS:
            raise ExpressionError("only single comparisons < <= > >= are allowed")
        return _CMPOPS[type(node.ops[0])](_build(node.left), _build(node.comparators[0]))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        args = [_build(a) for a in node.args]
        if name == "piecewise":
            if len(args) < 3 or len(args) % 2 == 0:
                raise ExpressionError("piecewise(cond, value, ..., default) needs an odd number >= 3 of arguments")
            pairs = [(args[k + 1], args[k]) for k in range(0, len(args) - 1, 2)]
            return sympy.Piecewise(*pairs, (args[-1], True))
        if name not in _FUNCS:
            raise ExpressionError(f"unknown function {name!r}")
        if len(args) != 1:
            raise ExpressionError(f"{name} takes one argument")
        return _FUNCS[name](args[0])
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse(text: str) -> sympy.Expr:
    """Parse ``text`` into a sympy expression in ``x``."""
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from exc
    return _build(tree)


def to_function(expr: sympy.Expr):
    """Vectorised numpy evaluator returning float arrays shaped like ``x``."""
    f = sympy.lambdify(X, expr, modules="numpy")

    def call(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(f(x), dtype=float) + np.zeros_like(x)

    return call


def function_and_derivatives(text: str, order: int = 2):
    """Evaluators for the expression and its first ``order`` derivatives."""
    e = parse(text)
    return [to_function(sympy.diff(e, X, k) if k else e) for k in range(order + 1)]
