"""Whitelisted scalar expressions in x, y, t for custom potentials and data.

Accepted: numbers, the names ``x``, ``y``, ``t``, ``pi``, ``e``, the operators
``+ - * / **`` and the functions sin, cos, tanh, exp.  Derivatives are taken
symbolically so a parsed potential carries an exact gradient and Laplacian.
"""

from __future__ import annotations

import ast

import numpy as np
import sympy

from .potential import AnalyticPotential

__all__ = ["ExpressionError", "parse_expression", "compile_scalar", "potential_from_expression"]

FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "tanh": sympy.tanh, "exp": sympy.exp}
CONSTANTS = {"pi": sympy.pi, "e": sympy.E}
X, Y, T = sympy.symbols("x y t", real=True)
VARIABLES = {"x": X, "y": Y, "t": T}


class ExpressionError(ValueError):
    pass


def _build(node):
    if isinstance(node, ast.Expression):
        return _build(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return sympy.nsimplify(node.value) if isinstance(node.value, int) else sympy.Float(node.value)
    if isinstance(node, ast.Name):
        if node.id in VARIABLES:
            return VARIABLES[node.id]
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        val = _build(node.operand)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp):
        a, b = _build(node.left), _build(node.right)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            return a / b
        if isinstance(node.op, ast.Pow):
            return a**b
        raise ExpressionError(f"operator {type(node.op).__name__} is not allowed")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            name = getattr(node.func, "id", "?")
            raise ExpressionError(f"function {name!r} is not allowed; use one of {sorted(FUNCTIONS)}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        return FUNCTIONS[node.func.id](_build(node.args[0]))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_expression(text: str) -> sympy.Expr:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return _build(tree)


def compile_scalar(expr) -> callable:
    """Vectorised ``f(x, y, t)`` from a sympy expression or expression text."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    fn = sympy.lambdify((X, Y, T), expr, modules="numpy")

    def f(x, y, t=0.0):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.asarray(fn(x, y, t), dtype=float), x.shape)

    return f


def potential_from_expression(text: str) -> AnalyticPotential:
    expr = parse_expression(text)
    value = compile_scalar(expr)
    gx = compile_scalar(sympy.diff(expr, X))
    gy = compile_scalar(sympy.diff(expr, Y))
    lap = compile_scalar(sympy.diff(expr, X, 2) + sympy.diff(expr, Y, 2))
    return AnalyticPotential(
        value,
        lambda x, y, t: np.stack([gx(x, y, t), gy(x, y, t)], -1),
        lap,
        time_dependent=T in expr.free_symbols,
        name=text,
    )
