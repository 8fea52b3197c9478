"""A minimal safe expression grammar for inline problem definitions.

Accepted: numeric literals, the constant ``pi``, one free variable,
``sin``/``cos``, arithmetic ``+ - * /`` (division by constants only),
integer powers and unary minus.  Everything else is rejected with a
message naming the offending construct.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np


class ExpressionError(ValueError):
    pass


_ALLOWED_CALLS = {"sin": np.sin, "cos": np.cos}


def parse_expression(text: str, var: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``text`` into a vectorized function of the named variable."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"invalid expression {text!r}: {exc.msg}") from None
    _validate(tree.body, var, text)
    code = compile(tree, filename="<expression>", mode="eval")
    env = {"sin": np.sin, "cos": np.cos, "pi": np.pi, "__builtins__": {}}

    def fn(x):
        x = np.asarray(x, dtype=float)
        result = eval(code, env, {var: x})  # noqa: S307 - AST-whitelisted above
        return np.broadcast_to(np.asarray(result, dtype=float), x.shape).copy()

    return fn


def is_constant_one(text: str) -> bool:
    """Whether the expression is literally the constant 1 (additive noise)."""
    try:
        return float(text.strip()) == 1.0
    except ValueError:
        return False


def _validate(node: ast.AST, var: str, text: str) -> None:
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric constant {node.value!r} in {text!r}")
        return
    if isinstance(node, ast.Name):
        if node.id not in (var, "pi"):
            raise ExpressionError(f"unknown name {node.id!r} in {text!r} (variable is {var!r})")
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _validate(node.operand, var, text)
        return
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, (ast.Add, ast.Sub, ast.Mult)):
            _validate(node.left, var, text)
            _validate(node.right, var, text)
            return
        if isinstance(node.op, ast.Div):
            _validate(node.left, var, text)
            if not _is_constant(node.right):
                raise ExpressionError(f"division only by constants in {text!r}")
            return
        if isinstance(node.op, ast.Pow):
            _validate(node.left, var, text)
            if not (
                isinstance(node.right, ast.Constant)
                and isinstance(node.right.value, int)
                and node.right.value >= 0
            ):
                raise ExpressionError(f"powers must be nonnegative integer constants in {text!r}")
            return
        raise ExpressionError(f"operator {type(node.op).__name__} not allowed in {text!r}")
    if isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_CALLS):
            raise ExpressionError(f"only sin and cos may be called in {text!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument in {text!r}")
        _validate(node.args[0], var, text)
        return
    raise ExpressionError(f"construct {type(node).__name__} not allowed in {text!r}")


def _is_constant(node: ast.AST) -> bool:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return True
    if isinstance(node, ast.Name) and node.id == "pi":
        return True
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _is_constant(node.operand)
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
        return _is_constant(node.left) and _is_constant(node.right)
    return False
