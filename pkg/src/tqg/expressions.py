"""Tiny expression language for initial conditions and static fields.

Expressions are strings in x and y evaluated with numpy semantics, e.g.
"sin(2*pi*y) - 1".  Only a whitelist of math names is available.
"""

from __future__ import annotations

import numpy as np

_ENV = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
    "abs": np.abs,
    "pi": np.pi,
}


def compile_expression(expr: str):
    """Compile an expression string into a vectorised f(x, y)."""
    code = compile(expr, "<field expression>", "eval")
    for name in code.co_names:
        if name not in _ENV and name not in ("x", "y"):
            raise ValueError(f"unknown name {name!r} in field expression {expr!r}")

    def func(x, y):
        out = eval(code, {"__builtins__": {}}, {**_ENV, "x": x, "y": y})
        return np.asarray(out, dtype=float)

    return func


#: named field presets: (buoyancy, potential vorticity, bathymetry, rotation)
PRESETS = {
    "canonical": {
        "buoyancy": "sin(2*pi*y) - 1",
        "pv": (
            "sin(8*pi*x)*sin(8*pi*y) + 0.4*cos(6*pi*x)*cos(6*pi*y)"
            " + 0.3*cos(10*pi*x)*cos(4*pi*y) + 0.02*sin(2*pi*y) + 0.02*sin(2*pi*x)"
        ),
        "bathymetry": "cos(2*pi*x) + 0.5*cos(4*pi*x) + 0.5*cos(6*pi*x)",
        "rotation": "0.4*cos(4*pi*x)*cos(4*pi*y)",
    },
    "rest": {
        "buoyancy": "0*x",
        "pv": "0*x",
        "bathymetry": "0*x",
        "rotation": "0*x",
    },
}
