"""A tiny arithmetic expression language for scene files.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Expressions compile to a small tuple AST that can be evaluated on numpy
arrays and differentiated symbolically (used for the partials of a custom
warping function).  ``harm(l, m)`` denotes an unnormalized real spherical
harmonic of degree ``l <= 2`` in the Cartesian variables ``x, y, z``.
"""

import re

import numpy as np

from .errors import ConfigError

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|(\*\*|[-+*/^(),])|([A-Za-z_][A-Za-z_0-9]*))")

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
_CONSTS = {"pi": np.pi}


def _tokenize(text):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ConfigError(f"bad character in expression {text!r} at offset {pos}")
        num, op, name = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif op is not None:
            tokens.append(("op", "^" if op == "**" else op))
        else:
            tokens.append(("name", name))
        pos = m.end()
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        tok = self.take()
        if tok != ("op", op):
            raise ConfigError(f"expected {op!r} in expression {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ConfigError(f"trailing input in expression {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if self.peek() == ("op", "("):
                self.take()
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if val not in _FUNCS and val != "harm":
                    raise ConfigError(f"unknown function {val!r}")
                return ("call", val, tuple(args))
            if val in _CONSTS:
                return ("num", _CONSTS[val])
            return ("var", val)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ConfigError(f"unexpected token {val!r} in expression {self.text!r}")


def _harm(l, m, env):
    x, y, z = env["x"], env["y"], env["z"]
    table = {
        (0, 0): lambda: np.ones_like(np.asarray(z, dtype=float)),
        (1, -1): lambda: y,
        (1, 0): lambda: z,
        (1, 1): lambda: x,
        (2, -2): lambda: x * y,
        (2, -1): lambda: y * z,
        (2, 0): lambda: 0.5 * (3.0 * z * z - 1.0),
        (2, 1): lambda: x * z,
        (2, 2): lambda: x * x - y * y,
    }
    try:
        return table[(int(l), int(m))]()
    except KeyError:
        raise ConfigError(f"harm({l}, {m}) not supported (degree <= 2 only)") from None


def _eval(node, env):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        try:
            return env[node[1]]
        except KeyError:
            raise ConfigError(f"unbound variable {node[1]!r}") from None
    if kind == "neg":
        return -_eval(node[1], env)
    if kind == "call":
        if node[1] == "harm":
            l, m = (_eval(a, env) for a in node[2])
            return _harm(l, m, env)
        return _FUNCS[node[1]](_eval(node[2][0], env))
    a, b = _eval(node[1], env), _eval(node[2], env)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "div":
        return a / b
    if kind == "pow":
        return np.power(a, b)
    raise AssertionError(kind)


# --- symbolic differentiation with light constant folding -----------------

def _num(node):
    return node[1] if node[0] == "num" else None


def _add(a, b):
    if _num(a) == 0.0:
        return b
    if _num(b) == 0.0:
        return a
    if _num(a) is not None and _num(b) is not None:
        return ("num", a[1] + b[1])
    return ("add", a, b)


def _sub(a, b):
    if _num(b) == 0.0:
        return a
    if _num(a) is not None and _num(b) is not None:
        return ("num", a[1] - b[1])
    if _num(a) == 0.0:
        return _neg(b)
    return ("sub", a, b)


def _neg(a):
    if _num(a) is not None:
        return ("num", -a[1])
    return ("neg", a)


def _mul(a, b):
    if _num(a) == 0.0 or _num(b) == 0.0:
        return ("num", 0.0)
    if _num(a) == 1.0:
        return b
    if _num(b) == 1.0:
        return a
    if _num(a) is not None and _num(b) is not None:
        return ("num", a[1] * b[1])
    return ("mul", a, b)


def _div(a, b):
    if _num(a) == 0.0:
        return ("num", 0.0)
    if _num(b) == 1.0:
        return a
    return ("div", a, b)


def _depends(node, var):
    kind = node[0]
    if kind == "num":
        return False
    if kind == "var":
        return node[1] == var
    if kind == "call":
        if node[1] == "harm":
            return var in ("x", "y", "z")
        return any(_depends(a, var) for a in node[2])
    return any(_depends(a, var) for a in node[1:])


def _diff(node, var):
    kind = node[0]
    if not _depends(node, var):
        return ("num", 0.0)
    if kind == "var":
        return ("num", 1.0)
    if kind == "neg":
        return _neg(_diff(node[1], var))
    if kind == "add":
        return _add(_diff(node[1], var), _diff(node[2], var))
    if kind == "sub":
        return _sub(_diff(node[1], var), _diff(node[2], var))
    if kind == "mul":
        a, b = node[1], node[2]
        return _add(_mul(_diff(a, var), b), _mul(a, _diff(b, var)))
    if kind == "div":
        a, b = node[1], node[2]
        return _div(_sub(_mul(_diff(a, var), b), _mul(a, _diff(b, var))), ("pow", b, ("num", 2.0)))
    if kind == "pow":
        a, b = node[1], node[2]
        if not _depends(b, var):
            expo = _sub(b, ("num", 1.0))
            return _mul(_mul(b, ("pow", a, expo)), _diff(a, var))
        # d(a^b) = a^b (b' log a + b a'/a)
        return _mul(node, _add(_mul(_diff(b, var), ("call", "log", (a,))),
                               _div(_mul(b, _diff(a, var)), a)))
    if kind == "call":
        name = node[1]
        if name == "harm":
            raise ConfigError("harm() cannot be differentiated symbolically")
        a = node[2][0]
        da = _diff(a, var)
        outer = {
            "sin": lambda: ("call", "cos", (a,)),
            "cos": lambda: _neg(("call", "sin", (a,))),
            "tan": lambda: _div(("num", 1.0), ("pow", ("call", "cos", (a,)), ("num", 2.0))),
            "exp": lambda: node,
            "log": lambda: _div(("num", 1.0), a),
            "sqrt": lambda: _div(("num", 0.5), node),
        }[name]()
        return _mul(outer, da)
    raise AssertionError(kind)


def _unparse(node):
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind == "var":
        return node[1]
    if kind == "neg":
        return f"(-{_unparse(node[1])})"
    if kind == "call":
        return f"{node[1]}({', '.join(_unparse(a) for a in node[2])})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[kind]
    return f"({_unparse(node[1])} {sym} {_unparse(node[2])})"


class Expr:
    """A parsed expression; callable with keyword variable bindings."""

    def __init__(self, source, _ast=None):
        if _ast is None:
            if not isinstance(source, str):
                source = repr(float(source))
            _ast = _Parser(source).parse()
        self.source = source
        self._ast = _ast

    def __call__(self, **env):
        out = _eval(self._ast, env)
        shape = np.broadcast(*[np.asarray(v) for v in env.values()]).shape if env else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    def diff(self, var):
        return Expr(None, _diff(self._ast, var)).named()

    def named(self):
        self.source = _unparse(self._ast)
        return self

    def depends_on(self, var):
        return _depends(self._ast, var)

    @property
    def variables(self):
        found = set()

        def walk(node):
            if node[0] == "var":
                found.add(node[1])
            elif node[0] == "call":
                if node[1] == "harm":
                    found.update("xyz")
                for a in node[2]:
                    walk(a)
            elif node[0] != "num":
                for a in node[1:]:
                    walk(a)

        walk(self._ast)
        return found

    def __repr__(self):
        return f"Expr({self.source!r})"


def parse(text):
    return Expr(text)
