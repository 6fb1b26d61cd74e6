"""Expression kernel: parse, print, differentiate, simplify, evaluate, probe.

Expressions are sympy trees. The grammar, the printer, numeric evaluation and
the probing equality oracle live here; everything else in the package only
talks to expressions through these functions.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np
import sympy

Expr = sympy.Expr

HBAR = sympy.Symbol("hbar")
RESERVED = frozenset({"hbar", "i", "pi"})

FUNCTIONS = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tan": sympy.tan,
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
    "sinh": sympy.sinh,
    "cosh": sympy.cosh,
    # needed to write closed-form actions such as the oscillator's S(x)
    "asin": sympy.asin,
}

REL_TOL = 1e-9
PROBE_POINTS = 25


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ArithmeticError):
    pass


class ProbeError(RuntimeError):
    pass


def symbol(name: str) -> sympy.Symbol:
    if name == "i":
        raise ValueError("'i' is the imaginary unit, not a symbol")
    return HBAR if name == "hbar" else sympy.Symbol(name)


def as_expr(value) -> Expr:
    """Coerce strings, numbers and expressions to an expression."""
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, float):
        return sympy.Rational(repr(value))
    return sympy.sympify(value)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            offset = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[offset]!r}", offset)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind != "op":
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", off)

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            left = left + right if op == "+" else left - right
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.factor()
            left = left * right if op == "*" else left / right
        return left

    def factor(self) -> Expr:
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return -self.factor()
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return base ** self.exponent()
        return base

    def exponent(self) -> int:
        kind, val, off = self.peek()
        paren = kind == "op" and val == "("
        if paren:
            self.take()
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.take()
            sign = -1
        kind, val, off = self.take()
        if kind != "num" or not val.isdigit():
            raise ParseError("non-integer exponent", off)
        if paren:
            self.expect(")")
        return sign * int(val)

    def base(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return sympy.Rational(val)
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[val](arg)
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument", off)
            if val == "i":
                return sympy.I
            if val == "pi":
                return sympy.pi
            return symbol(val)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {val or 'end of input'!r}", off)


def parse(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r}", off)
    return e


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def to_text(e: Expr) -> str:
    """Render in the input grammar; parse(to_text(e)) equals e up to simplify."""
    return _show(sympy.sympify(e))[0]


def _wrap(pair, prec):
    s, p = pair
    return f"({s})" if p < prec else s


def _show(e):
    if e is sympy.I:
        return "i", _PREC_ATOM
    if e is sympy.pi:
        return "pi", _PREC_ATOM
    if e is sympy.E:
        return "exp(1)", _PREC_ATOM
    if e.is_Integer:
        return (str(e), _PREC_ATOM) if e >= 0 else (str(e), _PREC_NEG)
    if e.is_Rational:
        s = f"{e.p}/{e.q}"
        return (s, _PREC_MUL) if e > 0 else (s, _PREC_NEG)
    if e.is_Float:
        return repr(float(e)), _PREC_ATOM
    if e.is_Symbol:
        return e.name, _PREC_ATOM
    if e.is_Add:
        terms = e.as_ordered_terms()
        out = _show(terms[0])[0]
        for t in terms[1:]:
            if t.could_extract_minus_sign():
                out += " - " + _wrap(_show(-t), _PREC_MUL)
            else:
                out += " + " + _wrap(_show(t), _PREC_ADD + 1)
        return out, _PREC_ADD
    if e.is_Mul:
        if e.could_extract_minus_sign():
            return "-" + _wrap(_show(-e), _PREC_MUL), _PREC_NEG
        return _show_mul(e)
    if e.is_Pow:
        b, x = e.args
        if x.is_Integer:
            if x < 0:
                return _show_mul(e)
            return f"{_wrap(_show(b), _PREC_ATOM)}^{x}", _PREC_POW
        if x.is_Rational:
            if x < 0:
                return _show_mul(e)
            if x.q == 2:
                s = f"sqrt({_show(b)[0]})"
                return (s, _PREC_ATOM) if x.p == 1 else (f"{s}^{x.p}", _PREC_POW)
        return f"exp(({_show(x)[0]})*log({_show(b)[0]}))", _PREC_ATOM
    if isinstance(e, sympy.Function) and type(e).__name__ in FUNCTIONS:
        return f"{type(e).__name__}({_show(e.args[0])[0]})", _PREC_ATOM
    if isinstance(e, sympy.exp):
        return f"exp({_show(e.args[0])[0]})", _PREC_ATOM
    # undefined functions and derivatives only appear in structural analysis
    return str(e), _PREC_ATOM


def _show_mul(e):
    num, den = [], []
    coeff = sympy.Integer(1)
    for f in sorted(sympy.Mul.make_args(e), key=sympy.default_sort_key):
        if f.is_Rational:
            coeff *= f
        elif f.is_Pow and f.exp.is_number and f.exp.is_negative:
            den.append(f.base ** (-f.exp))
        else:
            num.append(f)
    if coeff.q != 1:
        den.insert(0, sympy.Integer(coeff.q))
    if coeff.p != 1 or not num:
        num.insert(0, sympy.Integer(coeff.p))
    top = "*".join(_wrap(_show(f), _PREC_MUL + (0 if f.is_Pow or f.is_Mul else 1)) for f in num)
    if len(num) == 1:
        top = _wrap(_show(num[0]), _PREC_MUL)
    if not den:
        return top, _PREC_MUL
    if len(den) == 1:
        bottom = _wrap(_show(den[0]), _PREC_POW)
    else:
        bottom = "(" + "*".join(_wrap(_show(f), _PREC_MUL + 1) for f in den) + ")"
    return f"{top}/{bottom}", _PREC_MUL


# ---------------------------------------------------------------------------
# calculus and simplification


def differentiate(e: Expr, s) -> Expr:
    sym = symbol(s) if isinstance(s, str) else s
    return sympy.diff(e, sym)


def simplify(e: Expr) -> Expr:
    """Rational normal form over the present generators; no trig rewriting."""
    e = sympy.sympify(e)
    if e.is_Atom:
        return e
    try:
        # cancel treats exp(-u) as 1/exp(u); expanding afterwards merges the
        # exponentials again so large arguments do not overflow
        return sympy.expand(sympy.cancel(sympy.expand(e)))
    except sympy.PolynomialError:
        return sympy.expand(e)


def free_names(e: Expr) -> set[str]:
    return {s.name for s in sympy.sympify(e).free_symbols}


# ---------------------------------------------------------------------------
# numeric evaluation

Number = Union[complex, float, np.ndarray]


def _real_nonpositive(x, strict: bool):
    x = np.asarray(x)
    real = np.abs(x.imag) == 0
    bad = x.real <= 0 if strict else x.real < 0
    return bool(np.any(real & bad))


def _ev(e, env):
    if e.is_Symbol:
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"unassigned symbol {e.name!r}") from None
    if e is sympy.I:
        return 1j
    if e.is_Number or e.is_NumberSymbol:
        return complex(e)
    if e.is_Add:
        total = 0j
        for a in e.args:
            total = total + _ev(a, env)
        return total
    if e.is_Mul:
        prod = 1 + 0j
        for a in e.args:
            prod = prod * _ev(a, env)
        return prod
    if e.is_Pow:
        b = np.asarray(_ev(e.base, env), dtype=complex)
        x = e.exp
        if x.is_Integer:
            k = int(x)
            if k < 0 and np.any(b == 0):
                raise EvaluationError("division by zero")
            return b ** k if k >= 0 else 1.0 / b ** (-k)
        if x.is_Rational:
            if _real_nonpositive(b, strict=x < 0):
                raise EvaluationError(f"fractional power of non-positive value in {e}")
            return b ** float(x)
        return np.exp(np.asarray(_ev(x, env), dtype=complex) * np.log(b))
    name = type(e).__name__
    if name in FUNCTIONS or isinstance(e, sympy.exp):
        arg = np.asarray(_ev(e.args[0], env), dtype=complex)
        if name == "log":
            if _real_nonpositive(arg, strict=True):
                raise EvaluationError("log of non-positive value")
            return np.log(arg)
        if name == "asin":
            return np.arcsin(arg)
        return getattr(np, name)(arg)
    raise EvaluationError(f"cannot evaluate {e}")


def evaluate(e: Expr, assignment: Mapping[str, Number], hbar: float | None = 1.0):
    """Evaluate numerically. Array values broadcast; scalars give a complex.

    ``hbar`` supplies the default for the ħ symbol when the assignment lacks it.
    """
    env = dict(assignment)
    if hbar is not None:
        env.setdefault("hbar", hbar)
    with np.errstate(all="ignore"):
        value = _ev(sympy.sympify(e), env)
    arr = np.asarray(value, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError("non-finite value")
    return complex(arr) if arr.ndim == 0 else arr


# ---------------------------------------------------------------------------
# probing


class XorShift64Star:
    """xorshift64* generator; uniform() uses the top 53 bits."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int = 42):
        self.state = (seed & self.MASK) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & self.MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & self.MASK

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0 ** -53)


@dataclass(frozen=True)
class ProbeDomain:
    intervals: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    hbar: float = 1.0
    points: int = PROBE_POINTS
    retries: int = 50
    seed: int = 42

    def __post_init__(self):
        for name, (lo, hi) in self.intervals.items():
            if not lo < hi:
                raise ValueError(f"empty probe interval for {name!r}: [{lo}, {hi}]")

    def with_intervals(self, **extra) -> "ProbeDomain":
        merged = {**self.intervals, **extra}
        return ProbeDomain(merged, self.hbar, self.points, self.retries, self.seed)

    def sample(self, rng: XorShift64Star, names) -> dict[str, float]:
        point = {}
        for name in sorted(names):
            lo, hi = self.intervals[name]
            point[name] = rng.uniform(lo, hi)
        point.setdefault("hbar", self.hbar)
        return point

    def covers(self, names) -> set[str]:
        return {n for n in names if n not in self.intervals and n != "hbar"}


def probe_points(domain: ProbeDomain, exprs, names=None):
    """Yield ``domain.points`` assignments at which every expression evaluates.

    Each yielded item is ``(assignment, values)``.
    """
    exprs = [sympy.sympify(e) for e in exprs]
    if names is None:
        names = set().union(*(free_names(e) for e in exprs)) if exprs else set()
    names = set(names) - ({"hbar"} - set(domain.intervals))
    missing = domain.covers(names)
    if missing:
        raise ProbeError(f"no probe interval for {sorted(missing)}")
    rng = XorShift64Star(domain.seed)
    for _ in range(domain.points):
        for _attempt in range(domain.retries):
            point = domain.sample(rng, names)
            try:
                values = [evaluate(e, point, hbar=domain.hbar) for e in exprs]
            except EvaluationError:
                continue
            yield point, values
            break
        else:
            raise ProbeError(f"evaluation failed at all {domain.retries} attempts")


def close(a: complex, b: complex, rel: float = REL_TOL) -> bool:
    return abs(a - b) <= rel * (1 + max(abs(a), abs(b)))


def probably_equal(a: Expr, b: Expr, domain: ProbeDomain | None = None) -> bool:
    a, b = as_expr(a), as_expr(b)
    sa, sb = simplify(a), simplify(b)
    if sa == sb:
        return True
    domain = domain or ProbeDomain()
    return all(close(va, vb) for _, (va, vb) in probe_points(domain, [a, b]))


def probably_zero(e: Expr, domain: ProbeDomain | None = None) -> bool:
    return probably_equal(e, sympy.Integer(0), domain)
