"""Linear-growth integrands f(x, A): catalog, expression parser, recession
limits, the S-transform, and numerical symmetric-quasiconvexity testing.

An integrand maps a point x and a symmetric matrix A to a scalar and is
expected to satisfy |f(x, A)| <= M (1 + |A|).  Recession behavior at
infinity is probed on a geometric ladder of scaling factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import GrowthViolationError, InputError, ParseError
from .fields import DisplacementField, Grid
from .symtensor import as_matrix, classify_dyad, sym_dyad

__all__ = [
    "Integrand",
    "RecessionEstimate",
    "parse_integrand",
    "recession",
    "transform_S",
    "cell_problem_min",
    "CellProblemResult",
    "dyad_segment_scan",
    "make_norm",
    "make_area",
    "make_linear",
    "make_quadratic",
    "make_neg_norm",
    "make_segment_violator",
    "builtin_integrand",
]


def _frob(A: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


@dataclass(frozen=True)
class Integrand:
    """Evaluator for f(x, A) with a declared linear-growth constant.

    fn is vectorized: A has shape (..., d, d), x has shape (..., d) or is
    None for x-independent integrands; the result has shape (...).
    """

    fn: Callable[[Optional[np.ndarray], np.ndarray], np.ndarray]
    growth_M: float
    grad_A: Optional[Callable[[Optional[np.ndarray], np.ndarray], np.ndarray]] = None
    x_dependent: bool = False
    name: str = ""
    growth_warning: bool = False

    def __call__(self, x, A) -> np.ndarray:
        return np.asarray(self.fn(x, np.asarray(A, dtype=float)), dtype=float)

    def at(self, x, A) -> float:
        """Scalar convenience wrapper."""
        return float(self(x, as_matrix(A)))


def sample_growth(fn, dim: int = 2, x_dependent: bool = False,
                  nsamples: int = 10_000, seed: int = 0) -> Tuple[float, bool]:
    """Estimate M with |f| <= M(1+|A|) on a randomized sample.

    Returns (M, warning) where warning flags apparent superlinear growth.
    This is a probabilistic check, not a certificate.
    """
    rng = np.random.default_rng(seed)
    scales = 10.0 ** rng.uniform(-1, 4, size=nsamples)
    B = rng.standard_normal((nsamples, dim, dim))
    A = 0.5 * (B + np.swapaxes(B, -1, -2)) * scales[:, None, None]
    x = rng.uniform(-1, 1, size=(nsamples, dim)) if x_dependent else None
    vals = np.asarray(fn(x, A), dtype=float)
    norms = _frob(A)
    ratios = np.abs(vals) / (1.0 + norms)
    M = float(ratios.max(initial=0.0))
    # superlinear growth shows as ratios drifting upward with |A|
    big = norms > 1e3
    small = norms < 1e1
    warning = bool(big.any() and small.any()
                   and ratios[big].max(initial=0.0) > 10.0 * max(ratios[small].max(initial=0.0), 1e-12))
    return max(M, 1e-12), warning


# ---------------------------------------------------------------------------
# Catalog


def make_norm(dim: int = 2) -> Integrand:
    def grad(x, A):
        n = _frob(A)[..., None, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(n > 0, A / np.where(n > 0, n, 1.0), 0.0)
        return g
    return Integrand(lambda x, A: _frob(A), growth_M=1.0, grad_A=grad, name="norm(A)")


def make_area(dim: int = 2) -> Integrand:
    def fn(x, A):
        return np.sqrt(1.0 + np.sum(A * A, axis=(-2, -1)))
    def grad(x, A):
        return A / fn(x, A)[..., None, None]
    return Integrand(fn, growth_M=math.sqrt(2.0), grad_A=grad, name="sqrt(1 + normsq(A))")


def make_linear(B0, c: float = 0.0) -> Integrand:
    B0 = as_matrix(B0)
    def fn(x, A):
        return np.sum(A * B0, axis=(-2, -1)) + c
    return Integrand(fn, growth_M=float(np.linalg.norm(B0)) + abs(c),
                     grad_A=lambda x, A: np.broadcast_to(B0, A.shape).copy(),
                     name="dot(A, B0) + c")


def make_quadratic(dim: int = 2) -> Integrand:
    # superlinear on purpose; carries the growth warning
    return Integrand(lambda x, A: np.sum(A * A, axis=(-2, -1)),
                     growth_M=1.0, grad_A=lambda x, A: 2.0 * A,
                     name="normsq(A)", growth_warning=True)


def make_neg_norm(dim: int = 2) -> Integrand:
    base = make_norm(dim)
    return Integrand(lambda x, A: -base.fn(x, A), growth_M=1.0,
                     grad_A=lambda x, A: -base.grad_A(x, A), name="-norm(A)")


def make_segment_violator(P=None) -> Integrand:
    """g(A) = (|A + P| + |A - P|)/2 - |A| with P = e1 (.) e2 by default.

    Nonnegative, bounded by |P|, recession 0, and not symmetric-quasiconvex:
    along the segment from -P to P it dips below its endpoint average, with
    gap |P| at the midpoint (1/sqrt(2) for the default P).
    """
    if P is None:
        P = sym_dyad(np.array([1.0, 0.0]), np.array([0.0, 1.0])).array
    P = as_matrix(P)
    def fn(x, A):
        return 0.5 * (_frob(A + P) + _frob(A - P)) - _frob(A)
    return Integrand(fn, growth_M=float(np.linalg.norm(P)) + 1e-12,
                     name="0.5*(norm(A + P) + norm(A - P)) - norm(A)")


_BUILTINS = {
    "norm": make_norm,
    "area": make_area,
    "quadratic": make_quadratic,
    "neg-norm": make_neg_norm,
    "segment-violator": make_segment_violator,
}


def builtin_integrand(name: str) -> Integrand:
    """Look up a catalog integrand by name (used by the CLI via '@name')."""
    key = name.lstrip("@")
    if key not in _BUILTINS:
        raise InputError(f"unknown builtin integrand '{name}'; "
                         f"choices: {sorted(_BUILTINS)}")
    return _BUILTINS[key]()


# ---------------------------------------------------------------------------
# Expression parser
#
# expr   := term (("+"|"-") term)*
# term   := factor (("*"|"/") factor)*
# factor := base ("^" number)?
# base   := number | "A" | "x" "[" index "]" | func "(" args ")" | "(" expr ")"
#
# Matrix-valued subexpressions are allowed only inside norm/normsq/tr/dot.

_FUNCS1 = {"norm", "normsq", "tr", "sqrt", "exp", "sin", "cos", "abs"}
_FUNCS2 = {"dot", "min", "max"}
_FUNCS = _FUNCS1 | _FUNCS2
_MATRIX_FUNCS = {"norm", "normsq", "tr", "dot"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, lparen, rparen, lbrack, rbrack, comma, end
    text: str
    pos: int


def _tokenize(src: str) -> List[_Tok]:
    toks = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            try:
                float(src[i:j])
            except ValueError:
                raise ParseError(f"malformed number '{src[i:j]}'", i)
            toks.append(_Tok("num", src[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("name", src[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            toks.append(_Tok("op", c, i))
        elif c == "(":
            toks.append(_Tok("lparen", c, i))
        elif c == ")":
            toks.append(_Tok("rparen", c, i))
        elif c == "[":
            toks.append(_Tok("lbrack", c, i))
        elif c == "]":
            toks.append(_Tok("rbrack", c, i))
        elif c == ",":
            toks.append(_Tok("comma", c, i))
        else:
            raise ParseError(f"unexpected character '{c}'", i)
        i += 1
    toks.append(_Tok("end", "", n))
    return toks


# AST nodes: ("num", v) ("A",) ("x", i) ("call", fname, [args])
# ("bin", op, l, r) ("pow", base, num) ("neg", e)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.k = 0

    def peek(self) -> _Tok:
        return self.toks[self.k]

    def next(self) -> _Tok:
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, kind: str, what: str) -> _Tok:
        t = self.next()
        if t.kind != kind:
            raise ParseError(f"expected {what}, found '{t.text or 'end of input'}'", t.pos)
        return t

    def parse(self):
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"trailing input '{t.text}'", t.pos)
        return e

    def expr(self):
        # leading unary minus on the first term
        if self.peek().kind == "op" and self.peek().text == "-":
            self.next()
            node = ("neg", self.term())
        else:
            node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            node = ("bin", op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.next()
            t = self.expect("num", "a numeric exponent")
            node = ("pow", node, float(t.text))
        return node

    def base(self):
        t = self.next()
        if t.kind == "num":
            return ("num", float(t.text))
        if t.kind == "lparen":
            e = self.expr()
            self.expect("rparen", "')'")
            return e
        if t.kind == "name":
            if t.text == "A":
                return ("A",)
            if t.text == "x":
                self.expect("lbrack", "'['")
                idx = self.expect("num", "an index")
                self.expect("rbrack", "']'")
                i = int(float(idx.text))
                if i != float(idx.text) or i < 0:
                    raise ParseError("index must be a nonnegative integer", idx.pos)
                return ("x", i)
            if t.text in _FUNCS:
                self.expect("lparen", "'('")
                args = [self.expr()]
                while self.peek().kind == "comma":
                    self.next()
                    args.append(self.expr())
                self.expect("rparen", "')'")
                want = 1 if t.text in _FUNCS1 else 2
                if len(args) != want:
                    raise ParseError(f"{t.text} takes {want} argument(s)", t.pos)
                return ("call", t.text, args)
            raise ParseError(f"unknown identifier '{t.text}'", t.pos)
        raise ParseError(f"unexpected '{t.text or 'end of input'}'", t.pos)


def _uses_x(node) -> bool:
    tag = node[0]
    if tag == "x":
        return True
    if tag == "bin":
        return _uses_x(node[2]) or _uses_x(node[3])
    if tag in ("neg",):
        return _uses_x(node[1])
    if tag == "pow":
        return _uses_x(node[1])
    if tag == "call":
        return any(_uses_x(a) for a in node[2])
    return False


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _pprint(node, parent_prec: int = 0) -> str:
    tag = node[0]
    if tag == "num":
        v = node[1]
        s = repr(v)
        return s[:-2] if s.endswith(".0") else s
    if tag == "A":
        return "A"
    if tag == "x":
        return f"x[{node[1]}]"
    if tag == "neg":
        inner = _pprint(node[1], 2)
        s = f"-{inner}"
        return f"({s})" if parent_prec > 1 else s
    if tag == "pow":
        return f"{_pprint(node[1], 3)}^{_pprint(('num', node[2]))}"
    if tag == "call":
        return f"{node[1]}({', '.join(_pprint(a) for a in node[2])})"
    _, op, l, r = node
    p = _PREC[op]
    # right operand needs parens at equal precedence for - and /
    s = f"{_pprint(l, p)} {op} {_pprint(r, p + 1)}"
    return f"({s})" if parent_prec > p else s


def _eval_node(node, x, A):
    """Returns ('s', array) or ('m', array); matrices only feed norm/normsq/tr/dot."""
    tag = node[0]
    if tag == "num":
        return ("s", np.asarray(node[1], dtype=float))
    if tag == "A":
        return ("m", A)
    if tag == "x":
        i = node[1]
        if x is None:
            raise InputError("integrand uses x but no point was supplied")
        if i >= x.shape[-1]:
            raise InputError(f"index x[{i}] out of range for dimension {x.shape[-1]}")
        return ("s", x[..., i])
    if tag == "neg":
        k, v = _eval_node(node[1], x, A)
        return (k, -v)
    if tag == "pow":
        k, v = _eval_node(node[1], x, A)
        if k != "s":
            raise InputError("exponentiation applies to scalars only")
        return ("s", v ** node[2])
    if tag == "call":
        fname, args = node[1], node[2]
        vals = [_eval_node(a, x, A) for a in args]
        if fname in _MATRIX_FUNCS:
            if fname == "dot":
                (k1, v1), (k2, v2) = vals
                if k1 != k2:
                    raise InputError("dot requires two arguments of the same kind")
                if k1 == "m":
                    return ("s", np.sum(v1 * v2, axis=(-2, -1)))
                return ("s", v1 * v2)
            (k, v) = vals[0]
            if k != "m":
                raise InputError(f"{fname} expects a matrix argument")
            if fname == "norm":
                return ("s", _frob(v))
            if fname == "normsq":
                return ("s", np.sum(v * v, axis=(-2, -1)))
            return ("s", np.trace(v, axis1=-2, axis2=-1))
        for k, _ in vals:
            if k != "s":
                raise InputError(f"{fname} expects scalar arguments; "
                                 "matrices may appear only inside norm/normsq/tr/dot")
        vs = [v for _, v in vals]
        if fname == "sqrt":
            return ("s", np.sqrt(vs[0]))
        if fname == "exp":
            return ("s", np.exp(vs[0]))
        if fname == "sin":
            return ("s", np.sin(vs[0]))
        if fname == "cos":
            return ("s", np.cos(vs[0]))
        if fname == "abs":
            return ("s", np.abs(vs[0]))
        if fname == "min":
            return ("s", np.minimum(*vs))
        return ("s", np.maximum(*vs))
    _, op, lnode, rnode = node
    (kl, vl), (kr, vr) = _eval_node(lnode, x, A), _eval_node(rnode, x, A)
    if op in "+-":
        if kl != kr:
            raise InputError("cannot add a matrix and a scalar")
        return (kl, vl + vr if op == "+" else vl - vr)
    if op == "*":
        if kl == "m" and kr == "m":
            raise InputError("matrix * matrix is not part of the grammar")
        kind = "m" if "m" in (kl, kr) else "s"
        if kl == "m":
            return ("m", vl * vr[..., None, None] if np.ndim(vr) else vl * vr)
        if kr == "m":
            return ("m", vr * vl[..., None, None] if np.ndim(vl) else vr * vl)
        return ("s", vl * vr)
    # division
    if kr == "m":
        raise InputError("cannot divide by a matrix")
    if kl == "m":
        return ("m", vl / (vr[..., None, None] if np.ndim(vr) else vr))
    return ("s", vl / vr)


def parse_integrand(expr: str, dim: int = 2) -> Integrand:
    """Compile an expression in the variables A (matrix) and x[i] (scalars).

    The top-level value must be scalar; a type error anywhere raises
    InputError, a syntax error raises ParseError with the position.
    """
    ast = _Parser(expr).parse()
    xdep = _uses_x(ast)

    def fn(x, A):
        A = np.asarray(A, dtype=float)
        xa = None if x is None else np.asarray(x, dtype=float)
        kind, val = _eval_node(ast, xa, A)
        if kind != "s":
            raise InputError("integrand must be scalar-valued; wrap matrices "
                             "in norm/normsq/tr/dot")
        return np.broadcast_to(val, A.shape[:-2]).astype(float)

    M, warn = sample_growth(fn, dim=dim, x_dependent=xdep)
    return Integrand(fn, growth_M=M, x_dependent=xdep,
                     name=_pprint(ast), growth_warning=warn)


def pretty_print(expr: str) -> str:
    """Canonical form of a parseable expression (fixed point of itself)."""
    return _pprint(_Parser(expr).parse())


# ---------------------------------------------------------------------------
# Recession functions


@dataclass(frozen=True)
class RecessionEstimate:
    value: float
    mode: str  # strong | upper_sharp | lower_flat
    t_max: float
    converged: bool
    spread: float


def default_schedule(t0: float = 4.0, ratio: float = 2.0, rungs: int = 20) -> np.ndarray:
    if ratio < 2.0:
        raise InputError("schedule ratio must be >= 2")
    return t0 * ratio ** np.arange(rungs)


def recession(f: Integrand, x, A, mode: str = "strong",
              schedule: Optional[Sequence[float]] = None,
              seed: int = 0, nperturb: int = 8) -> RecessionEstimate:
    """Estimate the positively 1-homogeneous limit of f(x, tA)/t.

    strong: Richardson-extrapolated limit along the ladder.
    upper_sharp / lower_flat: additionally sample perturbed arguments A' in
    a ball of radius (1+|A|)/sqrt(t) around A and track the running
    max / min over the tail of the ladder (limsup / liminf surrogates).
    """
    if mode not in ("strong", "upper_sharp", "lower_flat"):
        raise InputError(f"unknown recession mode '{mode}'")
    A = as_matrix(A)
    d = A.shape[0]
    nA = float(np.linalg.norm(A))
    ts = np.asarray(default_schedule() if schedule is None else list(schedule), float)
    if ts.size < 2 or np.any(np.diff(ts) <= 0) or np.any(ts[1:] / ts[:-1] < 2 - 1e-12):
        raise InputError("schedule must increase with ratio >= 2")
    if nA == 0.0:
        return RecessionEstimate(0.0, mode, float(ts[-1]), True, 0.0)

    xarr = None if x is None else np.asarray(x, dtype=float)
    tol = 1e-6 * (1.0 + nA)
    cap = 2.0 * f.growth_M * (1.0 + nA)
    rng = np.random.default_rng(seed)

    e_vals = []
    extrap = []
    converged = False
    spread = math.inf
    t_used = ts[0]
    rung_env = []  # per-rung max (or min) over perturbations, for sharp modes
    for i, t in enumerate(ts):
        e = float(f(xarr, t * A)) / t
        if not math.isfinite(e) or abs(e) > cap:
            raise GrowthViolationError(
                f"f(x, tA)/t = {e:.6g} escaped the growth envelope at t = {t:.3g}")
        e_vals.append(e)
        t_used = t
        if mode != "strong":
            delta = (1.0 + nA) / math.sqrt(t)
            B = rng.standard_normal((nperturb, d, d))
            B = 0.5 * (B + np.swapaxes(B, -1, -2))
            B *= delta / np.maximum(_frob(B), 1e-300)[:, None, None]
            pert = f(xarr, t * (A + B)) / t
            pool = np.append(pert, e)
            rung_env.append(float(pool.max() if mode == "upper_sharp" else pool.min()))
        if i >= 1:
            t0, t1 = ts[i - 1], t
            ext = (t1 * e_vals[-1] - t0 * e_vals[-2]) / (t1 - t0)
            extrap.append(ext)
            if len(extrap) >= 2:
                spread = abs(extrap[-1] - extrap[-2])
                if spread < tol:
                    converged = True
                # keep climbing until the extrapolants are stationary to
                # near machine precision; homogeneous cases exit at once
                if spread < 1e-12 * (1.0 + nA):
                    break

    strong_val = extrap[-1] if extrap else e_vals[-1]
    if mode == "strong":
        return RecessionEstimate(float(strong_val), mode, float(t_used), converged,
                                 float(spread if math.isfinite(spread) else 0.0))
    tail = rung_env[len(rung_env) // 2:]
    env = max(tail) if mode == "upper_sharp" else min(tail)
    val = max(env, strong_val) if mode == "upper_sharp" else min(env, strong_val)
    return RecessionEstimate(float(val), mode, float(t_used), converged,
                             float(spread if math.isfinite(spread) else 0.0))


def transform_S(f: Integrand, x, A_hat) -> float:
    """(1 - |Ahat|) f(x, Ahat / (1 - |Ahat|)) for |Ahat| < 1."""
    A_hat = as_matrix(A_hat)
    n = float(np.linalg.norm(A_hat))
    if n >= 1.0:
        raise InputError(f"S-transform requires |A| < 1, got |A| = {n:.6g}")
    xarr = None if x is None else np.asarray(x, dtype=float)
    return float((1.0 - n) * f(xarr, A_hat / (1.0 - n)))


# ---------------------------------------------------------------------------
# Symmetric-quasiconvexity testing


def _corner_diff(values: np.ndarray, h1: float, h2: float):
    """Cell-centered first derivatives from node samples (n1, n2, ...)."""
    d1 = (values[1:, :-1] + values[1:, 1:] - values[:-1, :-1] - values[:-1, 1:]) / (2 * h1)
    d2 = (values[:-1, 1:] + values[1:, 1:] - values[:-1, :-1] - values[1:, :-1]) / (2 * h2)
    return d1, d2


def _scatter_corner_adjoint(W: np.ndarray, axis: int, grad: np.ndarray, h: float):
    """Adjoint of the corner-difference operator along the given axis."""
    W = W / (2 * h)
    if axis == 0:
        grad[1:, :-1] += W
        grad[1:, 1:] += W
        grad[:-1, :-1] -= W
        grad[:-1, 1:] -= W
    else:
        grad[:-1, 1:] += W
        grad[1:, 1:] += W
        grad[:-1, :-1] -= W
        grad[1:, :-1] -= W


def _grad_matrix(h: Integrand, A: np.ndarray) -> np.ndarray:
    """dh/dA as a symmetric matrix field, analytic or central-difference."""
    if h.grad_A is not None:
        return np.asarray(h.grad_A(None, A), dtype=float)
    eps = 1e-6
    d = A.shape[-1]
    G = np.zeros_like(A)
    for i in range(d):
        for j in range(i, d):
            E = np.zeros((d, d))
            E[i, j] = 1.0
            E[j, i] = 1.0
            dd = (h(None, A + eps * E) - h(None, A - eps * E)) / (2 * eps)
            if i == j:
                G[..., i, i] = dd
            else:
                G[..., i, j] = 0.5 * dd
                G[..., j, i] = 0.5 * dd
    return G


@dataclass(frozen=True)
class CellProblemResult:
    min_mean: float
    h_at_A: float
    violation: bool
    psi: DisplacementField
    starts_tried: int


def _sawtooth(s: np.ndarray) -> np.ndarray:
    """Odd 1-periodic triangle wave with slopes +-1 and amplitude 1/4."""
    frac = s - np.floor(s)
    return np.where(frac < 0.5, frac - 0.25, 0.75 - frac)


def cell_problem_min(h: Integrand, A, cell: Optional[Grid] = None,
                     opts: Optional[dict] = None) -> CellProblemResult:
    """Search for test displacements lowering the mean of h(A + E psi).

    psi is pinned to zero on the cell boundary, so min_mean <= h(A) always
    (psi = 0 is admissible and evaluated).  A verdict of violation
    certifies failure of symmetric quasiconvexity at A; no violation is
    evidence only, the search being local.
    """
    if h.x_dependent:
        raise InputError("cell problem requires an x-independent integrand")
    A = as_matrix(A)
    d = A.shape[0]
    if d != 2:
        raise InputError("cell problem implemented for d = 2")
    cell = cell or Grid(((0.0, 1.0), (0.0, 1.0)), (33, 33))
    opts = dict(opts or {})
    maxiter = int(opts.get("iters", 80))
    nrandom = int(opts.get("restarts", 2))
    seed = int(opts.get("seed", 0))
    tol = float(opts.get("tol", 1e-5))

    n1, n2 = cell.n
    h1, h2 = cell.spacing
    ncells = (n1 - 1) * (n2 - 1)
    h_at_A = float(h(None, A))

    def unpack(z):
        v = np.zeros((n1, n2, 2))
        v[1:-1, 1:-1, :] = z.reshape(n1 - 2, n2 - 2, 2)
        return v

    def strain(v):
        d1u1, d2u1 = _corner_diff(v[..., 0], h1, h2)
        d1u2, d2u2 = _corner_diff(v[..., 1], h1, h2)
        E = np.empty((n1 - 1, n2 - 1, 2, 2))
        E[..., 0, 0] = d1u1
        E[..., 1, 1] = d2u2
        E[..., 0, 1] = 0.5 * (d1u2 + d2u1)
        E[..., 1, 0] = E[..., 0, 1]
        return E

    def objective(z):
        v = unpack(z)
        vals = h(None, A + strain(v))
        if not np.all(np.isfinite(vals)):
            raise InputError("integrand produced non-finite values during search")
        obj = float(vals.mean())
        G = _grad_matrix(h, A + strain(v)) / ncells
        grad = np.zeros((n1, n2, 2))
        _scatter_corner_adjoint(G[..., 0, 0], 0, grad[..., 0], h1)
        _scatter_corner_adjoint(G[..., 1, 1], 1, grad[..., 1], h2)
        _scatter_corner_adjoint(G[..., 0, 1], 1, grad[..., 0], h2)
        _scatter_corner_adjoint(G[..., 0, 1], 0, grad[..., 1], h1)
        return obj, grad[1:-1, 1:-1, :].reshape(-1)

    pts = cell.nodes()
    # plateau vanishing on the boundary, slope confined to a 2-cell margin
    margin = 2.0 * max(h1, h2)
    dist = np.minimum.reduce([
        pts[..., 0] - cell.box[0][0], cell.box[0][1] - pts[..., 0],
        pts[..., 1] - cell.box[1][0], cell.box[1][1] - pts[..., 1]])
    plateau = np.clip(dist / margin, 0.0, 1.0)

    dirs = [
        (np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        (np.array([1.0, 0.0]), np.array([1.0, 0.0])),
        (np.array([0.0, 1.0]), np.array([0.0, 1.0])),
        (np.array([1.0, 1.0]) / math.sqrt(2), np.array([1.0, -1.0]) / math.sqrt(2)),
    ]
    L1 = cell.box[0][1] - cell.box[0][0]
    starts = [np.zeros((n1 - 2) * (n2 - 2) * 2)]
    for a, b in dirs:
        phase = pts @ a
        for amp in (0.5, 2.0):
            prof = amp * L1 * _sawtooth(4.0 * phase / L1)
            v = (prof * plateau)[..., None] * b
            starts.append(v[1:-1, 1:-1, :].reshape(-1))
    rng = np.random.default_rng(seed)
    for _ in range(nrandom):
        starts.append(0.1 * min(h1, h2) * rng.standard_normal((n1 - 2) * (n2 - 2) * 2))

    best_val = h_at_A
    best_z = starts[0]
    for z0 in starts:
        v0, _ = objective(z0)
        if v0 < best_val:
            best_val, best_z = v0, z0
        res = _scipy_minimize(objective, z0, jac=True, method="L-BFGS-B",
                              options={"maxiter": maxiter, "maxcor": 10})
        if res.fun < best_val:
            best_val, best_z = float(res.fun), res.x

    psi = DisplacementField(cell, unpack(best_z))
    violation = best_val < h_at_A - tol * (1.0 + abs(h_at_A))
    return CellProblemResult(min_mean=float(min(best_val, h_at_A)), h_at_A=h_at_A,
                             violation=bool(violation), psi=psi,
                             starts_tried=len(starts))


def dyad_segment_scan(h: Integrand, A_list, ab_list, theta_list,
                      tol: float = 1e-9) -> List[dict]:
    """Check h(theta A1 + (1-theta) A2) <= theta h(A1) + (1-theta) h(A2)
    along segments with A2 - A1 a symmetric dyad; list the violations."""
    if h.x_dependent:
        raise InputError("segment scan requires an x-independent integrand")
    out = []
    for A1 in A_list:
        A1 = as_matrix(A1)
        for a, b in ab_list:
            A2 = A1 + sym_dyad(a, b).array
            hA1 = float(h(None, A1))
            hA2 = float(h(None, A2))
            for theta in theta_list:
                if not 0.0 <= theta <= 1.0:
                    raise InputError("theta must lie in [0, 1]")
                mid = float(h(None, theta * A1 + (1 - theta) * A2))
                bound = theta * hA1 + (1 - theta) * hA2
                if mid > bound + tol * (1.0 + abs(bound)):
                    out.append({"A1": A1.tolist(), "A2": A2.tolist(),
                                "theta": float(theta),
                                "gap": float(mid - bound)})
    return out
