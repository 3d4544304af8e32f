# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
import ast
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from frozendict import frozendict
from scipy import integrate

from . import jet
from .utils import OrderError, SymbolError, finite_or_tag

logger = logging.getLogger(__name__)

__all__ = (
    "FAMILIES",
    "HypothesisReport",
    "MikhlinReport",
    "MultiplierSymbol",
    "check_mikhlin",
    "classify",
    "default_probe",
    "evaluate",
    "osgood_partial_integral",
    "property_constants",
    "symbol",
)

DEFAULT_MAX_ORDER = 8
OSGOOD_BAND = 0.05
INFINITE_BETA1 = 0.05
POWER_LAW_ALPHA = 0.02
BOUNDED_BETA1 = 1e-6


def default_probe():
    return np.geomspace(1e4, 1e300, 48)


# Each family supplies m as a function of an r-jet and, separately, m~(u) = m(e^u)
# as a function of a u-jet written so that nothing overflows for u up to ~700.


def _log1p_exp(u):
    """log(1 + e^u) for u >= 0"""
    return u + jet.log1p(jet.exp(-u))


def _euler_r(r, p):
    return jet.constant(1.0, r)


def _alpha_r(r, p):
    return jet.power(r, p["alpha"])


def _alpha_u(u, p):
    return jet.exp(u * p["alpha"])


def _loglog_r(r, p):
    return jet.power(jet.log1p(jet.log1p(r * r)), p["beta"])


def _loglog_u(u, p):
    return jet.power(jet.log1p(_log1p_exp(u * 2.0)), p["beta"])


def _log_r(r, p):
    return jet.power(jet.log1p(r), p["beta1"])


def _log_u(u, p):
    return jet.power(_log1p_exp(u), p["beta1"])


def _triple_r(r, p):
    return jet.log1p(jet.log1p(jet.log1p(r)))


def _triple_u(u, p):
    return jet.log1p(jet.log1p(_log1p_exp(u)))


def _qg_r(r, p):
    r2 = r * r
    return r2 / (r2 + p["lam"] ** 2)


def _qg_u(u, p):
    return 1.0 / (1.0 + jet.exp(u * -2.0) * p["lam"] ** 2)


def _euler_lambda_r(r, p):
    return 1.0 / (1.0 + r * r * p["lam"] ** 2)


def _euler_lambda_u(u, p):
    decay = jet.exp(u * -2.0)
    return decay / (decay + p["lam"] ** 2)


@dataclass(frozen=True)
class _Family:
    name: str
    params: tuple
    m_r: object
    m_u: object
    m_zero: object
    monotone: bool = True
    bounds: dict = field(default_factory=dict)


FAMILIES = frozendict(
    {
        "euler": _Family("euler", (), _euler_r, None, lambda p: 1.0),
        "alpha_sqg": _Family("alpha_sqg", ("alpha",), _alpha_r, _alpha_u, lambda p: 0.0, bounds={"alpha": (0.0, 2.0)}),
        "loglog_euler": _Family("loglog_euler", ("beta",), _loglog_r, _loglog_u, lambda p: 0.0, bounds={"beta": (0.0, math.inf)}),
        "log_euler": _Family("log_euler", ("beta1",), _log_r, _log_u, lambda p: 0.0, bounds={"beta1": (0.0, math.inf)}),
        "triple_log": _Family("triple_log", (), _triple_r, _triple_u, lambda p: 0.0),
        "qg_shallow_water": _Family("qg_shallow_water", ("lam",), _qg_r, _qg_u, lambda p: 0.0, bounds={"lam": (0.0, math.inf)}),
        "euler_lambda": _Family(
            "euler_lambda", ("lam",), _euler_lambda_r, _euler_lambda_u, lambda p: 1.0, monotone=False, bounds={"lam": (0.0, math.inf)}
        ),
    }
)

# descriptor spellings accepted for parameters
_ALIASES = {"lambda": "lam", "a": "alpha", "b": "beta", "beta_1": "beta1"}


################################################################################
# Custom expressions
################################################################################

_JET_FUNCS = {
    "log": (jet.log, np.log),
    "log1p": (jet.log1p, np.log1p),
    "exp": (jet.exp, np.exp),
    "sqrt": (jet.sqrt, np.sqrt),
    "sin": (jet.sin, np.sin),
    "cos": (jet.cos, np.cos),
}
_CONSTANTS = {"e": math.e, "pi": math.pi}
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


def _parse_expression(text):
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as e:
        raise SymbolError(f"cannot parse expression {text!r}: {e.msg}") from e
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load, ast.operator, ast.unaryop)):
            continue
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            continue
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.Name) and (node.id == "r" or node.id in _CONSTANTS or node.id in _JET_FUNCS):
            continue
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _JET_FUNCS and len(node.args) == 1 and not node.keywords:
            continue
        raise SymbolError(f"unsupported syntax in expression {text!r}: {type(node).__name__}")
    return tree.body


def _interpret(node, r):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return r if node.id == "r" else _CONSTANTS[node.id]
    if isinstance(node, ast.UnaryOp):
        value = _interpret(node.operand, r)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_interpret(node.left, r), _interpret(node.right, r))
    jet_fn, np_fn = _JET_FUNCS[node.func.id]
    arg = _interpret(node.args[0], r)
    return jet_fn(arg) if isinstance(arg, jet.Jet) else float(np_fn(arg))


def _custom_r(r, p):
    result = _interpret(_parse_expression(p["expression"]), r)
    return result if isinstance(result, jet.Jet) else jet.constant(result, r)


################################################################################
# Symbols
################################################################################


@dataclass(frozen=True)
class MultiplierSymbol:
    """A radial Fourier multiplier symbol m(r).

    `params` is a frozendict so symbols hash and can key kernel-table caches.
    """

    family: str
    params: frozendict = field(default_factory=frozendict)
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        if not isinstance(self.params, frozendict):
            object.__setattr__(self, "params", frozendict(self.params))
        if self.max_order < 5:
            raise SymbolError("max_order must be >= 5")
        if self.family == "custom":
            if "expression" not in self.params:
                raise SymbolError("custom symbol needs an 'expression'")
            _parse_expression(self.params["expression"])
            return
        if self.family not in FAMILIES:
            raise SymbolError(f"unknown multiplier family {self.family!r}, expected one of {sorted(FAMILIES)} or 'custom'")
        spec = FAMILIES[self.family]
        for name in spec.params:
            if name not in self.params:
                raise SymbolError(f"{self.family} needs parameter {name!r}")
        for name, value in self.params.items():
            if name not in spec.params:
                raise SymbolError(f"{self.family} takes no parameter {name!r}")
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise SymbolError(f"parameter {name} must be finite")
            lo, hi = spec.bounds.get(name, (-math.inf, math.inf))
            if not lo < value < hi:
                raise SymbolError(f"parameter {name} must be in ({lo}, {hi})")

    @classmethod
    def from_descriptor(cls, descriptor):
        """Build from a JSON-style descriptor such as {"family": "loglog_euler", "beta": 1.0}"""
        if not isinstance(descriptor, dict) or "family" not in descriptor:
            raise SymbolError("symbol descriptor must be an object with a 'family' key")
        params = {}
        max_order = DEFAULT_MAX_ORDER
        for key, value in descriptor.items():
            if key == "family":
                continue
            if key == "max_order":
                max_order = int(value)
                continue
            if key in ("expression", "m_zero") and descriptor["family"] == "custom":
                params[key] = value if key == "expression" else float(value)
                continue
            params[_ALIASES.get(key, key)] = float(value) if isinstance(value, (int, float)) else value
        return cls(str(descriptor["family"]), frozendict(params), max_order)

    def descriptor(self):
        out = {"family": self.family}
        out.update({("lambda" if k == "lam" else k): v for k, v in self.params.items()})
        if self.max_order != DEFAULT_MAX_ORDER:
            out["max_order"] = self.max_order
        return out

    @property
    def monotone(self):
        if self.family == "custom":
            return True
        return FAMILIES[self.family].monotone

    @property
    def bounded(self):
        return self.family in ("euler", "qg_shallow_water", "euler_lambda")

    @property
    def m_zero(self):
        """m(0+)"""
        if self.family != "custom":
            return float(FAMILIES[self.family].m_zero(self.params))
        if "m_zero" in self.params:
            return float(self.params["m_zero"])
        with np.errstate(all="ignore"):
            for r in (0.0, 1e-300, 1e-200, 1e-100):
                value = float(self._r_form(jet.variable(np.array(r), 0)).value)
                if math.isfinite(value):
                    return value
        raise SymbolError("custom symbol has no finite value at r = 0+, pass m_zero explicitly")

    def _r_form(self, r):
        if self.family == "custom":
            return _custom_r(r, self.params)
        return FAMILIES[self.family].m_r(r, self.params)

    def derivatives(self, r, k):
        """Array of m, m', ..., m^(k) at r (shape (k + 1,) + r.shape)"""
        if not 0 <= k <= self.max_order:
            raise OrderError(f"derivative order {k} outside 0..{self.max_order}")
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return jet.derivatives(self._r_form(jet.variable(r, k)))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self.derivatives(np.where(r > 0, r, 1.0), 0)[0]
        out = np.where(r > 0, out, self.m_zero)
        return out if out.ndim else float(out)

    def m_tilde(self, u, k=0):
        """m~(u) = m(e^u) and its u-derivatives up to order k"""
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.family == "euler":
                out = np.zeros((k + 1,) + u.shape)
                out[0] = 1.0
                return out
            if self.family == "custom":
                return jet.derivatives(_custom_r(jet.exp(jet.variable(u, k)), self.params))
            return jet.derivatives(FAMILIES[self.family].m_u(jet.variable(u, k), self.params))

    def __str__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.descriptor().items() if k != "family")
        return f"{self.family}({args})"


def symbol(family, **params):
    """Shorthand, e.g. symbol("alpha_sqg", alpha=0.5)"""
    return MultiplierSymbol.from_descriptor({"family": family, **params})


def evaluate(sym, r, k=0):
    """m^(k)(r); r = 0 is accepted for k = 0 and returns m(0+)"""
    if not 0 <= k <= sym.max_order:
        raise OrderError(f"derivative order {k} outside 0..{sym.max_order}")
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise SymbolError(f"r must be finite and >= 0, got {r}")
    if r == 0:
        if k:
            raise SymbolError("derivatives are only defined for r > 0")
        return sym.m_zero
    return float(sym.derivatives(r, k)[k])


################################################################################
# Hypothesis checks
################################################################################


@dataclass(frozen=True)
class MikhlinReport:
    sups: tuple
    refined_sups: tuple
    passed: bool
    vacuous: bool = False
    skipped: bool = False

    def to_dict(self):
        return {
            "sups": [finite_or_tag(s) for s in self.sups],
            "refined_sups": [finite_or_tag(s) for s in self.refined_sups],
            "passed": self.passed,
            "vacuous": self.vacuous,
            "skipped": self.skipped,
        }


@dataclass(frozen=True)
class HypothesisReport:
    h1_positive: bool
    h1_monotone: bool
    h1_mikhlin_sup: tuple
    h2_class: str
    beta_hat: float
    beta1_hat: float
    beta2_hat: float
    alpha_hat: float
    osgood: str

    def to_dict(self):
        return {
            "h1_positive": self.h1_positive,
            "h1_monotone": self.h1_monotone,
            "h1_mikhlin_sup": [finite_or_tag(s) for s in self.h1_mikhlin_sup],
            "h2_class": self.h2_class,
            "beta_hat": finite_or_tag(self.beta_hat),
            "beta1_hat": finite_or_tag(self.beta1_hat),
            "beta2_hat": finite_or_tag(self.beta2_hat),
            "alpha_hat": finite_or_tag(self.alpha_hat),
            "osgood": self.osgood,
        }


def _mikhlin_sups(sym, grid, orders):
    d = sym.derivatives(grid, orders + 1)
    slope = d[1]
    sups = []
    for k in range(1, orders + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = grid**k * np.abs(d[k + 1]) / slope
        sups.append(float(np.max(ratio)) if np.all(np.isfinite(ratio)) else math.inf)
    return sups


def check_mikhlin(sym, orders=3, grid=None, stability=0.1):
    """Sup over the grid of r^k |d^k m'/dr^k| / m'(r) for k = 1..orders.

    The check passes when every sup is finite and moves by at most `stability` (relative)
    when the grid is both refined 2x and widened by a decade on each side.
    """
    if not 1 <= orders <= sym.max_order - 1:
        raise OrderError(f"orders must be in 1..{sym.max_order - 1}")
    grid = np.geomspace(1e-3, 1e6, 400) if grid is None else np.asarray(grid, dtype=float)
    if not sym.monotone:
        logger.warning("%s is not monotone, skipping Mikhlin check", sym)
        return MikhlinReport((), (), passed=False, skipped=True)
    slope = sym.derivatives(grid, 1)[1]
    if np.all(slope == 0):
        return MikhlinReport((0.0,) * orders, (0.0,) * orders, passed=True, vacuous=True)
    if np.any(slope <= 0):
        return MikhlinReport((math.inf,) * orders, (math.inf,) * orders, passed=False)
    sups = _mikhlin_sups(sym, grid, orders)
    wide = np.geomspace(grid[0] / 10, grid[-1] * 10, 2 * grid.size + 2 * int(grid.size / np.log10(grid[-1] / grid[0])))
    if np.any(sym.derivatives(wide, 1)[1] <= 0):
        refined = [math.inf] * orders
    else:
        refined = _mikhlin_sups(sym, wide, orders)
    passed = all(math.isfinite(a) and math.isfinite(b) and abs(b - a) <= stability * max(a, 1e-12) for a, b in zip(sups, refined))
    return MikhlinReport(tuple(sups), tuple(refined), passed=passed)


def _extrapolate(x, seq):
    """Quadratic least-squares fit of seq against x, evaluated at x = 0; also the fit residual"""
    coeffs, residual, *_ = np.polyfit(x, seq, 2, full=True)
    scale = max(float(np.max(np.abs(seq))), 1e-12)
    rms = math.sqrt(float(residual[0]) / len(seq)) / scale if len(residual) else 0.0
    return float(coeffs[-1]), rms


def classify(sym, probe=None):
    """Estimate the (H1)/(H2) structure and the Osgood verdict of a symbol."""
    probe = default_probe() if probe is None else np.asarray(probe, dtype=float)
    if probe.size < 20 or probe.min() > 1e4 or probe.max() < 1e12:
        raise SymbolError("probe grid must span at least [1e4, 1e12] with >= 20 points")
    probe = np.sort(probe)

    dense = np.geomspace(1e-6, 1e12, 600)
    with np.errstate(all="ignore"):
        d = sym.derivatives(dense, 1)
    positive = bool(np.all(d[0] > 0))
    monotone = bool(np.all(d[1] >= -1e-14 * np.abs(d[0])))
    if not monotone and sym.monotone:
        logger.warning("%s decreases somewhere on (1e-6, 1e12)", sym)
    mikhlin = check_mikhlin(sym) if monotone else MikhlinReport((), (), passed=False, skipped=True)

    u = np.log(probe)
    mt = sym.m_tilde(u, 2)
    keep = np.all(np.isfinite(mt), axis=0) & (mt[0] > 0)
    u, mt = u[keep], mt[:, keep]
    if u.size < 6:
        return HypothesisReport(positive, monotone, mikhlin.sups, "Unclassified", math.nan, math.nan, math.nan, math.nan, "Undetermined")

    with np.errstate(divide="ignore", invalid="ignore"):
        alpha_seq = mt[1] / mt[0]
        beta1_seq = u * alpha_seq
        beta_seq = u * np.log(u) * alpha_seq
        beta2_seq = u * mt[2] / mt[1]

    # power-law exponent: Richardson in 1/u through the last two probes
    u1, u2 = u[-2], u[-1]
    alpha_hat = float((u2 * alpha_seq[-1] - u1 * alpha_seq[-2]) / (u2 - u1))
    tail = u >= 100.0 if np.count_nonzero(u >= 100.0) >= 6 else np.arange(u.size) >= u.size // 2
    x = 1.0 / np.log(u[tail])

    if beta1_seq[-1] <= BOUNDED_BETA1:
        h2, osgood = "H2c", "Holds"
        beta_hat, beta1_hat = 0.0, 0.0
        beta2_hat = math.nan
        alpha_hat = 0.0
    elif alpha_hat >= POWER_LAW_ALPHA:
        h2, osgood = "H2b", "Fails"
        beta_hat, beta1_hat, beta2_hat = math.inf, math.inf, math.nan
    else:
        beta1_hat, rms1 = _extrapolate(x, beta1_seq[tail])
        beta_hat, rms = _extrapolate(x, beta_seq[tail])
        beta2_hat, _ = _extrapolate(x, beta2_seq[tail]) if np.all(np.isfinite(beta2_seq[tail])) else (math.nan, 0.0)
        beta1_hat = max(beta1_hat, 0.0)
        alpha_hat = max(alpha_hat, 0.0)
        if max(rms, rms1) > 1e-2 or not math.isfinite(beta_hat):
            return HypothesisReport(positive, monotone, mikhlin.sups, "Unclassified", beta_hat, beta1_hat, beta2_hat, alpha_hat, "Undetermined")
        h2 = "H2a"
        growing = beta_seq[-1] > 1e3 and np.all(np.diff(beta_seq[tail]) > 0)
        if beta1_hat > INFINITE_BETA1 or growing:
            beta_hat = math.inf
        beta_hat = max(beta_hat, 0.0)
        if beta_hat <= 1.0 - OSGOOD_BAND:
            osgood = "Holds"
        elif beta_hat >= 1.0 + OSGOOD_BAND:
            osgood = "Fails"
        else:
            osgood = "Undetermined"
    logger.debug("classified %s as %s (beta=%s, alpha=%s)", sym, h2, beta_hat, alpha_hat)
    return HypothesisReport(positive, monotone, mikhlin.sups, h2, beta_hat, beta1_hat, beta2_hat, alpha_hat, osgood)


def osgood_partial_integral(sym, r):
    """Partial Osgood integral of dq / (q log q m(q)) over [2, r].

    Substituting q = exp(exp(s)) turns it into the integral of 1/m~(e^s) ds, which stays
    finite and well conditioned up to r = 1e300.
    """
    if r <= 2:
        return 0.0
    s0, s1 = math.log(math.log(2.0)), math.log(math.log(r))
    value, _ = integrate.quad(lambda s: 1.0 / float(sym.m_tilde(math.exp(s))[0]), s0, s1, limit=200)
    return float(value)


def property_constants(sym, grid=None, mus=(0.25, 0.5, 0.75)):
    """Empirical constants for the standard structural inequalities of a symbol.

    Returns a dict with the sup over the grid of m(2r)/m(r) ("doubling"), r m'(r)/m(r)
    ("derivative"), m(r^2)/m(r) on r >= 2 ("power") and, per mu, the quasi-monotonicity
    ratio rho1^mu m(1/rho1) / (rho2^mu (m(1/rho2) + 1)) over rho1 <= rho2.
    """
    grid = np.geomspace(1e-4, 1e8, 241) if grid is None else np.asarray(grid, dtype=float)
    d = sym.derivatives(grid, 1)
    m, dm = d[0], d[1]
    out = {
        "doubling": float(np.max(sym(2.0 * grid) / m)),
        "derivative": float(np.max(grid * np.abs(dm) / m)),
    }
    big = grid[grid >= 2.0]
    u = np.log(big)
    out["power"] = float(np.max(sym.m_tilde(2.0 * u)[0] / sym.m_tilde(u)[0]))
    rho = np.geomspace(1e-8, 1.0, 81)
    m_inv = sym(1.0 / rho)
    for mu in mus:
        lhs = rho**mu * m_inv
        rhs = rho**mu * (m_inv + 1.0)
        ratio = lhs[:, None] / rhs[None, :]
        out[f"quasi_monotone_{mu}"] = float(np.max(np.triu(ratio)))
    return out
