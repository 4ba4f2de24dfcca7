"""Eigenvalue and critical-field asymptotics, and the local fields as root problems.

The local fields are defined through the lowest Neumann eigenvalue
``lambda1(B)``::

    lower = inf{H > 0 : lambda1(kappa H) >= kappa^2}
    upper = inf{H > 0 : lambda1(kappa H') >= kappa^2 for all H' > H}

On a finite window these are the first and the last sign change of
``lambda1(kappa H) - kappa^2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError

__all__ = [
    "Lambda1Evaluator",
    "CriticalFieldReport",
    "MonotonicityResult",
    "lambda1_two_term",
    "hc3_two_term",
    "leading_order_field",
    "linear_model",
    "two_term_model",
    "wiggle_model",
    "local_fields",
    "monotonicity_probe",
]


@dataclass
class Lambda1Evaluator:
    """A callable ``B -> lambda1(B)`` with a cost tag and a relative tolerance."""

    func: Callable[[float], float]
    name: str = "lambda1"
    cost: str = "cheap"
    tol: float = 1e-12
    b_range: tuple = (0.0, math.inf)

    def __call__(self, B):
        if not self.b_range[0] <= B <= self.b_range[1]:
            raise ValueError(f"B={B} outside the declared range {self.b_range}")
        val = float(self.func(B))
        if not math.isfinite(val):
            raise ValueError(f"{self.name}({B}) is not finite")
        return val


def lambda1_two_term(B, constants, gamma_hat):
    """``theta0 B + gamma_hat B^(2/3)``; the remainder is not modelled."""
    if B < 0:
        raise ValueError("B must be nonnegative")
    return constants.theta0 * B + gamma_hat * B ** (2.0 / 3.0)


def hc3_two_term(kappa, constants, gamma_hat):
    """Two-term expansion of the third critical field.

    ``kappa / theta0 - gamma_hat theta0^(-5/3) kappa^(1/3)``, obtained by
    inverting ``theta0 B + gamma_hat B^(2/3) = kappa^2`` with ``B = kappa H``.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    th = constants.theta0
    return kappa / th - gamma_hat * th ** (-5.0 / 3.0) * kappa ** (1.0 / 3.0)


def leading_order_field(kappa, constants, C=1.0):
    """``(kappa / theta0, C sqrt(kappa))``: leading value and band half-width."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return kappa / constants.theta0, C * math.sqrt(kappa)


# ---------------------------------------------------------------------------
# reference evaluators


def linear_model(theta0):
    return Lambda1Evaluator(lambda B: theta0 * B, name="linear", tol=1e-14)


def two_term_model(constants, gamma_hat):
    return Lambda1Evaluator(lambda B: lambda1_two_term(B, constants, gamma_hat),
                            name="two_term", tol=1e-14)


def wiggle_model(theta0, amplitude=10.0, frequency=1.0):
    """Non-monotone synthetic ``theta0 B + amplitude sin(frequency B)``."""
    return Lambda1Evaluator(lambda B: theta0 * B + amplitude * math.sin(frequency * B),
                            name="wiggle", tol=1e-14)


# ---------------------------------------------------------------------------
# local fields


@dataclass
class CriticalFieldReport:
    kappa: float
    underline_loc: float
    overline_loc: float
    crossing_list: list
    monotone_flag: bool
    scan_n: int = 0
    window: tuple = (0.0, 0.0)
    residuals: list = field(default_factory=list)
    validated: bool = True

    def to_json(self, path=None):
        d = asdict(self)
        text = json.dumps(d, indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text


def _sign_changes(H, g):
    neg = g < 0
    return [i for i in range(len(H) - 1) if neg[i] != neg[i + 1]]


def local_fields(ev, kappa, window, scan_n=2048, rel_tol=1e-10, max_doublings=8):
    """Lower and upper local fields of ``ev`` at ``kappa`` inside ``window``.

    The window is scanned on ``scan_n`` points, doubling until the number of
    sign changes of ``ev(kappa H) - kappa^2`` repeats; every change is then
    refined by Brent's method to relative tolerance ``rel_tol`` in ``H``.

    Raises :class:`BracketError` unless ``ev(kappa H_lo) < kappa^2 <= ev(kappa H_hi)``.
    """
    H_lo, H_hi = map(float, window)
    k2 = kappa * kappa
    g = lambda H: ev(kappa * H) - k2  # noqa: E731
    if not (g(H_lo) < 0 <= g(H_hi)):
        raise BracketError(
            f"window [{H_lo}, {H_hi}] does not bracket the transition at kappa={kappa}; "
            "widen it")
    n = int(scan_n)
    prev = None
    for _ in range(max_doublings + 1):
        H = np.linspace(H_lo, H_hi, n)
        G = np.array([g(h) for h in H])
        idx = _sign_changes(H, G)
        if prev is not None and len(idx) == prev:
            break
        prev = len(idx)
        n *= 2
    roots = []
    res = []
    for i in idx:
        r = brentq(g, H[i], H[i + 1], xtol=rel_tol * abs(H[i + 1]), rtol=1e-15)
        roots.append(float(r))
        res.append(abs(g(r)))
    # upward crossings bound the two fields; a downward one sits between them
    lower, upper = roots[0], roots[-1]
    # post-hoc check: residual within the evaluator tolerance plus what the
    # root tolerance in H allows at the local slope
    validated = True
    ev_tol = getattr(ev, "tol", 0.0)
    for r, x in zip(res, roots):
        dx = rel_tol * x
        slope = abs(g(x + dx) - g(x - dx)) / (2 * dx)
        validated &= r <= ev_tol * k2 + 2 * slope * dx
    return CriticalFieldReport(
        kappa=float(kappa), underline_loc=lower, overline_loc=upper,
        crossing_list=roots, monotone_flag=len(roots) == 1, scan_n=len(H),
        window=(H_lo, H_hi), residuals=res, validated=bool(validated))


# ---------------------------------------------------------------------------
# monotonicity


@dataclass
class MonotonicityResult:
    B: np.ndarray
    derivative: np.ndarray
    violations: list
    tail_estimate: float


def monotonicity_probe(ev, B_grid, fd_step, tail_k=5):
    """Central-difference derivative of ``ev`` on ``B_grid``.

    ``violations`` lists maximal runs ``(B_a, B_b)`` of grid points where the
    derivative is not positive; ``tail_estimate`` averages the last
    ``tail_k`` derivatives.
    """
    B = np.asarray(B_grid, float)
    if np.any(np.diff(B) <= 0):
        raise ValueError("B_grid must be strictly increasing")
    if len(B) > 1 and fd_step >= np.min(np.diff(B)):
        raise ValueError("fd_step must be smaller than the grid spacing")
    d = np.array([(ev(b + fd_step) - ev(b - fd_step)) / (2 * fd_step) for b in B])
    bad = d <= 0
    viol = []
    i = 0
    while i < len(B):
        if bad[i]:
            j = i
            while j + 1 < len(B) and bad[j + 1]:
                j += 1
            viol.append((float(B[i]), float(B[j])))
            i = j + 1
        else:
            i += 1
    tail = float(np.mean(d[-tail_k:]))
    return MonotonicityResult(B, d, viol, tail)
