"""Closed-form counting bounds (in nats) and the completion-entropy integral.

The bounds are the leading terms only: every (1 + o(1)) or O(n^-a) factor is
dropped, so at desk-scale n they are nominal values, not certificates.
"""

from __future__ import annotations

import math
import statistics
from typing import Iterable

from scipy import integrate

NOMINAL = "asymptotic-nominal"


def _closed_form(C: float) -> float:
    if C < 1e-3:
        # (1/3) * sum_k (-1)^(k+1) C^k / (k (2k + 1)); avoids 0/0 at C = 0
        total, term = 0.0, 1.0
        for k in range(1, 12):
            term *= C
            total += (-1) ** (k + 1) * term / (k * (2 * k + 1))
        return total / 3.0
    s = math.sqrt(C)
    return (math.log1p(C) - 2.0 + 2.0 * math.atan(s) / s) / 3.0


def integral_identity(C: float) -> dict[str, float]:
    """Quadrature of int_0^1 t^2 log(1 + C t^6) dt against its closed form."""
    if C < 0:
        raise ValueError("C must be >= 0")
    lhs, _err = integrate.quad(
        lambda t: t * t * math.log1p(C * t**6), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200
    )
    rhs = _closed_form(C)
    return {"c": C, "lhs": lhs, "rhs": rhs, "diff": abs(lhs - rhs)}


def pm_log_bound(n: float) -> float:
    """log of (n / 2e^2)^(n/3): leading term of the perfect-matching upper bound."""
    if n < 3:
        raise ValueError("n must be >= 3")
    return (n / 3.0) * (math.log(n / 2.0) - 2.0)


def completions_log_bound(n: int, alpha: float, ordered: bool = False) -> dict[str, float]:
    """Nominal log-count of completions of an alpha N-triple partial system.

    Upper and lower bounds share the leading term N(1-alpha)(log((1-alpha)^2 n) - 2).
    The ordered variant adds log (N - alpha N)!.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    N = n * (n - 1) / 6.0
    rest = N * (1.0 - alpha)
    if rest == 0.0:
        value = 0.0
    else:
        value = rest * (math.log((1.0 - alpha) ** 2 * n) - 2.0)
    if ordered:
        value += math.lgamma(rest + 1.0)
    return {"upper": value, "lower": value, "ordered": ordered, "flag": NOMINAL}


def latin_transversal_log_bound(n: float) -> float:
    """log of (n / e^2)^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return n * (math.log(n) - 2.0)


def pm_gap(counts: Iterable[int], n: int) -> float:
    """median(log count) / (n/3) minus (log(n/2) - 2); zero counts give -inf logs."""
    logs = [math.log(c) if c > 0 else -math.inf for c in counts]
    return statistics.median(logs) / (n / 3.0) - (math.log(n / 2.0) - 2.0)
