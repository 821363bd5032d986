"""Fuzzy aggregate estimation over a sample with confidence intervals.

Tuples contribute through their satisfaction degree (sigma-count): COUNT and
SUM are Horvitz-Thompson scale-ups ``N/n * sum``, AVG is the degree-weighted
ratio. Intervals come in two flavours: conservative (Hoeffding) and
large-sample (CLT with finite-population correction).
"""

from __future__ import annotations

import math
import operator
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (EmptySample, InvalidRange, TooFewObservations,
                     ZeroSatisfaction)
from .kb import TrapezoidalTerm, membership

COUNT, SUM, AVG = "COUNT", "SUM", "AVG"

_OPS = {
    "=": operator.eq, "<>": operator.ne, "!=": operator.ne,
    "<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
}


# --- inverse normal CDF (Acklam) -----------------------------------------

_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def inv_norm_cdf(p: float) -> float:
    """Standard normal quantile by Acklam's rational approximation."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1))
    if p > 1 - _P_LOW:
        return -inv_norm_cdf(1 - p)
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1))


def z_value(confidence: float) -> float:
    """Two-sided critical value: ``z`` with P(|Z| <= z) = confidence."""
    return inv_norm_cdf((1 + confidence) / 2)


# --- predicate binding and tuple degrees ---------------------------------

@dataclass(frozen=True)
class BoundPredicates:
    """Predicates compiled against a joined-tuple layout.

    ``fuzzy`` holds ``(position, term)`` pairs and ``crisp`` holds
    ``(position, comparator, literal)`` triples.
    """
    fuzzy: tuple[tuple[int, TrapezoidalTerm], ...] = ()
    crisp: tuple[tuple[int, object, object], ...] = ()

    def memberships(self, row) -> list[float]:
        out = []
        for pos, term in self.fuzzy:
            v = row[pos]
            out.append(0.0 if v is None else membership(term, v))
        return out

    def crisp_ok(self, row) -> bool:
        for pos, cmp, lit in self.crisp:
            v = row[pos]
            if v is None or not cmp(v, lit):
                return False
        return True


def bind_predicates(q, resolver, layout, kb) -> BoundPredicates:
    fuzzy = []
    for pred in q.fuzzy_predicates:
        table, column = resolver.resolve(pred.column)
        term = kb.get(table, column).term(pred.term)
        fuzzy.append((layout.position(table, column), term))
    crisp = []
    for pred in q.crisp_predicates:
        table, column = resolver.resolve(pred.column)
        crisp.append((layout.position(table, column), _OPS[pred.op], pred.literal))
    return BoundPredicates(tuple(fuzzy), tuple(crisp))


def combine(degrees: Iterable[float], crisp_ok: bool = True) -> float:
    """Min t-norm over fuzzy degrees, times the 0/1 crisp outcome."""
    if not crisp_ok:
        return 0.0
    return min(degrees, default=1.0)


def tuple_degree(row, preds: BoundPredicates) -> float:
    if not preds.crisp_ok(row):
        return 0.0
    return combine(preds.memberships(row))


# --- point estimates -----------------------------------------------------

def estimate_count(degrees: Iterable[float], n: int, N: int) -> float:
    if n <= 0:
        raise EmptySample("sample size is zero")
    return N / n * math.fsum(degrees)


def estimate_sum(pairs: Iterable[tuple[float, float]], n: int, N: int) -> float:
    if n <= 0:
        raise EmptySample("sample size is zero")
    return N / n * math.fsum(d * v for d, v in pairs)


def estimate_avg(pairs: Iterable[tuple[float, float]]) -> float:
    pairs = list(pairs)
    weight = math.fsum(d for d, _ in pairs)
    if weight <= 0:
        raise ZeroSatisfaction("sum of degrees is zero")
    return math.fsum(d * v for d, v in pairs) / weight


# --- intervals -----------------------------------------------------------

def conservative_interval(observations: Iterable[float] | None, lo: float, hi: float,
                          n: int, p: float) -> float:
    """Hoeffding half-width for the mean of ``n`` draws bounded in [lo, hi].

    Multiply by N for COUNT/SUM totals.
    """
    if hi < lo:
        raise InvalidRange(f"range [{lo}, {hi}] is empty")
    if observations is not None:
        for x in observations:
            if not lo <= x <= hi:
                raise InvalidRange(f"observation {x} outside [{lo}, {hi}]")
    if n < 1:
        raise EmptySample("sample size is zero")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return (hi - lo) * math.sqrt(math.log(2 / (1 - p)) / (2 * n))


def fpc(n: int, N: int) -> float:
    if N <= 1 or n >= N:
        return 0.0
    return math.sqrt((N - n) / (N - 1))


def large_sample_interval(observations: Sequence[float], n: int, N: int, p: float) -> float:
    """CLT half-width for the mean of a without-replacement sample."""
    if n < 2:
        raise TooFewObservations(f"need n >= 2, got {n}")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    obs = list(observations)
    mean = math.fsum(obs) / len(obs)
    s = math.sqrt(math.fsum((x - mean) ** 2 for x in obs) / (len(obs) - 1))
    return z_value(p) * s / math.sqrt(n) * fpc(n, N)


def _sd_with_zeros(values: Sequence[float], n: int) -> float:
    """Sample stddev of ``values`` padded with zeros up to length n."""
    if n < 2:
        return math.nan
    total = math.fsum(values)
    mean = total / n
    ss = math.fsum((x - mean) ** 2 for x in values) + (n - len(values)) * mean * mean
    return math.sqrt(max(ss, 0.0) / (n - 1))


# --- per-group estimation ------------------------------------------------

@dataclass(frozen=True)
class GroupEstimate:
    group: tuple
    kind: str
    estimate: float
    satisfaction: float
    confidence: float
    half_width: float      # math.inf when it cannot be computed
    n_g: int
    n: int
    N: int

    @property
    def interval(self) -> tuple[float, float]:
        return self.estimate - self.half_width, self.estimate + self.half_width

    def covers(self, value: float) -> bool:
        lo, hi = self.interval
        return lo <= value <= hi


@dataclass(frozen=True)
class Contribution:
    """One qualifying tuple: its driving-row slot, degree and argument value."""
    slot: int
    degree: float
    value: float | None = None


def estimate_group(group, kind: str, contributions: Sequence[Contribution], n: int, N: int,
                   confidence: float, interval: str = "clt",
                   value_range: tuple[float, float] | None = None,
                   fanout: int = 1) -> GroupEstimate:
    """Estimate one aggregate for one group.

    ``interval`` is ``"clt"`` or ``"conservative"``. ``value_range`` bounds
    the aggregated column (needed for the conservative SUM/AVG intervals);
    ``fanout`` bounds the number of joined tuples per driving row.
    """
    if n <= 0:
        raise EmptySample("sample size is zero")
    n_g = len(contributions)
    degrees = [c.degree for c in contributions]
    satisfaction = math.fsum(degrees) / n_g if n_g else 0.0

    if kind == COUNT:
        est = estimate_count(degrees, n, N)
        per_row = _per_row(contributions, lambda c: c.degree)
        if interval == "conservative":
            half = N * conservative_interval(None, 0.0, float(fanout), n, confidence)
        else:
            half = _clt_total(per_row, n, N, confidence)
    elif kind == SUM:
        pairs = [(c.degree, c.value) for c in contributions]
        est = estimate_sum(pairs, n, N)
        per_row = _per_row(contributions, lambda c: c.degree * c.value)
        if interval == "conservative":
            lo, hi = _total_range(value_range, fanout)
            half = N * conservative_interval(None, lo, hi, n, confidence)
        else:
            half = _clt_total(per_row, n, N, confidence)
    elif kind == AVG:
        pairs = [(c.degree, c.value) for c in contributions]
        est = estimate_avg(pairs)
        if interval == "conservative":
            lo, hi = value_range if value_range else (min(v for _, v in pairs),
                                                      max(v for _, v in pairs))
            half = conservative_interval(None, lo, hi, n_g, confidence)
        elif fpc(n, N) == 0.0:
            half = 0.0
        elif n_g < 2:
            half = math.inf
        else:
            half = _clt_ratio(contributions, est, n, N, confidence)
    else:
        raise ValueError(f"unknown aggregate {kind!r}")
    return GroupEstimate(tuple(group), kind, est, satisfaction, confidence, half,
                         n_g, n, N)


def _per_row(contributions, f) -> list[float]:
    acc = defaultdict(list)
    for c in contributions:
        acc[c.slot].append(f(c))
    return [math.fsum(v) for v in acc.values()]


def _total_range(value_range, fanout):
    if value_range is None:
        raise InvalidRange("SUM needs a value range for the conservative interval")
    lo, hi = value_range
    return min(0.0, lo) * fanout, max(0.0, hi) * fanout


def _clt_total(per_row: Sequence[float], n: int, N: int, confidence: float) -> float:
    if fpc(n, N) == 0.0:
        return 0.0
    if n < 2:
        return math.inf
    s = _sd_with_zeros(per_row, n)
    return N * z_value(confidence) * s / math.sqrt(n) * fpc(n, N)


def _clt_ratio(contributions, ratio: float, n: int, N: int, confidence: float) -> float:
    """Delta-method half-width for the degree-weighted mean."""
    if n < 2:
        return math.inf
    resid = _per_row(contributions, lambda c: c.degree * (c.value - ratio))
    mean_weight = math.fsum(c.degree for c in contributions) / n
    s = _sd_with_zeros(resid, n)
    return z_value(confidence) * s / (mean_weight * math.sqrt(n)) * fpc(n, N)
