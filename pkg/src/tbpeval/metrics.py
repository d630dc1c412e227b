"""Concentration-of-benefit index, relative concentration curves and
calibration curves, from exact grouped tables or from finite samples.

Everything here treats the benefit predictor H purely as a ranking variable,
with ties handled through the eta weight ``2 F_H(H) - f_H(H)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import PROB_TOL, EmpiricalDistribution

NEGATIVE_ATE_FLAG = "E[B] > 0 assumed"


class UndefinedMetricError(ValueError):
    """C_b is undefined because the average benefit (or its ranked
    counterpart) is exactly zero."""

    def __init__(self, message: str, maxlike: float):
        self.maxlike = maxlike
        super().__init__(f"{message} (maxlike={maxlike!r})")


@dataclass(frozen=True)
class MetricReport:
    """Discrimination summary for one predictor.

    ``maxlike`` is the expected benefit under "treat the member of a random
    pair with the larger H", ``tau_star`` the expected benefit under random
    treatment.
    """

    tau_star: float
    maxlike: float
    cb: float
    gini_b: float
    n: int | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "tau_star": self.tau_star,
            "maxlike": self.maxlike,
            "cb": self.cb,
            "gini_b": self.gini_b,
            "n": self.n,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class CurvePoints:
    x: np.ndarray
    y: np.ndarray
    kind: str  # "calibration" or "rcc"

    def __post_init__(self):
        for name in ("x", "y"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same length")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __len__(self):
        return self.x.size


@dataclass(frozen=True)
class GroupedBenefit:
    """Distinct predictor levels with their probability mass and mean benefit."""

    h: np.ndarray
    mass: np.ndarray
    mean_b: np.ndarray = field()

    def __post_init__(self):
        order = np.argsort(np.asarray(self.h, dtype=float), kind="stable")
        for name in ("h", "mass", "mean_b"):
            arr = np.asarray(getattr(self, name), dtype=float)[order].copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.h.shape == self.mass.shape == self.mean_b.shape) or self.h.size == 0:
            raise ValueError("h, mass and mean_b must be non-empty and equal length")
        if np.any(np.diff(self.h) == 0):
            raise ValueError("group levels must be distinct")
        if np.any(self.mass <= 0):
            raise ValueError("group masses must be positive")
        if abs(math.fsum(self.mass) - 1.0) > PROB_TOL:
            raise ValueError(f"masses must sum to 1 (got {math.fsum(self.mass)!r})")

    @classmethod
    def from_records(cls, b, h) -> "GroupedBenefit":
        """Pool records with equal h; each record has mass 1/n."""
        b = np.asarray(b, dtype=float).ravel()
        h = np.asarray(h, dtype=float).ravel()
        if b.shape != h.shape:
            raise ValueError("benefit and prediction arrays differ in length")
        if b.size == 0:
            raise ValueError("empty sample")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(h))):
            raise ValueError("non-finite benefit or prediction")
        levels, inverse, counts = np.unique(h, return_inverse=True, return_counts=True)
        sums = np.bincount(inverse, weights=b, minlength=levels.size)
        mass = counts / b.size
        # fix rounding so the masses pass the sum-to-one check for any n
        mass = mass / math.fsum(mass)
        return cls(levels, mass, sums / counts)

    def distribution(self) -> EmpiricalDistribution:
        cdf = np.cumsum(self.mass)
        cdf[-1] = 1.0
        return EmpiricalDistribution(self.h, self.mass, cdf)

    def eta(self) -> np.ndarray:
        return self.distribution().eta()


def _report(tau_star: float, maxlike: float, n=None, flags=()) -> MetricReport:
    flags = list(flags)
    if tau_star < 0:
        flags.append(NEGATIVE_ATE_FLAG)
    if tau_star == 0:
        raise UndefinedMetricError("average benefit is zero; C_b undefined", maxlike)
    if maxlike == 0:
        raise UndefinedMetricError("ranked benefit is zero; C_b undefined", maxlike)
    cb = 1.0 - tau_star / maxlike
    gini_b = (maxlike - tau_star) / tau_star
    return MetricReport(tau_star, maxlike, cb, gini_b, n, tuple(flags))


def cb_exact(groups: GroupedBenefit, n: int | None = None) -> MetricReport:
    """C_b and Gini_b of an exactly known grouped population.

    Examples
    --------
    >>> g = GroupedBenefit([0.0, 1.0], [0.5, 0.5], [0.2, 0.6])
    >>> round(cb_exact(g).cb, 12)
    0.2
    """
    w = groups.mass * groups.mean_b
    tau_star = math.fsum(w)
    maxlike = math.fsum(w * groups.eta())
    return _report(tau_star, maxlike, n=n)


def cb_plug_in(tau_hat, h) -> MetricReport:
    """Plug-in C_b with empirical F and f of the predictions.

    Records sharing a prediction are pooled, so ties are handled exactly as in
    the discrete population formula.
    """
    tau_hat = np.asarray(tau_hat, dtype=float).ravel()
    h = np.asarray(h, dtype=float).ravel()
    if tau_hat.shape != h.shape:
        raise ValueError("tau_hat and h differ in length")
    if tau_hat.size < 2:
        raise ValueError("need at least 2 records")
    return cb_exact(GroupedBenefit.from_records(tau_hat, h), n=int(tau_hat.size))


def pairwise_maxlike_oracle(b, h, block: int = 2048) -> float:
    """Brute-force average of the pair rule over all ordered pairs (i, j).

    The record with larger h supplies its benefit; on ties a fair coin picks
    the treated member, contributing the average of the two benefits. The
    sample itself is treated as the population, so i == j pairs count.
    """
    b = np.asarray(b, dtype=float).ravel()
    h = np.asarray(h, dtype=float).ravel()
    if b.shape != h.shape or b.size == 0:
        raise ValueError("b and h must be non-empty and equal length")
    n = b.size
    total = 0.0
    for start in range(0, n, block):
        bi = b[start : start + block, None]
        hi = h[start : start + block, None]
        gain = np.where(hi > h[None, :], bi, np.where(hi < h[None, :], b[None, :], 0.5 * (bi + b[None, :])))
        total += math.fsum(gain.ravel())
    return total / (n * n)


def rcc_from_groups(groups: GroupedBenefit) -> CurvePoints:
    """Relative concentration curve with one vertex per tie group."""
    w = groups.mass * groups.mean_b
    tau_star = math.fsum(w)
    if tau_star <= 0:
        raise ValueError("relative concentration curve needs a positive average benefit")
    cum_b = np.concatenate([[0.0], np.cumsum(w)])
    cum_p = np.concatenate([[0.0], np.cumsum(groups.mass)])
    return CurvePoints(cum_p / cum_p[-1], cum_b / cum_b[-1], "rcc")


def rcc(tau_hat, h) -> CurvePoints:
    """Relative concentration curve of benefit estimates ordered by ascending h."""
    return rcc_from_groups(GroupedBenefit.from_records(tau_hat, h))


def gini_from_rcc(curve: CurvePoints) -> float:
    """Twice the area between the diagonal and the curve (trapezoid rule).

    Exceeds 1 when part of the population has negative benefit.
    """
    x, y = curve.x, curve.y
    area = math.fsum(np.diff(x) * (y[1:] + y[:-1]) / 2.0)
    diag = math.fsum(np.diff(x) * (x[1:] + x[:-1]) / 2.0)
    return 2.0 * (diag - area)


def cb_from_gini(gini_b: float) -> float:
    return gini_b / (1.0 + gini_b)


def calibration_from_groups(groups: GroupedBenefit) -> CurvePoints:
    return CurvePoints(groups.h, groups.mean_b, "calibration")


def calibration_curve(tau_hat, h, binning: str = "by_level", k: int = 10) -> CurvePoints:
    """Mean benefit estimate against prediction.

    Parameters
    ----------
    tau_hat, h : array_like
        Per-record benefit estimates and predictions.
    binning : {"by_level", "equal_frequency"}
        ``by_level`` gives one point per distinct prediction. ``equal_frequency``
        cuts h at its ``k``-quantiles; tied predictions always land in the same
        bin, so fewer than ``k`` points can come back when ties are heavy.
    k : int
        Number of quantile bins.
    """
    tau_hat = np.asarray(tau_hat, dtype=float).ravel()
    h = np.asarray(h, dtype=float).ravel()
    if tau_hat.shape != h.shape:
        raise ValueError("tau_hat and h differ in length")
    if h.size == 0:
        raise ValueError("empty sample")
    if binning == "by_level":
        return calibration_from_groups(GroupedBenefit.from_records(tau_hat, h))
    if binning != "equal_frequency":
        raise ValueError(f"unknown binning {binning!r}")
    if k < 2 or k > h.size:
        raise ValueError(f"k must satisfy 2 <= k <= n (got k={k}, n={h.size})")
    if k > np.unique(h).size:
        raise ValueError("insufficient distinct predictions for the requested bins")
    edges = np.quantile(h, np.linspace(0.0, 1.0, k + 1)[1:-1])
    idx = np.searchsorted(edges, h, side="right")
    counts = np.bincount(idx, minlength=k)
    used = counts > 0
    hx = np.bincount(idx, weights=h, minlength=k)[used] / counts[used]
    ty = np.bincount(idx, weights=tau_hat, minlength=k)[used] / counts[used]
    return CurvePoints(hx, ty, "calibration")
