"""How confounding by z propagates into the calibration curve and C_b when
benefit is estimated from the treated-vs-untreated contrast given x alone."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Pop1Spec, SpecValidationError, validate_pop1_spec
from .metrics import (
    CurvePoints,
    MetricReport,
    calibration_from_groups,
    cb_exact,
    rcc_from_groups,
)
from .populations import (
    X_POINTS,
    JointTable,
    Pop1Tbp,
    pop1_grouped,
    pop1_joint_table,
    pop2_calibration_deviation,
    pop2_calibration_points,
    pop2_metrics,
    pop2_moments,
    pop2_rcc,
)

CROSS_CHECK_TOL = 1e-10
REGIONS = (">0.1", ">0.05", ">0.01", "<=0.01")


class ConditionalUndefinedError(ValueError):
    pass


class DeviationDenominatorError(ZeroDivisionError):
    def __init__(self, e_b_eta: float, e_d_eta: float):
        self.factors = (e_b_eta, e_d_eta)
        super().__init__(
            f"C_b deviation undefined: E[B eta]={e_b_eta!r}, E[B eta] + E[bias eta]={e_d_eta!r}"
        )


@dataclass(frozen=True)
class BiasTable:
    """Per-x confounding bias with the naive contrast it comes from."""

    bias: dict
    naive_diff: dict
    tau_s: dict

    def as_row(self) -> tuple[float, float, float, float]:
        return tuple(self.bias[x] for x in X_POINTS)


@dataclass(frozen=True)
class DeviationReport:
    cb_adjusted: float
    cb_naive: float
    cb_deviation: float
    calib_dev: list = field(default_factory=list)  # [(h, E[bias | H = h]), ...]

    def to_dict(self) -> dict:
        return {
            "cb_adjusted": self.cb_adjusted,
            "cb_naive": self.cb_naive,
            "cb_deviation": self.cb_deviation,
            "calib_dev": [{"h": h, "value": v} for h, v in self.calib_dev],
        }


@dataclass(frozen=True)
class Evaluation:
    """Adjusted and naive metrics and curves for one predictor."""

    adjusted: MetricReport
    naive: MetricReport
    deviation: DeviationReport
    calibration: CurvePoints
    calibration_naive: CurvePoints
    rcc: CurvePoints
    rcc_naive: CurvePoints


def _arm_mean(table: JointTable, a: int, x) -> float:
    cells = [c for c in table.cells if (c.x1, c.x2) == x]
    w = [(c.e if a else 1 - c.e) * c.mass for c in cells]
    total = math.fsum(w)
    if total == 0:
        raise ConditionalUndefinedError(
            f"conditional undefined: P(A={a}, X={x}) = 0 (overlap violation)"
        )
    mu = [c.mu1 if a else c.mu0 for c in cells]
    return math.fsum(m * wi for m, wi in zip(mu, w)) / total


def pop1_bias(table: JointTable) -> BiasTable:
    """bias(x) = E[Y | A=1, X=x] - E[Y | A=0, X=x] - tau_s(x), by exact sums."""
    bias, naive = {}, {}
    for x in X_POINTS:
        if table.px[x] == 0:
            continue
        naive[x] = _arm_mean(table, 1, x) - _arm_mean(table, 0, x)
        bias[x] = naive[x] - table.tau_s[x]
    return BiasTable(bias, naive, dict(table.tau_s))


def calibration_deviation(bias: BiasTable, tbp: Pop1Tbp, table: JointTable) -> list[tuple[float, float]]:
    """E[bias(X) | H = h] at each predictor level, ascending in h."""
    groups = pop1_grouped(table, tbp, benefit=bias.bias)
    return list(zip(groups.h.tolist(), groups.mean_b.tolist()))


def cb_deviation(tau_star: float, e_bias: float, e_bias_eta: float, e_b_eta: float) -> float:
    """Naive minus adjusted C_b in factored form.

    Parameters
    ----------
    tau_star : float
        E[B].
    e_bias, e_bias_eta : float
        E[bias(X)] and E[bias(X) eta(H)].
    e_b_eta : float
        E[B eta(H)].
    """
    denom_b = e_b_eta
    denom_d = e_b_eta + e_bias_eta
    if denom_b == 0 or denom_d == 0:
        raise DeviationDenominatorError(denom_b, denom_d)
    return (tau_star * e_bias_eta - e_b_eta * e_bias) / (denom_b * denom_d)


def _cross_check(factored: float, direct: float) -> None:
    if abs(factored - direct) > CROSS_CHECK_TOL:
        raise RuntimeError(
            f"factored C_b deviation {factored!r} disagrees with direct difference {direct!r}"
        )


def naive_metrics(table: JointTable, tbp: Pop1Tbp) -> Evaluation:
    """Adjusted metrics (tau_s from full (x, z) adjustment) beside naive ones
    (the x-only contrast D(x) = tau_s(x) + bias(x))."""
    bt = pop1_bias(table)
    adj_groups = pop1_grouped(table, tbp)
    naive_groups = pop1_grouped(table, tbp, benefit=bt.naive_diff)
    bias_groups = pop1_grouped(table, tbp, benefit=bt.bias)

    adjusted = cb_exact(adj_groups)
    naive = cb_exact(naive_groups)
    eta = adj_groups.eta()
    w = bias_groups.mass * bias_groups.mean_b
    e_bias = math.fsum(w)
    e_bias_eta = math.fsum(w * eta)
    factored = cb_deviation(adjusted.tau_star, e_bias, e_bias_eta, adjusted.maxlike)
    _cross_check(factored, naive.cb - adjusted.cb)

    deviation = DeviationReport(
        adjusted.cb, naive.cb, factored,
        list(zip(bias_groups.h.tolist(), bias_groups.mean_b.tolist())),
    )
    return Evaluation(
        adjusted, naive, deviation,
        calibration_from_groups(adj_groups), calibration_from_groups(naive_groups),
        rcc_from_groups(adj_groups), rcc_from_groups(naive_groups),
    )


def pop2_evaluation(points: int = 199) -> Evaluation:
    """Closed-form adjusted/naive evaluation of ``h = x1 + x2``."""
    m = pop2_moments()
    adjusted = pop2_metrics(adjusted=True)
    naive = pop2_metrics(adjusted=False)
    # continuous H, so E[. eta(H)] = 2 E[. F_H(H)]
    factored = cb_deviation(
        float(m["tau_star"]), float(m["e_bias"]), float(2 * m["e_bias_F"]), float(2 * m["e_b_F"])
    )
    _cross_check(factored, naive.cb - adjusted.cb)
    cal = pop2_calibration_points(True, points)
    deviation = DeviationReport(
        adjusted.cb, naive.cb, factored,
        list(zip(cal.x.tolist(), pop2_calibration_deviation(cal.x).tolist())),
    )
    return Evaluation(
        adjusted, naive, deviation,
        cal, pop2_calibration_points(False, points),
        pop2_rcc(True, 2 * points + 3), pop2_rcc(False, 2 * points + 3),
    )


# --------------------------------------------------------------------------
# Parameter sweep
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepTable:
    beta1: np.ndarray
    a13_minus_a03: np.ndarray
    abs_bias: np.ndarray  # (rows, 4), columns in X_POINTS order
    region: tuple[str, ...]
    skipped: tuple[tuple[float, float], ...] = ()

    def __len__(self):
        return self.beta1.size


def classify_region(max_abs_bias: float) -> str:
    if max_abs_bias > 0.1:
        return ">0.1"
    if max_abs_bias > 0.05:
        return ">0.05"
    if max_abs_bias > 0.01:
        return ">0.01"
    return "<=0.01"


def alpha13_interval(spec: Pop1Spec) -> tuple[float, float]:
    """Range of the treated-arm z coefficient keeping every outcome mean in [0, 1]."""
    c = spec.alpha1
    base = [c[0] + c[1] * x1 + c[2] * x2 for x1, x2 in X_POINTS]
    return max(-b for b in base), min(1 - b for b in base)


def default_sweep_grid(spec: Pop1Spec, beta1_steps: int = 200, alpha13_steps: int = 200,
                       eps: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Uniform grids over beta1 in [0, 1 - beta0 - eps] and alpha13 - alpha03
    over the alpha13 validity interval."""
    lo, hi = alpha13_interval(spec)
    beta1 = np.linspace(0.0, 1.0 - spec.beta[0] - eps, beta1_steps)
    diff = np.linspace(lo, hi, alpha13_steps) - spec.alpha0[3]
    return beta1, diff


def _bias_grid(spec: Pop1Spec, beta1: np.ndarray, alpha13: np.ndarray) -> np.ndarray:
    """Vectorized bias(x) over paired arrays of (beta1, alpha13)."""
    out = np.empty((beta1.size, len(X_POINTS)))
    b0 = spec.beta[0]
    for j, (x1, x2) in enumerate(X_POINTS):
        pz = np.array([spec.mass(x1, x2, z) for z in (0, 1)])
        q = pz[1] / pz.sum()
        e1 = b0 + beta1  # propensity at z=1
        q_t = e1 * q / (e1 * q + b0 * (1 - q))
        q_u = (1 - e1) * q / ((1 - e1) * q + (1 - b0) * (1 - q))
        # only the z coefficients survive the contrast minus tau_s
        out[:, j] = alpha13 * (q_t - q) - spec.alpha0[3] * (q_u - q)
    return out


def sweep_bias(base_spec: Pop1Spec, beta1_grid, a13_minus_a03_grid) -> SweepTable:
    """|bias(x)| over a (beta1, alpha13 - alpha03) grid, beta1 varying slowest.

    Grid points that do not give a valid population are listed in
    ``skipped``.
    """
    beta1_grid = np.asarray(beta1_grid, dtype=float).ravel()
    diff_grid = np.asarray(a13_minus_a03_grid, dtype=float).ravel()
    if beta1_grid.size == 0 or diff_grid.size == 0:
        raise ValueError("empty sweep grid")
    a03 = base_spec.alpha0[3]
    keep_b, keep_d, skipped = [], [], []
    for b in beta1_grid:
        for d in diff_grid:
            try:
                validate_pop1_spec(base_spec.replace(beta1=float(b), alpha13=float(a03 + d)))
            except SpecValidationError:
                skipped.append((float(b), float(d)))
                continue
            keep_b.append(b)
            keep_d.append(d)
    keep_b = np.array(keep_b, dtype=float)
    keep_d = np.array(keep_d, dtype=float)
    abs_bias = np.abs(_bias_grid(base_spec, keep_b, a03 + keep_d))
    region = tuple(classify_region(m) for m in abs_bias.max(axis=1)) if keep_b.size else ()
    return SweepTable(keep_b, keep_d, abs_bias, region, tuple(skipped))
