"""The two synthetic populations: exact tables and closed forms, benefit
predictors, and reproducible samplers.

Population 1 has binary outcome, covariates (x1, x2) and confounder z, all
linear in their means. Population 2 has uniform covariates, a Gaussian
outcome, propensity ``e = z`` and the predictor ``h = x1 + x2``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import (
    CELL_ORDER,
    DomainError,
    Pop1Spec,
    ValidatedPop1Spec,
    validate_pop1_spec,
)
from .metrics import GroupedBenefit, MetricReport, CurvePoints, _report, cb_exact

X_POINTS = ((1, 1), (1, 0), (0, 1), (0, 0))

# Published example configuration; the printed cell masses sum to 0.999.
REFERENCE_ALPHA0 = (0.629, 0.143, -0.479, -0.058)
REFERENCE_ALPHA1 = (0.335, 0.304, -0.334, 0.314)
REFERENCE_P = dict(zip(CELL_ORDER, (0.181, 0.100, 0.035, 0.148, 0.174, 0.087, 0.121, 0.153)))
REFERENCE_BETA = (0.120, 0.7621)


def reference_pop1_spec(beta1: float = REFERENCE_BETA[1], normalize: bool = True) -> Pop1Spec:
    """The published parameter vector, optionally with masses rescaled to one.

    Rescaling leaves every conditional quantity given x unchanged (bias,
    tau_s, predictor coefficients); only the marginal weights of x move.
    """
    spec = Pop1Spec(REFERENCE_ALPHA0, REFERENCE_ALPHA1, (REFERENCE_BETA[0], beta1), REFERENCE_P)
    return spec.normalized() if normalize else spec


# --------------------------------------------------------------------------
# Population 1: exact table
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Pop1Cell:
    x1: int
    x2: int
    z: int
    mass: float
    mu0: float
    mu1: float
    e: float

    @property
    def tau(self) -> float:
        return self.mu1 - self.mu0


@dataclass(frozen=True)
class JointTable:
    """Exact joint law of (x1, x2, z) with outcome means and propensity.

    ``px``, ``pz1`` and ``tau_s`` are keyed by ``(x1, x2)``.
    """

    spec: ValidatedPop1Spec
    cells: tuple[Pop1Cell, ...]
    px: dict = field(default_factory=dict)
    pz1: dict = field(default_factory=dict)
    tau_s: dict = field(default_factory=dict)

    def cell(self, x1: int, x2: int, z: int) -> Pop1Cell:
        return next(c for c in self.cells if (c.x1, c.x2, c.z) == (x1, x2, z))

    @property
    def tau_star(self) -> float:
        return math.fsum(c.mass * c.tau for c in self.cells)


def pop1_joint_table(spec: Pop1Spec) -> JointTable:
    if not isinstance(spec, ValidatedPop1Spec):
        spec = validate_pop1_spec(spec)
    cells = []
    for key in CELL_ORDER:
        x1, x2, z = (int(ch) for ch in key)
        cells.append(
            Pop1Cell(
                x1, x2, z,
                mass=spec.p[key],
                mu0=spec.outcome_mean(0, x1, x2, z),
                mu1=spec.outcome_mean(1, x1, x2, z),
                e=spec.propensity(z),
            )
        )
    px, pz1, tau_s = {}, {}, {}
    for x in X_POINTS:
        pair = [c for c in cells if (c.x1, c.x2) == x]
        px[x] = math.fsum(c.mass for c in pair)
        if px[x] > 0:
            pz1[x] = math.fsum(c.mass for c in pair if c.z == 1) / px[x]
            tau_s[x] = math.fsum(c.tau * c.mass for c in pair) / px[x]
        else:
            pz1[x] = math.nan
            tau_s[x] = math.nan
    return JointTable(spec, tuple(cells), px, pz1, tau_s)


# --------------------------------------------------------------------------
# Population 1: benefit predictors
# --------------------------------------------------------------------------


class DegenerateCellError(ValueError):
    pass


@dataclass(frozen=True)
class Pop1Tbp:
    """One of the three predictors: mean of covariates (h1), a moderately
    calibrated quadratic (h2) or the strongly calibrated tau_s (h3)."""

    kind: str
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("h1", "h2", "h3"):
            raise ValueError(f"unknown predictor {self.kind!r}")


def _ratio(num: float, den: float, label: str) -> float:
    if den == 0:
        raise DegenerateCellError(f"degenerate covariate cell: {label} has zero mass")
    return num / den


def pop1_tbp_coefficients(table: JointTable) -> dict[str, float]:
    """Coefficients b0..b2 of h2 and c0..c3 of h3 from the population."""
    a0, a1 = table.spec.alpha0, table.spec.alpha1
    p = table.spec.p
    d0, d1, d2, d3 = (a1[i] - a0[i] for i in range(4))

    q00 = _ratio(p["001"], p["001"] + p["000"], "x=(0,0)")
    q10 = _ratio(p["101"], p["101"] + p["100"], "x=(1,0)")
    q01 = _ratio(p["011"], p["011"] + p["010"], "x=(0,1)")
    q11 = _ratio(p["111"], p["111"] + p["110"], "x=(1,1)")
    mid = p["101"] + p["100"] + p["011"] + p["010"]
    w10 = _ratio(p["101"] + p["100"], mid, "the h=1 level")
    w01 = (p["011"] + p["010"]) / mid
    qmid = (p["101"] + p["011"]) / mid

    b0 = d0 + d3 * q00
    b1 = d1 * w10 + d2 * w01 + d3 * (qmid - q00)
    b2 = d1 * (1 - 2 * w10) + d2 * (1 - 2 * w01) + d3 * (q11 - 2 * qmid + q00)
    c0 = d0 + d3 * q00
    c1 = d1 + d3 * (q10 - q00)
    c2 = d2 + d3 * (q01 - q00)
    c3 = d3 * (q11 - q10 - q01 + q00)
    return dict(b0=b0, b1=b1, b2=b2, c0=c0, c1=c1, c2=c2, c3=c3)


def make_pop1_tbp(kind: str, table: JointTable) -> Pop1Tbp:
    if kind == "h1":
        return Pop1Tbp("h1")
    coef = pop1_tbp_coefficients(table)
    if kind == "h2":
        return Pop1Tbp("h2", (coef["b0"], coef["b1"], coef["b2"]))
    if kind == "h3":
        return Pop1Tbp("h3", (coef["c0"], coef["c1"], coef["c2"], coef["c3"]))
    raise ValueError(f"unknown predictor {kind!r}")


def pop1_tbp_predict(tbp: Pop1Tbp, x1, x2):
    """Evaluate a predictor at binary covariates (scalars or arrays)."""
    scalar = np.ndim(x1) == 0 and np.ndim(x2) == 0
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if tbp.kind == "h1":
        out = (x1 + x2) / 2
    elif tbp.kind == "h2":
        b0, b1, b2 = tbp.coefficients
        out = b0 + b1 * (x1 + x2) + b2 * x1 * x2
    else:
        c0, c1, c2, c3 = tbp.coefficients
        out = c0 + c1 * x1 + c2 * x2 + c3 * x1 * x2
    return float(out) if scalar else out


def pop1_grouped(table: JointTable, tbp: Pop1Tbp, benefit: dict | None = None) -> GroupedBenefit:
    """Group the four covariate points by predictor level.

    ``benefit`` maps x to the conditional mean benefit used for the groups;
    defaults to tau_s, which equals E[tau(X, Z) | X].
    """
    benefit = table.tau_s if benefit is None else benefit
    xs = [x for x in X_POINTS if table.px[x] > 0]
    levels: dict[float, list] = {}
    for x in xs:
        levels.setdefault(pop1_tbp_predict(tbp, *x), []).append(x)
    h, mass, mean_b = [], [], []
    for level, members in levels.items():
        m = math.fsum(table.px[x] for x in members)
        h.append(level)
        mass.append(m)
        mean_b.append(math.fsum(table.px[x] * benefit[x] for x in members) / m)
    return GroupedBenefit(h, mass, mean_b)


def pop1_metrics(table: JointTable, tbp: Pop1Tbp) -> MetricReport:
    return cb_exact(pop1_grouped(table, tbp))


# --------------------------------------------------------------------------
# Population 2: closed forms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Pop2Spec:
    sigma: float = 0.1

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be positive and finite")


def pop2_distribution(h):
    """Triangular(0, 2, 1) density and CDF of h = x1 + x2."""
    scalar = np.ndim(h) == 0
    h = np.asarray(h, dtype=float)
    f = np.where((h >= 0) & (h < 1), h, np.where((h >= 1) & (h <= 2), 2 - h, 0.0))
    F = np.where(h < 0, 0.0, np.where(h < 1, h * h / 2, np.where(h < 2, 1 - (2 - h) ** 2 / 2, 1.0)))
    return (float(f), float(F)) if scalar else (f, F)


def _open_domain(h):
    h = np.asarray(h, dtype=float)
    if np.any(~(h > 0) | ~(h < 2)):
        raise DomainError("h must lie in (0, 2); the predictor has no mass elsewhere")
    return h


def pop2_calibration_deviation(h):
    """E[bias(X) | H = h]: the naive curve minus the adjusted one.

    Given H = h, x2 is uniform on [max(0, h-1), min(1, h)], so this is the mean
    of ``1/3 - x2^2 + 2/3 x2^3`` over that interval.
    """
    scalar = np.ndim(h) == 0
    h = _open_domain(h)
    lo = np.maximum(0.0, h - 1)
    hi = np.minimum(1.0, h)

    def antiderivative(u):
        return u / 3 - u**3 / 3 + u**4 / 6

    out = (antiderivative(hi) - antiderivative(lo)) / (hi - lo)
    return float(out) if scalar else out


def pop2_calibration(h, adjusted: bool = True):
    """E[B | H = h] (adjusted) or its unadjusted counterpart E[D | H = h]."""
    scalar = np.ndim(h) == 0
    h = _open_domain(h)
    # (1 - h^2/4) / (2 - h) on (1, 2) simplifies to (2 + h) / 4
    out = np.where(h <= 1, 3 * h / 4, (2 + h) / 4)
    if not adjusted:
        out = out + pop2_calibration_deviation(h)
    return float(out) if scalar else out


def pop2_bias(x2):
    """Confounding bias of the naive contrast, a function of x2 only."""
    scalar = np.ndim(x2) == 0
    x2 = np.asarray(x2, dtype=float)
    if np.any(~(x2 >= 0) | ~(x2 <= 1)):
        raise DomainError("x2 must lie in [0, 1]")
    out = 1 / 3 - x2**2 + 2 / 3 * x2**3
    return float(out) if scalar else out


def pop2_moments() -> dict[str, Fraction]:
    """Exact population expectations used by the Population 2 metrics."""
    return {
        "tau_star": Fraction(2, 3),
        "e_b_F": 2 * (Fraction(3, 80) + Fraction(19, 120)),  # E[tau_s F_H(H)]
        "e_bias": Fraction(1, 6),
        "e_bias_F": Fraction(13, 504) + Fraction(43, 1260),  # E[bias F_H(H)]
        "e_b_Ftau": Fraction(2, 5),  # E[tau_s F_{tau_s}(tau_s)]
    }


def pop2_metrics(adjusted: bool = True, predictor: str = "h") -> MetricReport:
    """Closed-form C_b for the predictor ``h = x1 + x2`` or the oracle
    ranking by tau_s (adjusted only). H is continuous, so eta = 2 F_H."""
    m = pop2_moments()
    if predictor == "h":
        if adjusted:
            tau, maxlike = m["tau_star"], 2 * m["e_b_F"]
        else:
            tau, maxlike = m["tau_star"] + m["e_bias"], 2 * (m["e_b_F"] + m["e_bias_F"])
    elif predictor == "tau_s":
        if not adjusted:
            raise ValueError("no unadjusted closed form for the tau_s ranking")
        tau, maxlike = m["tau_star"], 2 * m["e_b_Ftau"]
    else:
        raise ValueError(f"unknown predictor {predictor!r}")
    return _report(float(tau), float(maxlike))


def _pop2_cumulative_benefit(t, adjusted: bool):
    """E[B I(H <= t)] (or with D in place of B) for t in [0, 2]."""
    t = np.asarray(t, dtype=float)
    low = t**3 / 4
    high = 0.25 + (4 * t - t**3 / 3 - 4 + 1 / 3) / 4
    out = np.where(t <= 1, low, high)
    if not adjusted:
        s = t - 1
        low_b = t**2 / 6 - t**4 / 12 + t**5 / 30
        high_b = 7 / 60 + s / 6 - s**2 / 6 + s**4 / 12 - s**5 / 30
        out = out + np.where(t <= 1, low_b, high_b)
    return out


def pop2_rcc(adjusted: bool = True, points: int = 401) -> CurvePoints:
    """Closed-form relative concentration curve sampled at ``points`` h values."""
    t = np.linspace(0.0, 2.0, points)
    _, F = pop2_distribution(t)
    cum = _pop2_cumulative_benefit(t, adjusted)
    total = float(_pop2_cumulative_benefit(2.0, adjusted))
    y = cum / total
    y[0], y[-1] = 0.0, 1.0
    return CurvePoints(F, y, "rcc")


def pop2_calibration_points(adjusted: bool = True, points: int = 199) -> CurvePoints:
    h = np.linspace(0.0, 2.0, points + 2)[1:-1]
    return CurvePoints(h, pop2_calibration(h, adjusted=adjusted), "calibration")


# --------------------------------------------------------------------------
# Samples and simulation
# --------------------------------------------------------------------------

BLOCK_SIZE = 1 << 16


@dataclass
class Sample:
    """Observed records, with counterfactuals and predictions when known.

    ``extra`` holds additional named columns (for instance a ``tau`` column
    of true conditional effects).
    """

    y: np.ndarray
    a: np.ndarray
    x: np.ndarray
    z: np.ndarray
    y0: np.ndarray | None = None
    y1: np.ndarray | None = None
    h: np.ndarray | None = None
    extra: dict = field(default_factory=dict)
    provenance: str = "ingested"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.x = np.asarray(self.x, dtype=float).reshape(self.y.size, -1)
        self.z = np.asarray(self.z, dtype=float).reshape(self.y.size, -1)
        n = self.y.size
        if self.a.size != n or self.x.shape[0] != n or self.z.shape[0] != n:
            raise ValueError("all columns must have the same number of records")
        if not np.all((self.a == 0) | (self.a == 1)):
            raise ValueError("treatment column must be 0/1")
        if (self.y0 is None) != (self.y1 is None):
            raise ValueError("y0 and y1 must be given together")
        if self.y0 is not None:
            self.y0 = np.asarray(self.y0, dtype=float)
            self.y1 = np.asarray(self.y1, dtype=float)
            if not np.array_equal(self.y, np.where(self.a == 1, self.y1, self.y0)):
                raise ValueError("observed y must equal the counterfactual under the received treatment")
        if self.h is not None:
            self.h = np.asarray(self.h, dtype=float)

    def __len__(self):
        return self.y.size


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("TBP_EVAL_THREADS", "1") or 1)
    return max(1, int(workers))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # Counter-based generator keyed on (seed, block index)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _pop1_block(spec: ValidatedPop1Spec, seed: int, block: int) -> dict:
    rng = _block_rng(seed, block)
    u = rng.random((BLOCK_SIZE, 4))
    masses = np.array([spec.p[k] for k in CELL_ORDER])
    cum = np.cumsum(masses)
    cum[-1] = 1.0
    cell = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), len(CELL_ORDER) - 1)
    bits = np.array([[int(ch) for ch in key] for key in CELL_ORDER], dtype=float)[cell]
    x1, x2, z = bits[:, 0], bits[:, 1], bits[:, 2]
    a0, a1 = np.array(spec.alpha0), np.array(spec.alpha1)
    design = np.column_stack([np.ones_like(x1), x1, x2, z])
    e = spec.beta[0] + spec.beta[1] * z
    a = (u[:, 1] < e).astype(float)
    y0 = (u[:, 2] < design @ a0).astype(float)
    y1 = (u[:, 3] < design @ a1).astype(float)
    return dict(x=np.column_stack([x1, x2]), z=z[:, None], a=a, y0=y0, y1=y1,
                tau=design @ (a1 - a0))


def _pop2_block(spec: Pop2Spec, seed: int, block: int) -> dict:
    rng = _block_rng(seed, block)
    u = rng.random((BLOCK_SIZE, 4))
    eps = rng.standard_normal((BLOCK_SIZE, 2))
    x1, x2, z = u[:, 0], u[:, 1], u[:, 2].copy()
    # e = z must stay strictly inside (0, 1)
    bad = z == 0.0
    while bad.any():
        z[bad] = rng.random(int(bad.sum()))
        bad = z == 0.0
    a = (u[:, 3] < z).astype(float)
    tau_s = np.maximum(x1, x2)
    base = np.maximum(z, x2) + 0.1 * x1
    y0 = -0.5 * tau_s + base + spec.sigma * eps[:, 0]
    y1 = 0.5 * tau_s + base + spec.sigma * eps[:, 1]
    return dict(x=np.column_stack([x1, x2]), z=z[:, None], a=a, y0=y0, y1=y1,
                tau=tau_s, h=x1 + x2)


def simulate(pop, n: int, seed: int, retain_counterfactuals: bool = False,
             tbp: Pop1Tbp | None = None, workers: int | None = None) -> Sample:
    """Draw ``n`` iid records from a population.

    Records are generated in fixed-size blocks, each from its own generator
    keyed on ``(seed, block index)``; record i therefore depends only on
    ``(seed, i)`` and the result is identical for any worker count.

    For Population 1, ``tbp`` fills the prediction column. Population 2
    always carries its predictor ``h = x1 + x2``. The true conditional effect
    is returned in ``extra["tau"]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(pop, Pop2Spec):
        block_fn = _pop2_block
    elif isinstance(pop, Pop1Spec):
        pop = pop if isinstance(pop, ValidatedPop1Spec) else validate_pop1_spec(pop)
        block_fn = _pop1_block
    else:
        raise TypeError(f"unsupported population {type(pop).__name__}")

    nblocks = -(-n // BLOCK_SIZE)
    with ThreadPoolExecutor(max_workers=_workers(workers)) as pool:
        parts = list(pool.map(lambda b: block_fn(pop, seed, b), range(nblocks)))
    cols = {k: np.concatenate([part[k] for part in parts])[:n] for k in parts[0]}

    y = np.where(cols["a"] == 1, cols["y1"], cols["y0"])
    h = cols.get("h")
    if tbp is not None:
        h = pop1_tbp_predict(tbp, cols["x"][:, 0], cols["x"][:, 1])
    return Sample(
        y=y, a=cols["a"], x=cols["x"], z=cols["z"],
        y0=cols["y0"] if retain_counterfactuals else None,
        y1=cols["y1"] if retain_counterfactuals else None,
        h=h, extra={"tau": cols["tau"]},
        provenance=f"simulated(seed={seed})",
    )
