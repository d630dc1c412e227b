"""Finite-sample plug-in estimates of the conditional treatment effect.

Two routes are offered for discrete covariates: saturated outcome regression
(difference of arm means within each covariate cell) and inverse probability
weighting with a saturated or known propensity. Continuous covariates are
supported only through a known propensity (record-level IPW pseudo-outcomes)
or a caller-provided effect column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .populations import Sample

DEFAULT_CLIP = 0.01
CLIP_WARN_FRACTION = 0.10
CLIP_FLAG = "more than 10% of propensities clipped"


class EstimationError(ValueError):
    """A covariate cell lacks treated or untreated records."""

    def __init__(self, message: str, cells=()):
        self.cells = list(cells)
        super().__init__(message)


@dataclass(frozen=True)
class TauEstimate:
    tau_hat: np.ndarray
    method: str  # outcome_regression, ipw, provided
    clip_count: int = 0
    cells_used: int = 0
    flags: tuple[str, ...] = ()

    def __len__(self):
        return self.tau_hat.size

    def diagnostics(self) -> dict:
        return {"clip_count": self.clip_count, "cells_used": self.cells_used, "flags": list(self.flags)}


@dataclass(frozen=True)
class PropensityEstimate:
    e_hat: np.ndarray
    method: str  # saturated or known
    clip_count: int = 0
    epsilon: float = DEFAULT_CLIP


def covariates_discrete(sample: Sample, use_z: bool = True) -> bool:
    cols = np.column_stack([sample.x, sample.z]) if use_z else sample.x
    return bool(np.all(np.isfinite(cols)) and np.all(cols == np.round(cols)))


def _cells(sample: Sample, use_z: bool):
    cols = np.column_stack([sample.x, sample.z]) if use_z else sample.x
    if not covariates_discrete(sample, use_z):
        raise ValueError("saturated estimation needs binary/categorical covariates")
    keys, inverse = np.unique(cols, axis=0, return_inverse=True)
    return keys, inverse.ravel()


def _clip(e, epsilon: float):
    if not 0 < epsilon < 0.5:
        raise ValueError("clip epsilon must lie in (0, 0.5)")
    clipped = np.clip(e, epsilon, 1 - epsilon)
    return clipped, int(np.count_nonzero(clipped != e))


def outcome_regression_tau(sample: Sample, covariate_mode: str = "saturated_discrete",
                           tau=None, use_z: bool = True) -> TauEstimate:
    """tau_hat per record as the difference of arm means in its covariate cell.

    With ``use_z=False`` the cells are formed from x alone, which gives the
    naive contrast D(x) rather than an adjusted effect. ``covariate_mode=
    "provided_tau"`` passes ``tau`` through unchanged.
    """
    if covariate_mode == "provided_tau":
        if tau is None:
            raise ValueError("provided_tau mode needs a tau column")
        tau = np.asarray(tau, dtype=float).ravel()
        if tau.size != len(sample) or not np.all(np.isfinite(tau)):
            raise ValueError("provided tau must be finite with one value per record")
        return TauEstimate(tau, "provided")
    if covariate_mode != "saturated_discrete":
        raise ValueError(f"unknown covariate mode {covariate_mode!r}")

    keys, cell = _cells(sample, use_z)
    k = keys.shape[0]
    treated = sample.a == 1
    n1 = np.bincount(cell, weights=treated, minlength=k)
    n0 = np.bincount(cell, weights=~treated, minlength=k)
    lonely = np.flatnonzero((n1 == 0) | (n0 == 0))
    if lonely.size:
        cells = [tuple(keys[i].tolist()) for i in lonely]
        raise EstimationError(f"single-arm covariate cells: {cells}", cells)
    s1 = np.bincount(cell, weights=sample.y * treated, minlength=k)
    s0 = np.bincount(cell, weights=sample.y * ~treated, minlength=k)
    tau_cell = s1 / n1 - s0 / n0
    return TauEstimate(tau_cell[cell], "outcome_regression", cells_used=k)


def estimate_propensity(sample: Sample, clip_epsilon: float = DEFAULT_CLIP,
                        use_z: bool = True) -> PropensityEstimate:
    """Saturated propensity: share treated within each covariate cell, clipped."""
    keys, cell = _cells(sample, use_z)
    k = keys.shape[0]
    rate = np.bincount(cell, weights=sample.a, minlength=k) / np.bincount(cell, minlength=k)
    e, clip_count = _clip(rate[cell], clip_epsilon)
    return PropensityEstimate(e, "saturated", clip_count, clip_epsilon)


def known_propensity(e, clip_epsilon: float = DEFAULT_CLIP) -> PropensityEstimate:
    e = np.asarray(e, dtype=float).ravel()
    if np.any(~np.isfinite(e)) or np.any((e < 0) | (e > 1)):
        raise ValueError("known propensities must lie in [0, 1]")
    clipped, clip_count = _clip(e, clip_epsilon)
    return PropensityEstimate(clipped, "known", clip_count, clip_epsilon)


def ipw_pseudo_outcome(y, a, e):
    """y (a - e) / (e (1 - e))."""
    return y * (a - e) / (e * (1 - e))


def ipw_tau(sample: Sample, propensity: PropensityEstimate, clip_epsilon: float = DEFAULT_CLIP,
            aggregate: str = "cells", use_z: bool = True) -> TauEstimate:
    """Inverse-probability-weighted effect estimate.

    ``aggregate="cells"`` averages the pseudo-outcome within covariate cells;
    ``"records"`` returns the record-level pseudo-outcomes for downstream
    averaging, which is the only option for continuous covariates.
    """
    e, extra_clips = _clip(np.asarray(propensity.e_hat, dtype=float), clip_epsilon)
    if e.size != len(sample):
        raise ValueError("propensity length does not match the sample")
    clip_count = propensity.clip_count + extra_clips
    phi = ipw_pseudo_outcome(sample.y, sample.a, e)
    if not np.all(np.isfinite(phi)):
        raise RuntimeError("non-finite IPW pseudo-outcome after clipping")
    flags = (CLIP_FLAG,) if clip_count > CLIP_WARN_FRACTION * len(sample) else ()
    if aggregate == "records":
        return TauEstimate(phi, "ipw", clip_count, 0, flags)
    if aggregate != "cells":
        raise ValueError(f"unknown aggregation {aggregate!r}")
    keys, cell = _cells(sample, use_z)
    k = keys.shape[0]
    tau_cell = np.bincount(cell, weights=phi, minlength=k) / np.bincount(cell, minlength=k)
    return TauEstimate(tau_cell[cell], "ipw", clip_count, k, flags)
