"""Shared types: tie-aware empirical distributions, the eta weight, and the
binary-population parameter set with its validity checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12

# Storage/config order of the covariate cells, keyed "x1 x2 z".
CELL_ORDER = ("111", "110", "101", "100", "011", "010", "001", "000")


class SpecValidationError(ValueError):
    """A population parameter set does not define a legitimate distribution."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class OverlapError(SpecValidationError):
    """Propensity touches 0 or 1 somewhere on the covariate support."""


class DomainError(ValueError):
    """Argument outside the region where a closed form is defined."""


# --------------------------------------------------------------------------
# Empirical distributions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Discrete distribution over sorted distinct atoms.

    ``cdf`` holds F(atom) = P(H <= atom), so the tie mass at an atom is carried
    separately by ``masses``.
    """

    atoms: np.ndarray
    masses: np.ndarray
    cdf: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("atoms", "masses", "cdf"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_masses(cls, values, masses) -> "EmpiricalDistribution":
        """Build from (value, mass) pairs; equal values are pooled."""
        values = np.asarray(values, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if values.shape != masses.shape or values.size == 0:
            raise ValueError("values and masses must be non-empty and equal length")
        if np.any(masses < 0):
            raise ValueError("masses must be non-negative")
        if abs(math.fsum(masses) - 1.0) > PROB_TOL:
            raise ValueError(f"masses must sum to 1 (got {math.fsum(masses)!r})")
        atoms, inverse = np.unique(values, return_inverse=True)
        pooled = np.zeros(atoms.size)
        np.add.at(pooled, inverse, masses)
        keep = pooled > 0
        atoms, pooled = atoms[keep], pooled[keep]
        cdf = np.cumsum(pooled)
        cdf[-1] = 1.0
        return cls(atoms, pooled, cdf)

    def _locate(self, h):
        h = np.asarray(h, dtype=float)
        if not np.all(np.isfinite(h)):
            raise ValueError("non-finite argument")
        return h, np.searchsorted(self.atoms, h, side="right")

    def cdf_at(self, h):
        """P(H <= h)."""
        h, idx = self._locate(h)
        out = np.where(idx > 0, self.cdf[np.maximum(idx - 1, 0)], 0.0)
        return out if out.ndim else float(out)

    def pmf_at(self, h):
        """P(H = h) by exact equality with a stored atom."""
        h, idx = self._locate(h)
        prev = np.maximum(idx - 1, 0)
        hit = (idx > 0) & (self.atoms[prev] == h)
        out = np.where(hit, self.masses[prev], 0.0)
        return out if out.ndim else float(out)

    def eta(self):
        """eta at every atom, aligned with ``atoms``."""
        return 2.0 * self.cdf - self.masses


def build_empirical_distribution(values) -> EmpiricalDistribution:
    """Empirical distribution of a sample with ties pooled into atoms."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empty sample")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"non-finite value at index {int(bad[0])}")
    atoms, counts = np.unique(values, return_counts=True)
    masses = counts / values.size
    cdf = np.cumsum(counts) / values.size
    return EmpiricalDistribution(atoms, masses, cdf)


def eta_at(dist: EmpiricalDistribution, h):
    """2 F_H(h) - f_H(h); the tie term is zero off the atoms."""
    return 2.0 * dist.cdf_at(h) - dist.pmf_at(h)


def eta_per_record(values) -> np.ndarray:
    """eta(H_i) under the empirical distribution of ``values`` itself."""
    values = np.asarray(values, dtype=float).ravel()
    dist = build_empirical_distribution(values)
    idx = np.searchsorted(dist.atoms, values)
    return dist.eta()[idx]


# --------------------------------------------------------------------------
# Binary population parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Pop1Spec:
    """Parameters of the binary population.

    ``alpha0``/``alpha1`` are (intercept, x1, x2, z) coefficients of the
    untreated/treated outcome means, ``beta`` the propensity (intercept, z),
    and ``p`` the joint mass of (x1, x2, z) keyed by strings such as ``"101"``.
    """

    alpha0: tuple[float, float, float, float]
    alpha1: tuple[float, float, float, float]
    beta: tuple[float, float]
    p: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "alpha0", tuple(float(v) for v in self.alpha0))
        object.__setattr__(self, "alpha1", tuple(float(v) for v in self.alpha1))
        object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))
        object.__setattr__(self, "p", {str(k): float(v) for k, v in dict(self.p).items()})

    def mass(self, x1: int, x2: int, z: int) -> float:
        return self.p[f"{x1}{x2}{z}"]

    def outcome_mean(self, a: int, x1: int, x2: int, z: int) -> float:
        c = self.alpha1 if a else self.alpha0
        return c[0] + c[1] * x1 + c[2] * x2 + c[3] * z

    def propensity(self, z: int) -> float:
        return self.beta[0] + self.beta[1] * z

    def replace(self, **changes) -> "Pop1Spec":
        """Copy with selected fields replaced; ``beta1`` and ``alpha13`` are
        accepted as shorthands for single coefficients."""
        alpha1 = list(self.alpha1)
        beta = list(self.beta)
        if "beta1" in changes:
            beta[1] = changes.pop("beta1")
        if "alpha13" in changes:
            alpha1[3] = changes.pop("alpha13")
        fields_ = dict(alpha0=self.alpha0, alpha1=tuple(alpha1), beta=tuple(beta), p=self.p)
        fields_.update(changes)
        return Pop1Spec(**fields_)

    def normalized(self) -> "Pop1Spec":
        """Copy with the cell masses rescaled to sum to one."""
        total = math.fsum(self.p.values())
        return self.replace(p={k: v / total for k, v in self.p.items()})

    def to_config(self) -> dict:
        return {
            "alpha0": list(self.alpha0),
            "alpha1": list(self.alpha1),
            "beta": list(self.beta),
            "p": {k: self.p[k] for k in CELL_ORDER if k in self.p},
        }

    @classmethod
    def from_config(cls, cfg: Mapping) -> "Pop1Spec":
        missing = [k for k in ("alpha0", "alpha1", "beta", "p") if k not in cfg]
        if missing:
            raise SpecValidationError([f"missing key {k!r}" for k in missing])
        return cls(tuple(cfg["alpha0"]), tuple(cfg["alpha1"]), tuple(cfg["beta"]), dict(cfg["p"]))


class ValidatedPop1Spec(Pop1Spec):
    """A :class:`Pop1Spec` that passed :func:`validate_pop1_spec`."""


def validate_pop1_spec(spec: Pop1Spec) -> ValidatedPop1Spec:
    """Check that ``spec`` defines a legitimate distribution with overlap.

    Raises
    ------
    SpecValidationError
        Cell masses or a Bernoulli mean out of range (all violations listed).
    OverlapError
        Propensity equal to 0 or 1 for some z, the distribution being
        otherwise legitimate.
    """
    problems = []
    if len(spec.alpha0) != 4 or len(spec.alpha1) != 4 or len(spec.beta) != 2:
        raise SpecValidationError(["alpha0/alpha1 need 4 entries and beta 2"])
    if set(spec.p) != set(CELL_ORDER):
        raise SpecValidationError([f"p must have exactly the cells {sorted(CELL_ORDER)}"])
    values = list(spec.alpha0) + list(spec.alpha1) + list(spec.beta) + list(spec.p.values())
    if not all(math.isfinite(v) for v in values):
        raise SpecValidationError(["all parameters must be finite"])

    for key in sorted(spec.p):
        if spec.p[key] < 0:
            problems.append(f"p[{key}] = {spec.p[key]!r} is negative")
    total = math.fsum(spec.p.values())
    if abs(total - 1.0) > PROB_TOL:
        problems.append(f"masses must sum to 1 (got {total!r})")

    for x1, x2, z in itertools.product((0, 1), repeat=3):
        for a in (0, 1):
            m = spec.outcome_mean(a, x1, x2, z)
            if m < -PROB_TOL or m > 1 + PROB_TOL:
                problems.append(
                    f"outcome mean for a={a} at (x1,x2,z)=({x1},{x2},{z}) is {m!r}, outside [0, 1]"
                )
    touching = []
    for z in (0, 1):
        e = spec.propensity(z)
        if e < -PROB_TOL or e > 1 + PROB_TOL:
            problems.append(f"propensity at z={z} is {e!r}, outside [0, 1]")
        elif e <= 0.0 or e >= 1.0:
            touching.append(f"propensity at z={z} is {e!r}; overlap requires 0 < e < 1")
    if problems:
        raise SpecValidationError(problems + touching)
    if touching:
        raise OverlapError(touching)
    return ValidatedPop1Spec(spec.alpha0, spec.alpha1, spec.beta, spec.p)
