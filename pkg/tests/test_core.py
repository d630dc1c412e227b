import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbpeval.core import (
    CELL_ORDER,
    EmpiricalDistribution,
    OverlapError,
    Pop1Spec,
    SpecValidationError,
    ValidatedPop1Spec,
    build_empirical_distribution,
    eta_at,
    eta_per_record,
    validate_pop1_spec,
)
from tbpeval.populations import reference_pop1_spec

from oracles import triangular_cdf


def test_ecdf_with_ties():
    d = build_empirical_distribution([1, 2, 2, 3])
    assert d.cdf_at(2) == 0.75
    assert d.pmf_at(2) == 0.5
    assert d.cdf_at(1.5) == 0.25
    assert d.pmf_at(1.5) == 0.0


def test_ecdf_single_atom():
    d = build_empirical_distribution([5])
    assert d.cdf_at(5) == 1.0
    assert d.pmf_at(5) == 1.0


def test_ecdf_triangular_at_one():
    rng = np.random.default_rng(11)
    v = rng.random(10_000) + rng.random(10_000)
    d = build_empirical_distribution(v)
    assert abs(d.cdf_at(1.0) - triangular_cdf(1.0)) < 0.02


def test_ecdf_errors():
    with pytest.raises(ValueError, match="empty sample"):
        build_empirical_distribution([])
    with pytest.raises(ValueError, match="index 2"):
        build_empirical_distribution([1.0, 2.0, math.nan])


def test_eta_examples():
    assert eta_at(build_empirical_distribution([3.0]), 3.0) == 1.0
    d = build_empirical_distribution([0.0, 1.0])
    assert eta_at(d, 0.0) == 0.5
    assert eta_at(d, 1.0) == 1.5


def test_eta_continuous_limit_off_atoms():
    # no point mass: eta reduces to 2F
    d = build_empirical_distribution(np.linspace(0, 1, 1001))
    assert eta_at(d, 0.50005) == pytest.approx(2 * d.cdf_at(0.50005))


def test_from_masses_pools_equal_values():
    d = EmpiricalDistribution.from_masses([0.5, 0.0, 0.5], [0.25, 0.5, 0.25])
    np.testing.assert_array_equal(d.atoms, [0.0, 0.5])
    np.testing.assert_allclose(d.masses, [0.5, 0.5])


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=60))
def test_ecdf_properties(values):
    d = build_empirical_distribution(values)
    n = len(values)
    assert np.all(np.diff(d.cdf) >= 0)
    assert d.cdf[-1] == 1.0
    assert np.all(d.masses >= 1 / n - 1e-15)
    assert abs(math.fsum(d.masses) - 1) < 1e-12
    eta = d.eta()
    assert np.all(eta > 0)
    assert np.all(eta <= 2 - d.masses + 1e-15)
    # E[eta(H)] = 1 for any discrete law
    assert abs(math.fsum(d.masses * eta) - 1) < 1e-12
    per_record = eta_per_record(values)
    assert abs(per_record.mean() - 1) < 1e-12


def test_reference_spec_valid():
    spec = validate_pop1_spec(reference_pop1_spec())
    assert isinstance(spec, ValidatedPop1Spec)


def test_printed_masses_do_not_sum_to_one():
    with pytest.raises(SpecValidationError, match="sum to 1"):
        validate_pop1_spec(reference_pop1_spec(normalize=False))


def test_beta1_too_large_invalid():
    with pytest.raises(SpecValidationError) as info:
        validate_pop1_spec(reference_pop1_spec(beta1=0.95))
    assert not isinstance(info.value, OverlapError)
    assert any("z=1" in v for v in info.value.violations)


def test_masses_summing_to_point_nine():
    spec = reference_pop1_spec()
    bad = spec.replace(p={k: v * 0.9 for k, v in spec.p.items()})
    with pytest.raises(SpecValidationError, match="masses must sum to 1"):
        validate_pop1_spec(bad)


def test_overlap_is_distinct_error():
    spec = reference_pop1_spec(beta1=1 - 0.120)
    with pytest.raises(OverlapError):
        validate_pop1_spec(spec)
    with pytest.raises(OverlapError):
        validate_pop1_spec(spec.replace(beta=(0.0, 0.5)))


def test_outcome_mean_violation_names_cell():
    spec = reference_pop1_spec().replace(alpha13=0.5)
    with pytest.raises(SpecValidationError, match=r"a=1 at \(x1,x2,z\)=\(1,0,1\)"):
        validate_pop1_spec(spec)


def test_negative_mass_reported():
    spec = reference_pop1_spec()
    p = dict(spec.p)
    p["111"], p["110"] = p["111"] + 0.2, -0.2 + p["110"]
    with pytest.raises(SpecValidationError, match=r"p\[110\]"):
        validate_pop1_spec(spec.replace(p=p))


@settings(max_examples=30)
@given(st.randoms(use_true_random=False))
def test_validation_invariant_to_cell_storage_order(rnd):
    spec = reference_pop1_spec()
    keys = list(CELL_ORDER)
    rnd.shuffle(keys)
    shuffled = Pop1Spec(spec.alpha0, spec.alpha1, spec.beta, {k: spec.p[k] for k in keys})
    assert validate_pop1_spec(shuffled) == validate_pop1_spec(spec)
    bad = shuffled.replace(beta1=0.95)
    with pytest.raises(SpecValidationError):
        validate_pop1_spec(bad)


def test_config_roundtrip():
    spec = reference_pop1_spec()
    assert Pop1Spec.from_config(spec.to_config()) == spec
