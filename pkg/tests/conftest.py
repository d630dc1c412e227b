import pytest

from tbpeval.populations import Pop2Spec, make_pop1_tbp, reference_pop1_spec, pop1_joint_table, simulate

from oracles import Pop1Atoms


@pytest.fixture(scope="session")
def spec():
    return reference_pop1_spec()


@pytest.fixture(scope="session")
def table(spec):
    return pop1_joint_table(spec)


@pytest.fixture(scope="session")
def atoms(spec):
    return Pop1Atoms(spec.alpha0, spec.alpha1, spec.beta, spec.p)


@pytest.fixture(scope="session")
def pop1_big(spec, table):
    return simulate(spec, 1_000_000, seed=20240601, retain_counterfactuals=True,
                    tbp=make_pop1_tbp("h1", table))


@pytest.fixture(scope="session")
def pop2_big():
    return simulate(Pop2Spec(), 1_000_000, seed=7, retain_counterfactuals=True)
