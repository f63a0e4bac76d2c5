import pytest

from kieferweiss.expfam import binomial, poisson

from oracles import enumerate_paths


@pytest.fixture
def path_oracle():
    return enumerate_paths


@pytest.fixture(scope="session")
def table1_plan():
    from kieferweiss.design import DesignProblem, design_modified
    pr = DesignProblem(poisson(), 0.5, 0.7, 0.58464, 305.94, 326.39)
    return design_modified(pr)


@pytest.fixture(scope="session")
def table3_plan():
    from kieferweiss.design import DesignProblem, design_modified
    pr = DesignProblem(binomial(3), 0.05, 0.08, 0.06193, 450.00, 489.75)
    return design_modified(pr)
