"""Shared model fixtures. Expensive objects are session-scoped."""

from fractions import Fraction

import pytest

from anosovlab.shadowing import excursion_time, find_homoclinic, shadow_series
from anosovlab.suspension import Roof, RoofTerm, make_suspension, unit_roof
from anosovlab.torus_maps import (
    TrigTerm,
    enumerate_periodic_orbits,
    make_linear_map,
    make_perturbed_map,
)

CAT = [[2, 1], [1, 1]]


@pytest.fixture(scope="session")
def cat_map():
    return make_linear_map(CAT)


@pytest.fixture(scope="session")
def pert_map_small():
    return make_perturbed_map(CAT, [TrigTerm((1, 0), (1, 0), "sin")], Fraction(1, 100))


@pytest.fixture(scope="session")
def unit_model(cat_map):
    return make_suspension(cat_map, unit_roof(), 192)


@pytest.fixture(scope="session")
def cos_model(cat_map):
    roof = Roof(c0=1, terms=(RoofTerm((1, 0), Fraction(1, 4), "cos"),))
    return make_suspension(cat_map, roof, 192)


@pytest.fixture(scope="session")
def diss_model(pert_map_small):
    roof = Roof(
        c0=1,
        terms=(RoofTerm((1, 0), Fraction(559, 1000), "sin"),),
        logdet_coeff=1,
    )
    return make_suspension(pert_map_small, roof, 256)


@pytest.fixture(scope="session")
def cat_fixed_point(cat_map):
    return enumerate_periodic_orbits(cat_map, 1)[0]


@pytest.fixture(scope="session")
def pert_fixed_point(pert_map_small):
    return enumerate_periodic_orbits(pert_map_small, 1)[0]


@pytest.fixture(scope="session")
def unit_anchor(unit_model, cat_fixed_point):
    return unit_model.flow_orbit(cat_fixed_point)


@pytest.fixture(scope="session")
def cos_anchor(cos_model, cat_fixed_point):
    return cos_model.flow_orbit(cat_fixed_point)


@pytest.fixture(scope="session")
def diss_anchor(diss_model, pert_fixed_point):
    return diss_model.flow_orbit(pert_fixed_point)


@pytest.fixture(scope="session")
def diss_hom(diss_model, diss_anchor):
    return find_homoclinic(diss_model, diss_anchor, (1, 1))


@pytest.fixture(scope="session")
def diss_tprime(diss_model, diss_hom):
    return excursion_time(diss_model, diss_hom)


@pytest.fixture(scope="session")
def diss_series(diss_model, diss_hom):
    return shadow_series(diss_model, diss_hom, (10, 40))


@pytest.fixture(scope="session")
def cos_hom(cos_model, cos_anchor):
    return find_homoclinic(cos_model, cos_anchor, (1, 1))


@pytest.fixture(scope="session")
def cos_series(cos_model, cos_hom):
    return shadow_series(cos_model, cos_hom, (10, 36))
