import json
from fractions import Fraction

import mpmath as mp
import pytest

from anosovlab.mparith import bits
from anosovlab.torus_maps import (
    BaseMap,
    TrigTerm,
    enumerate_periodic_orbits,
    invariant_directions,
    lattice_point_count,
    lattice_points_brute,
    make_linear_map,
    make_perturbed_map,
    map_from_json,
    map_to_json,
    multipliers_batch,
    orbit_cycle,
    orbit_multipliers,
    orbits_to_csv,
    verify_anosov_cones,
)

CAT = [[2, 1], [1, 1]]


def test_linear_eigendata_closed_form():
    m = make_linear_map(CAT)
    with bits(128):
        ll, lm, e_u, e_s = m.eig_linear()
        lam = mp.e ** ll
        mu = mp.e ** lm
        assert abs(lam - (3 + mp.sqrt(5)) / 2) < mp.mpf(2) ** -120
        assert abs(mu - (3 - mp.sqrt(5)) / 2) < mp.mpf(2) ** -120
        assert abs(e_u[1] - (mp.sqrt(5) - 1) / 2) < mp.mpf(2) ** -120
        assert abs(e_s[1] + (1 + mp.sqrt(5)) / 2) < mp.mpf(2) ** -120


@pytest.mark.parametrize("bad", [[[1, 1], [1, 0]], [[2, 1], [1, 0]], [[0, 1], [-1, 0]]])
def test_rejects_non_hyperbolic_or_non_unimodular(bad):
    with pytest.raises(ValueError):
        make_linear_map(bad)


def test_rejects_non_unimodular():
    with pytest.raises(ValueError):
        make_linear_map([[3, 1], [1, 1]])  # det 2


def test_period_point_counts_small():
    counts = [lattice_point_count(tuple(map(tuple, CAT)), n) for n in range(1, 6)]
    assert counts == [1, 5, 16, 45, 121]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_brute_force_lattice_oracle(n):
    """The SNF enumeration agrees point-for-point with a direct grid scan."""
    m = make_linear_map(CAT)
    brute = set(lattice_points_brute(m.linear, n))
    orbits = enumerate_periodic_orbits(m, n)
    pts = set()
    for o in orbits:
        if n % o.period_N == 0:
            for p in orbit_cycle(m, o):
                pts.add((p[0], p[1]))
    assert pts == brute
    assert len(brute) == lattice_point_count(m.linear, n)


def test_cycle_decomposition_counts():
    m = make_linear_map(CAT)
    orbits = enumerate_periodic_orbits(m, 6)
    per = {}
    for o in orbits:
        per[o.period_N] = per.get(o.period_N, 0) + 1
    for n in range(1, 7):
        total = sum(d * per.get(d, 0) for d in range(1, n + 1) if n % d == 0)
        assert total == lattice_point_count(m.linear, n)


def test_perturbed_det_at_origin(pert_map_small):
    with bits(96):
        d = pert_map_small.det_derivative((mp.mpf(0), mp.mpf(0)))
        assert abs(d - (1 + 2 * mp.pi / 100)) < mp.mpf(2) ** -80


def test_large_epsilon_rejected():
    with pytest.raises(ValueError, match="cone certificate failed"):
        make_perturbed_map(CAT, [TrigTerm((1, 0), (1, 0), "sin")], Fraction(1, 2))


def test_zero_epsilon_matches_linear():
    m0 = make_linear_map(CAT)
    mz = BaseMap(linear=m0.linear, terms=(TrigTerm((1, 0), (1, 0), "sin"),), epsilon=Fraction(0))
    x = (Fraction(3, 7), Fraction(2, 5))
    assert mz.apply(x) == m0.apply(x)
    assert mz.is_linear


def test_cone_certificate_cat():
    rep = verify_anosov_cones(make_linear_map(CAT), 32)
    assert rep.passed
    assert rep.min_unstable_expansion > 1.5


def test_perturbed_orbit_continuation_counts(pert_map_small):
    lin = enumerate_periodic_orbits(make_linear_map(CAT), 5)
    pert = enumerate_periodic_orbits(pert_map_small, 5)
    assert len(lin) == len(pert)
    by_id = {o.symbolic_id: o for o in pert}
    m0 = make_linear_map(CAT)
    for o in lin:
        mate = by_id[o.symbolic_id]
        # the lex-min representative may sit at another cycle position, so
        # measure distance from the continued point to the whole seed cycle
        best = 1.0
        for p in orbit_cycle(m0, o):
            dx = abs(float(p[0]) - mate.representative[0]) % 1.0
            dy = abs(float(p[1]) - mate.representative[1]) % 1.0
            best = min(best, min(dx, 1 - dx) + min(dy, 1 - dy))
        assert best < 0.1  # O(eps) displacement with a generous constant


def test_fixed_point_multipliers_closed_form(pert_map_small, pert_fixed_point):
    with bits(160):
        m = orbit_multipliers(pert_map_small, pert_fixed_point, 160)
        # eigenvalues of [[2 + 2 pi eps, 1], [1, 1]]
        tr = 3 + 2 * mp.pi / 100
        det = 1 + 2 * mp.pi / 100
        disc = mp.sqrt(tr * tr - 4 * det)
        assert abs(m.mu - (tr - disc) / 2) < mp.mpf(2) ** -140
        assert abs(m.lam - (tr + disc) / 2) < mp.mpf(2) ** -140
        assert abs(m.jacobian - det) < mp.mpf(2) ** -140


def test_multiplier_product_identity(pert_map_small):
    """mu * lambda equals the cycle determinant product to 1e-30 relative."""
    orbits = enumerate_periodic_orbits(pert_map_small, 4)
    with bits(192):
        for o in orbits[:8]:
            m = orbit_multipliers(pert_map_small, o, 192)
            cyc = orbit_cycle(pert_map_small, o, 192)
            prod = mp.mpf(1)
            for p in cyc:
                prod *= pert_map_small.det_derivative(p)
            assert abs(m.jacobian - prod) / prod < mp.mpf("1e-30")


def test_multipliers_invariant_under_rerooting(cat_map):
    orbits = [o for o in enumerate_periodic_orbits(cat_map, 3) if o.period_N == 3]
    o = orbits[0]
    cyc = orbit_cycle(cat_map, o)
    with bits(160):
        base = orbit_multipliers(cat_map, o, 160)
        from anosovlab.torus_maps import BasePeriodicOrbit

        rerooted = BasePeriodicOrbit(
            period_N=3,
            representative=cyc[1],
            lattice_class=o.lattice_class,
            symbolic_id=o.symbolic_id + ":shift",
            seed=None,
        )
        again = orbit_multipliers(cat_map, rerooted, 160)
        assert abs(base.log_mu - again.log_mu) < mp.mpf(2) ** -140
        assert abs(base.log_lambda - again.log_lambda) < mp.mpf(2) ** -140


def test_conservative_jacobian_exact(cat_map):
    orbits = enumerate_periodic_orbits(cat_map, 4)
    with bits(128):
        for o in orbits:
            m = orbit_multipliers(cat_map, o, 128)
            assert m.log_jacobian == 0


def test_invariant_directions_linear(cat_map):
    with bits(128):
        s1, u1 = invariant_directions(cat_map, (mp.mpf("0.3"), mp.mpf("0.7")), 128)
        s2, u2 = invariant_directions(cat_map, (mp.mpf("0.1"), mp.mpf("0.9")), 128)
        assert abs(s1[0] - s2[0]) == 0 and abs(s1[1] - s2[1]) == 0
        assert abs(u1[1] / u1[0] - (mp.sqrt(5) - 1) / 2) < mp.mpf(2) ** -110


def test_invariant_directions_perturbed(pert_map_small):
    with bits(128):
        s, u = invariant_directions(pert_map_small, (mp.mpf(0), mp.mpf(0)), 128)
        _, _, e_u, e_s = pert_map_small.eig_linear()
        lin_s = (1, e_s[1])
        ang_s = abs(s[1] / s[0] - lin_s[1] / lin_s[0])
        assert ang_s < 0.15  # O(eps) angle with slack
        # invariance: Df e^s parallel to e^s at the image, contraction < 1
        d = pert_map_small.derivative((mp.mpf(0), mp.mpf(0)))
        v = (d[0][0] * s[0] + d[0][1] * s[1], d[1][0] * s[0] + d[1][1] * s[1])
        s_img, _ = invariant_directions(pert_map_small, pert_map_small.apply((mp.mpf(0), mp.mpf(0))), 128)
        cross = v[0] * s_img[1] - v[1] * s_img[0]
        assert abs(cross) < mp.mpf(2) ** -100
        assert mp.sqrt(v[0] ** 2 + v[1] ** 2) < 1


def test_stable_direction_invariance_on_orbits(pert_map_small):
    orbits = [o for o in enumerate_periodic_orbits(pert_map_small, 3) if o.period_N == 3][:2]
    with bits(128):
        for o in orbits:
            cyc = orbit_cycle(pert_map_small, o, 128)
            for i, p in enumerate(cyc):
                s, _ = invariant_directions(pert_map_small, p, 128)
                d = pert_map_small.derivative(p)
                v = (d[0][0] * s[0] + d[0][1] * s[1], d[1][0] * s[0] + d[1][1] * s[1])
                s_next, _ = invariant_directions(pert_map_small, cyc[(i + 1) % 3], 128)
                cross = v[0] * s_next[1] - v[1] * s_next[0]
                assert abs(cross) < mp.mpf(2) ** -96
                assert mp.sqrt(v[0] ** 2 + v[1] ** 2) < 1


def test_map_json_roundtrip(pert_map_small):
    obj = map_to_json(pert_map_small)
    again = map_from_json(json.loads(json.dumps(obj)))
    assert again.linear == pert_map_small.linear
    assert again.epsilon == pert_map_small.epsilon
    assert again.terms == pert_map_small.terms


def test_orbit_csv_columns(cat_map):
    orbits = enumerate_periodic_orbits(cat_map, 2)
    text = orbits_to_csv(cat_map, orbits)
    header = text.splitlines()[0]
    assert header == "symbolic_id,N,x1,x2,mu,lambda,jacobian"
    assert len(text.splitlines()) == len(orbits) + 1


def test_reversed_map_roundtrip(pert_map_small):
    from anosovlab.torus_maps import ReversedMap

    rev = ReversedMap(pert_map_small, 128)
    with bits(128):
        x = (mp.mpf("0.31"), mp.mpf("0.57"))
        y = rev.apply(x)
        back = rev.apply_inverse(y)
        assert abs(back[0] - x[0]) + abs(back[1] - x[1]) < mp.mpf(2) ** -110
