import numpy as np
import pytest

from alpertlab import make_grid
from alpertlab.leaffunc import LeafFunction
from alpertlab.measure import DiscreteMeasure, lebesgue_measure, power_measure
from alpertlab.sobolev import (
    SobolevParams,
    alternating_function,
    ball_mass,
    duality_pairing,
    equivalence_ratio,
    indicator_tower_sum,
    make_ensemble,
    modulus_asymmetry_slope,
    norm_continuous,
    norm_difference,
    norm_dyadic,
    root_energy,
    _circle_quarter_area,
)
from alpertlab.wavelet import get_system


def test_wavelet_norm_exact(pow1):
    g = pow1.grid
    system = get_system(pow1, 2)
    for q in [g.root, g.cube(2, (3,)), g.cube(4, (9,))]:
        basis = system.basis(q)
        for a in range(basis.dim):
            f = basis.functions(g)[a]
            co = system.analyze(f)
            for s in (-0.25, 0.0, 0.25):
                assert norm_dyadic(co, s) == pytest.approx(q.side**-s, rel=1e-12)


def test_norm_s0_is_l2_minus_root(pow1, rng):
    system = get_system(pow1, 1)
    f = LeafFunction.from_values(pow1.grid, rng.standard_normal(pow1.grid.n_leaves))
    co = system.analyze(f)
    hom = norm_dyadic(co, 0.0) ** 2
    assert hom + root_energy(co) ** 2 == pytest.approx(co.l2_sq, rel=1e-12)


def test_indicator_norm_two_sided(casc1):
    g = casc1.grid
    system = get_system(casc1, 1)
    for s in (-0.25, 0.0, 0.25):
        for d in range(1, g.max_depth):
            for k in (0, (1 << d) - 1, (1 << d) // 2):
                q = g.cube(d, (k,))
                vals = np.zeros(g.n_leaves)
                vals[slice(*q.leaf_span()[0])] = 1.0
                co = system.analyze(LeafFunction.from_values(g, vals))
                target = q.side**-s * np.sqrt(casc1.cube_mass(q))
                ratio = norm_dyadic(co, s) / target
                assert 0.1 <= ratio <= 10.0


def test_degenerate_indicator_norm_zero():
    # the measure 1_{[1/2,1)} dx with f = 1_{[1/2,1)}: all detail coefficients vanish
    g = make_grid(1, 5)
    dens = np.zeros(32)
    dens[16:] = 1.0
    mu = DiscreteMeasure(g, dens)
    system = get_system(mu, 1)
    f = LeafFunction.from_values(g, (np.arange(32) >= 16).astype(float))
    co = system.analyze(f)
    for s in (0.1, 0.25, 0.5):
        assert norm_dyadic(co, s) == 0.0


def test_difference_norm_constant_zero(leb1):
    f = LeafFunction.from_values(leb1.grid, np.full(leb1.grid.n_leaves, 2.5))
    assert norm_difference(leb1, f, 0.3, 1) == pytest.approx(0.0, abs=1e-12)


def test_difference_norm_rejects_nonpositive_s(leb1):
    f = LeafFunction.from_values(leb1.grid, np.ones(leb1.grid.n_leaves))
    with pytest.raises(ValueError):
        norm_difference(leb1, f, 0.0, 1)


def test_difference_double_integral_identity(pow1, rng):
    """kappa=1: the difference norm equals the double-integral form exactly."""
    g = pow1.grid
    vals = rng.standard_normal(g.n_leaves)
    f = LeafFunction.from_values(g, vals)
    s = 0.2
    lab = norm_difference(pow1, f, s, 1) ** 2
    # oracle: direct O(N^2) pair sums per cube
    masses = pow1.leaf_masses
    acc = 0.0
    for d in range(g.max_depth + 1):
        for q in g.cubes_at_depth(d):
            lo, hi = q.leaf_span()[0]
            m = masses[lo:hi]
            v = vals[lo:hi]
            tot = m.sum()
            if tot <= 0:
                continue
            pair = np.sum(m[:, None] * m[None, :] * (v[:, None] - v[None, :]) ** 2)
            acc += 4.0 ** (s * d) * 0.5 * pair / tot
    assert lab == pytest.approx(acc, rel=1e-9)


def test_difference_norm_of_haar(leb1):
    g = leb1.grid
    system = get_system(leb1, 1)
    h = system.basis(g.root).functions(g)[0]
    s = 0.25
    val = norm_difference(leb1, h, s, 1)
    assert np.isfinite(val)
    assert 0.5 <= val / (g.root.side**-s) <= 3.0


def test_continuous_norm_constant_zero(leb1):
    f = LeafFunction.from_values(leb1.grid, np.ones(leb1.grid.n_leaves))
    assert norm_continuous(leb1, f, 0.25) == 0.0


def test_continuous_norm_refined_mesh():
    """Quadrature stability: value moves < 5% under one mesh refinement."""
    vals5 = None
    out = []
    for depth in (5, 6):
        g = make_grid(1, depth)
        mu = lebesgue_measure(g)
        vv = np.zeros(g.n_leaves)
        vv[: g.n_leaves // 2] = 1.0
        f = LeafFunction.from_values(g, vv)
        out.append(norm_continuous(mu, f, 0.25))
    assert out[0] > 0
    assert abs(out[1] - out[0]) / out[0] < 0.05


def test_circle_quarter_area_against_quadrature():
    # oracle: fine Riemann quadrature of the chord length
    r = 0.7
    us = np.linspace(-r, r, 400_001)
    s_of_u = np.sqrt(np.maximum(r * r - us**2, 0.0))
    for x, y in [(0.2, 0.3), (-0.1, 0.5), (0.6, -0.2), (0.7, 0.7), (-0.4, -0.4), (0.0, 0.0)]:
        chord = np.clip(np.minimum(y, s_of_u) + s_of_u, 0.0, None)
        chord[us > x] = 0.0
        oracle = float(np.trapezoid(chord, us))
        exact = float(_circle_quarter_area(np.array(x), np.array(y), r))
        assert exact == pytest.approx(oracle, abs=5e-6)


def test_ball_mass_1d_exact(pow1):
    v = ball_mass(pow1, (0.5,), 0.25)
    assert v == pytest.approx(pow1.interval_mass_1d(0.25, 0.75), rel=1e-14)


def test_ball_mass_2d_lebesgue():
    g = make_grid(2, 4)
    mu = lebesgue_measure(g)
    assert ball_mass(mu, (0.5, 0.5), 0.25) == pytest.approx(np.pi * 0.25**2, rel=1e-10)
    # clipped at the corner: quarter disc
    assert ball_mass(mu, (0.0, 0.0), 0.25) == pytest.approx(np.pi * 0.25**2 / 4, rel=1e-10)


def test_continuous_vs_difference_equivalence(rng):
    g = make_grid(1, 6)
    mu = power_measure(g, 1.0)
    ensemble = make_ensemble(mu, 1, 12, rng)
    rep = equivalence_ratio(
        lambda f: norm_continuous(mu, f, 0.1),
        lambda f: norm_difference(mu, f, 0.1, 1),
        ensemble,
    )
    assert 1 / 50 < rep.ratio_min <= rep.ratio_max < 50


def test_duality_pairing(pow1, rng):
    g = pow1.grid
    system = get_system(pow1, 2)
    q = g.cube(2, (2,))
    basis = system.basis(q)
    f = basis.functions(g)[0]
    co = system.analyze(f)
    assert duality_pairing(co, co) == pytest.approx(1.0, abs=1e-10)
    other = system.analyze(basis.functions(g)[1])
    assert duality_pairing(co, other) == pytest.approx(0.0, abs=1e-10)
    # random pair obeys the two-norm bound
    fa = LeafFunction.from_values(g, rng.standard_normal(g.n_leaves))
    fb = LeafFunction.from_values(g, rng.standard_normal(g.n_leaves))
    ca, cb = system.analyze(fa), system.analyze(fb)
    s = 0.2
    assert abs(duality_pairing(ca, cb)) <= norm_dyadic(ca, s) * norm_dyadic(cb, -s) * (1 + 1e-9)


def test_equivalence_same_norm(pow1, rng):
    system = get_system(pow1, 1)
    ensemble = make_ensemble(pow1, 1, 9, rng)
    rep = equivalence_ratio(
        lambda f: norm_dyadic(system.analyze(f), 0.1),
        lambda f: norm_dyadic(system.analyze(f), 0.1),
        ensemble,
    )
    assert rep.ratio_min == pytest.approx(1.0) and rep.ratio_max == pytest.approx(1.0)


def test_kappa_parseval_equivalence_s0(pow1, rng):
    """kappa=1 vs kappa=2 full norms both equal L2 at s=0 (Parseval)."""
    g = pow1.grid
    sys1, sys2 = get_system(pow1, 1), get_system(pow1, 2)
    f = LeafFunction.from_values(g, rng.standard_normal(g.n_leaves))
    n1 = norm_dyadic(sys1.analyze(f), 0.0, include_coarse=True)
    n2 = norm_dyadic(sys2.analyze(f), 0.0, include_coarse=True)
    assert n1 == pytest.approx(n2, rel=1e-10)
    assert n1**2 == pytest.approx(f.inner(pow1, f), rel=1e-10)


def test_empty_ensemble_rejected(pow1):
    with pytest.raises(ValueError):
        equivalence_ratio(lambda f: 1.0, lambda f: 1.0, [])


def test_tower_sum_monotone_growth():
    """A finitely-supported measure fails dyadic reverse doubling: the tower
    sum above its support grows without bound as the grid deepens."""
    sums = []
    for depth in (5, 6, 7, 8):
        g = make_grid(1, depth)
        dens = np.zeros(g.n_leaves)
        dens[:8] = 1.0  # fixed leaf-count support: mass saturates above scale 8h
        mu = DiscreteMeasure(g, dens)
        q = g.cube(depth, (0,))
        sums.append(indicator_tower_sum(mu, q, -0.25))
    assert all(b > a * 1.1 for a, b in zip(sums, sums[1:]))


def test_modulus_asymmetry_slope():
    g = make_grid(1, 10)
    mu = lebesgue_measure(g)
    for s in (0.1, 0.2):
        slope, ratios = modulus_asymmetry_slope(mu, s, [2, 4, 8, 16])
        assert all(r > 0 for r in ratios)
        assert abs(slope - 2 * s) <= 0.3 * 2 * s


def test_sobolev_params_validation(pow1):
    with pytest.raises(ValueError):
        SobolevParams(1.5, 1, pow1.grid)
    from alpertlab.measure import doubling_exponents

    params = SobolevParams(0.9, 1, pow1.grid)
    with pytest.warns(UserWarning):
        params.check_regime(doubling_exponents(pow1))


def test_standard_vs_shifted_grid_norms(rng):
    g = make_grid(1, 6)
    mu = power_measure(g, 1.0)
    shifted = make_grid(1, 6, 5)
    sys_std = get_system(mu, 1)
    sys_sh = get_system(mu, 1, shifted)
    ensemble = make_ensemble(mu, 1, 15, rng)
    for s in (0.1, -0.1):
        rep = equivalence_ratio(
            lambda f: norm_dyadic(sys_std.analyze(f), s),
            lambda f: norm_dyadic(sys_sh.analyze(f), s),
            ensemble,
        )
        assert 1 / 50 < rep.ratio_min <= rep.ratio_max < 50
