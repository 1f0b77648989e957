import numpy as np
import pytest

from alpertlab import make_grid
from alpertlab.measure import lebesgue_measure, power_measure
from alpertlab.operator import KernelSpec, default_kernel
from alpertlab.operator import testing_constant as tconst
from alpertlab.poisson import muckenhoupt_a2
from alpertlab.t1 import run_t1_experiment


def test_zero_kernel_report():
    g = make_grid(1, 4)
    mu = lebesgue_measure(g)
    spec = KernelSpec(alpha=0.5, delta=10.0, big_r=20.0)  # vanishes on the box
    rep = run_t1_experiment(mu, mu, spec, 0.1)
    assert rep.n_value == 0.0
    assert np.isnan(rep.ratio_lower) and np.isnan(rep.ratio_upper)
    assert rep.notes


def test_basic_report_fields():
    g = make_grid(1, 4)
    sigma = power_measure(g, 1.0)
    omega = lebesgue_measure(g)
    spec = default_kernel(g, 0.5)
    rep = run_t1_experiment(sigma, omega, spec, 0.1)
    assert rep.n_value > 0
    assert rep.ratio_lower <= 1 + 1e-6
    assert np.isfinite(rep.ratio_upper) and rep.ratio_upper > 0
    assert rep.sqrt_a2 == pytest.approx(np.sqrt(muckenhoupt_a2(sigma, omega, 0.5).value))
    assert rep.a2_over_norm == pytest.approx(rep.sqrt_a2 / rep.n_value)
    assert rep.t_fwd > 0 and rep.t_dual > 0


def test_riesz_kernel_report():
    g = make_grid(1, 4)
    sigma = lebesgue_measure(g)
    omega = power_measure(g, -0.5)
    spec = default_kernel(g, 0.0, "riesz")
    rep = run_t1_experiment(sigma, omega, spec, 0.0)
    assert rep.ratio_lower <= 1 + 1e-6
    assert np.isfinite(rep.a2_over_norm)


def test_triple_testing_reduction():
    """Triple testing is controlled by cube testing + sqrt(A2) + a norm slack."""
    g = make_grid(1, 5)
    sigma = power_measure(g, 1.0)
    omega = lebesgue_measure(g)
    spec = default_kernel(g, 0.5)
    s = 0.1
    rep = run_t1_experiment(sigma, omega, spec, s)
    triple = tconst(spec, sigma, omega, s, 1, mode="triple")
    eps2 = 0.1
    slack = triple.value - eps2 * rep.n_value
    implied_c = max(slack, 0.0) / (rep.t_fwd + rep.sqrt_a2)
    assert np.isfinite(implied_c)
    assert implied_c < 50.0
