import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robin_bayes.fem_laplace import (
    LaplaceSystem,
    ScalarField,
    solve_laplace,
    trace_on_gamma,
)
from robin_bayes.mesh import BoundaryTag, boundary_nodes, build_rect_mesh, dirichlet_nodes
from robin_bayes.observation import ModelSpec, Sinusoid
from robin_bayes.verification import laplace_mms_errors, observed_orders

H = Sinusoid(10.0, 12.0, 1.0)


def test_zero_data_gives_zero(small_mesh):
    u = solve_laplace(small_mesh, lambda x: 1.0 + x, 0.0)
    assert np.abs(u.values).max() < 1e-14


def test_dirichlet_nodes_exactly_zero(small_mesh):
    u = solve_laplace(small_mesh, 2.0, H)
    assert np.all(u.values[dirichlet_nodes(small_mesh)] == 0.0)
    assert np.all(np.isfinite(u.values))


def test_mms_orders():
    l2, h1 = laplace_mms_errors()
    assert min(observed_orders(l2)) >= 1.8
    assert min(observed_orders(h1)) >= 0.9


def test_perturbed_stiffness_breaks_mms():
    l2, _ = laplace_mms_errors(stiffness_perturbation=0.5)
    assert min(observed_orders(l2)) < 1.8


def test_reference_configuration_regression(theta0):
    # locked against a converged solve at 400 x 50 (first computation)
    mesh = build_rect_mesh(400, 50, 1.0, 0.2)
    beta = ModelSpec().beta(theta0)
    u = solve_laplace(mesh, beta, H)
    got = trace_on_gamma(u, [0.1, 0.25, 0.5, 0.75, 0.9])
    np.testing.assert_allclose(
        got, [1.3813246111977535, 2.502577100103394, 3.189623667490332,
              2.5605019989018665, 1.7168721817888875], rtol=1e-9)


def test_residual_of_assembled_system(small_mesh, theta0):
    beta = ModelSpec().beta(theta0)
    system = LaplaceSystem.build(small_mesh)
    u = solve_laplace(small_mesh, beta, H, system=system)
    A = system.matrix(beta)
    b = system.load(H)
    free = system.free
    r = (A @ u.values - b)[free]
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(b[free])


def test_assembly_repeatable(small_mesh):
    a = LaplaceSystem.build(small_mesh).matrix(lambda x: np.exp(np.sin(x)))
    b = LaplaceSystem.build(small_mesh).matrix(lambda x: np.exp(np.sin(x)))
    assert abs(a - b).max() <= 1e-14 * abs(a).max()


@pytest.mark.parametrize("beta", [0.0, -1.0, lambda x: x - 0.5])
def test_rejects_nonpositive_beta(small_mesh, beta):
    with pytest.raises(ValueError):
        solve_laplace(small_mesh, beta, H)


@settings(max_examples=15, deadline=None)
@given(c=st.lists(st.floats(-2, 2), min_size=5, max_size=5),
       amp=st.floats(0.0, 20.0), freq=st.floats(0.0, 20.0))
def test_maximum_principle(c, amp, freq):
    mesh = build_rect_mesh(12, 4, 1.0, 0.2)
    h = Sinusoid(amp, freq, 1.0)  # non-negative since offset = 1
    u = solve_laplace(mesh, ModelSpec().beta(np.array(c)), h)
    assert u.values.min() >= -1e-10 * max(1.0, np.abs(u.values).max())


@settings(max_examples=15, deadline=None)
@given(c=st.lists(st.floats(-1.5, 1.5), min_size=5, max_size=5),
       bump=st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5))
def test_stronger_drag_lowers_potential(c, bump):
    mesh = build_rect_mesh(12, 4, 1.0, 0.2)
    c = np.array(c)
    b2 = ModelSpec().beta(c)
    # b1 >= b2 pointwise
    b1 = lambda x: b2(x) * (1.0 + np.polyval(np.abs(bump), x) ** 2)
    xs = np.linspace(0, 1, 41)
    u1 = trace_on_gamma(solve_laplace(mesh, b1, H), xs)
    u2 = trace_on_gamma(solve_laplace(mesh, b2, H), xs)
    assert np.all(u1 <= u2 + 1e-10)


def test_trace_examples(small_mesh):
    zero = ScalarField(small_mesh, np.zeros(small_mesh.n_nodes))
    np.testing.assert_array_equal(trace_on_gamma(zero, [0.0, 0.3, 1.0]), 0.0)

    values = np.random.default_rng(0).normal(size=small_mesh.n_nodes)
    f = ScalarField(small_mesh, values)
    top = boundary_nodes(small_mesh, BoundaryTag.GammaTop)
    xs = small_mesh.nodes[top, 0]
    np.testing.assert_allclose(trace_on_gamma(f, xs), values[top], rtol=0, atol=1e-15)
    mids = 0.5 * (xs[:-1] + xs[1:])
    np.testing.assert_allclose(trace_on_gamma(f, mids), 0.5 * (values[top[:-1]] + values[top[1:]]),
                               atol=1e-14)


@pytest.mark.parametrize("x", [-0.01, 1.01, np.nan])
def test_trace_rejects_outside(small_mesh, x):
    f = ScalarField(small_mesh, np.zeros(small_mesh.n_nodes))
    with pytest.raises(ValueError):
        trace_on_gamma(f, [0.5, x])
