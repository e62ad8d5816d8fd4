import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formkit.errors import NotSolvable
from formkit.forms import DomainMetric, FormMatrix, coercivity_constant, q_closed_constants
from formkit.models import ModelSpec, build
from formkit.representation import (
    adjoint_theorem_check,
    associated_operator,
    eigencheck,
    gram_operator,
    metric_independence_check,
    symmetry_selfadjoint_check,
    verify_representation,
)
from formkit.solvability import Perturbation, in_P0

from conftest import random_complex, random_hermitian, random_hpd

seeds = st.integers(0, 2**32 - 1)


def qform(m, g=None):
    m = np.asarray(m, dtype=complex)
    g = np.eye(m.shape[0]) if g is None else g
    return q_closed_constants(FormMatrix(m), DomainMetric(g))


def inverse_iteration(a, shift, rng, steps=60):
    """Eigenvalue nearest ``shift`` by shifted inverse iteration from a random start."""
    n = a.shape[0]
    lu = a - shift * np.eye(n)
    v = random_complex(rng, n)
    for _ in range(steps):
        v = np.linalg.solve(lu, v)
        v /= np.linalg.norm(v)
    return np.vdot(v, a @ v)


class TestGram:
    def test_identity_metric(self, rng):
        m = random_complex(rng, (3, 3))
        g = gram_operator(qform(m))
        assert np.allclose(g.matrix, m) and g.residual < 1e-14

    def test_diagonal_division(self):
        g = gram_operator(qform(np.diag([2.0, 3.0]), np.diag([2.0, 1.0])))
        assert np.allclose(g.matrix, np.diag([1.0, 3.0]))

    def test_diagonal_model(self):
        q, _ = build(ModelSpec("alternating", n=30))
        alpha = q.matrix
        assert np.allclose(gram_operator(q).matrix, alpha / (1 + np.abs(alpha)), rtol=0, atol=1e-15)

    @given(seed=seeds, n=st.integers(1, 8))
    @settings(max_examples=30, deadline=None)
    def test_sampled_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        g = random_hpd(rng, n)
        m = random_complex(rng, (n, n))
        gr = gram_operator(qform(m, g), seed=seed % 1000)
        assert gr.residual <= 1e-10 * (1 + np.linalg.norm(m))
        assert np.linalg.norm(g @ gr.matrix - m) <= 1e-9 * (1 + np.linalg.norm(m))


class TestAssociated:
    def test_identity(self):
        t = associated_operator(qform(np.eye(3)), Perturbation.zero(3))
        assert np.allclose(t.matrix, np.eye(3))
        assert abs(t.resolvent_norm - 1) < 1e-14 and abs(t.resolvent_bound - 1) < 1e-14

    def test_diagonal_model(self):
        q, p = build(ModelSpec("diagonal", alpha=(1, -2, 3.5, 1j, -4 - 2j)))
        t = associated_operator(q, p)
        assert np.max(np.abs(t.matrix - q.matrix)) <= 1e-12 * 4.5
        assert t.reconstruction_residual <= 1e-9

    def test_mult_complex(self):
        q, p = build(ModelSpec("mult_complex", step=0.5))
        t = associated_operator(q, p)
        assert t.reconstruction_residual <= 1e-12 and t.resolvent_bound_holds

    def test_not_solvable(self):
        with pytest.raises(NotSolvable):
            associated_operator(qform(np.array([[0, 1], [0, 0]])), Perturbation.zero(2))

    @given(seed=seeds, n=st.integers(1, 10))
    @settings(max_examples=40, deadline=None)
    def test_random_dense(self, seed, n):
        rng = np.random.default_rng(seed)
        g = random_hpd(rng, n)
        m = random_complex(rng, (n, n))
        b = random_complex(rng, (n, n))
        q = qform(m, g)
        p = Perturbation.dense(b)
        if not in_P0(q, p):
            return
        t = associated_operator(q, p)
        assert t.reconstruction_residual <= 1e-9
        assert t.resolvent_bound_holds
        # direct oracle for the resolvent norm
        assert abs(t.resolvent_norm - np.linalg.norm(np.linalg.inv(m + b), 2)) <= 1e-8 * t.resolvent_norm


class TestVerify:
    def test_identity(self):
        q = qform(np.eye(4))
        assert verify_representation(associated_operator(q, Perturbation.zero(4)), q) <= 1e-14

    def test_diagonal_512(self):
        q, p = build(ModelSpec("alternating", n=512))
        assert verify_representation(associated_operator(q, p), q) <= 1e-10

    def test_dense_64(self, rng):
        q = qform(random_complex(rng, (64, 64)), random_hpd(rng, 64))
        t = associated_operator(q, Perturbation.scalar(20.0, 64))
        assert verify_representation(t, q) <= 1e-10


class TestAdjointTheorem:
    def test_hermitian(self, rng):
        q = qform(random_hermitian(rng, 4))
        assert adjoint_theorem_check(q, Perturbation.scalar(1j, 4))

    def test_upper_triangular(self):
        q = qform(np.array([[1, 1], [0, 2]]))
        r = adjoint_theorem_check(q, Perturbation.zero(2))
        assert r and r.residual < 1e-15

    def test_complex_diagonal(self):
        q, p = build(ModelSpec("diagonal", alpha=(1j, 2 - 1j, -3)))
        assert adjoint_theorem_check(q, p)


class TestSymmetry:
    def test_real_diagonal(self):
        q, p = build(ModelSpec("diagonal", alpha=(1, 2, 3)))
        r = symmetry_selfadjoint_check(q, p)
        assert r and "symmetric=True selfadjoint=True" in r.detail

    def test_alternating(self):
        q, p = build(ModelSpec("alternating", n=20))
        assert symmetry_selfadjoint_check(q, p)

    def test_imaginary_identity(self):
        r = symmetry_selfadjoint_check(qform(1j * np.eye(3)), Perturbation.zero(3))
        assert r and "symmetric=False selfadjoint=False" in r.detail


class TestMetricIndependence:
    def test_scaling(self, rng):
        m = random_complex(rng, (4, 4))
        assert metric_independence_check(m, [DomainMetric(np.eye(4)), DomainMetric(2 * np.eye(4))], Perturbation.scalar(10, 4))

    def test_compatible_diagonal_metrics(self):
        q, p = build(ModelSpec("alternating", n=50))
        k = np.arange(1, 51)
        g1 = 1 + np.abs(q.matrix.real)
        metrics = [DomainMetric(g1), DomainMetric(g1 * (1 + 1 / k))]
        assert metric_independence_check(q.form, metrics, p)

    def test_random_dense(self, rng):
        m = random_complex(rng, (6, 6))
        metrics = [DomainMetric(random_hpd(rng, 6, floor=1.0)) for _ in range(3)]
        assert metric_independence_check(m, metrics, Perturbation.scalar(8, 6))

    def test_failing_metric_named(self):
        with pytest.raises(NotSolvable) as info:
            metric_independence_check(np.diag([1.0, 2.0]), [DomainMetric(np.eye(2))], Perturbation.scalar(2, 2))
        assert info.value.label == 0


class TestEigencheck:
    def test_diagonal(self):
        q = qform(np.diag([1.0, 2.0, 3.0]))
        pairs, _, ok = eigencheck(associated_operator(q, Perturbation.zero(3)), q)
        assert ok and sorted(p.value.real for p in pairs) == [1, 2, 3]
        assert all(p.residual == 0 for p in pairs)

    def test_alternating(self):
        q, p = build(ModelSpec("alternating", n=100))
        pairs, _, ok = eigencheck(associated_operator(q, p), q)
        k = np.arange(1, 101)
        assert ok
        got = np.sort([x.value.real for x in pairs])
        assert np.max(np.abs(got - np.sort((-1.0) ** k * k))) <= 1e-8

    def test_random_hermitian(self, rng):
        q = qform(random_hermitian(rng, 12), random_hpd(rng, 12))
        pairs, _, ok = eigencheck(associated_operator(q, Perturbation.scalar(1j, 12)), q)
        assert ok and max(p.residual for p in pairs) <= 1e-8

    def test_converse(self):
        q = qform(np.diag([1.0, 2.0]))
        t = associated_operator(q, Perturbation.scalar(5, 2))
        _, conv, ok = eigencheck(t, q, form_pairs=[(2.0, [0, 1])])
        assert ok and conv == [0.0]
        _, conv, ok = eigencheck(t, q, form_pairs=[(2.0, [1, 1])])
        assert not ok

    @pytest.mark.parametrize("seed", range(5))
    def test_nonnormal_against_inverse_iteration(self, seed):
        rng = np.random.default_rng(seed)
        n = 12
        q = qform(random_complex(rng, (n, n)), random_hpd(rng, n))
        t = associated_operator(q, Perturbation.scalar(30, n))
        pairs, _, ok = eigencheck(t, q)
        assert ok
        for pair in pairs:
            lam = inverse_iteration(q.matrix, pair.value + 1e-3, rng)
            assert abs(lam - pair.value) <= 1e-8 * (1 + abs(lam))


class TestInvariants:
    @given(seed=seeds, n=st.integers(1, 7))
    @settings(max_examples=30, deadline=None)
    def test_uniqueness(self, seed, n):
        rng = np.random.default_rng(seed)
        m = random_complex(rng, (n, n))
        t1 = associated_operator(qform(m, random_hpd(rng, n)), Perturbation.scalar(20, n))
        t2 = associated_operator(qform(m, random_hpd(rng, n)), Perturbation.scalar(20, n))
        assert np.linalg.norm(t1.matrix - t2.matrix) <= 1e-9 * (1 + np.linalg.norm(m))

    @given(seed=seeds, n=st.integers(1, 7))
    @settings(max_examples=30, deadline=None)
    def test_resolvent_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        m = random_complex(rng, (n, n))
        q = qform(m, random_hpd(rng, n))
        a0 = random_complex(rng, (n, n), 0.2) + 20 * np.eye(n)
        b = random_complex(rng, (n, n), 0.2) + 20j * np.eye(n)
        t = associated_operator(q, Perturbation.dense(b)).matrix
        ra = np.linalg.inv(t - a0)
        rb = np.linalg.inv(t + b)
        lhs = ra @ (a0 + b) @ rb
        assert np.linalg.norm(lhs - (ra - rb)) <= 1e-8 * (1 + np.linalg.norm(ra - rb))

    @given(seed=seeds, n=st.integers(1, 6))
    @settings(max_examples=30, deadline=None)
    def test_coercive_sum_is_solvable(self, seed, n):
        rng = np.random.default_rng(seed)
        g = random_hpd(rng, n)
        m = random_complex(rng, (n, n))
        b = np.exp(1j * rng.uniform(0, 2 * np.pi)) * 3 * g - m + random_complex(rng, (n, n), 0.1)
        q = qform(m, g)
        summed = qform(m + b, g)
        if coercivity_constant(summed) > 1e-6:
            assert in_P0(q, Perturbation.dense(b))
            t = associated_operator(summed, Perturbation.zero(n))
            assert np.linalg.svd(t.matrix, compute_uv=False)[-1] > 0
