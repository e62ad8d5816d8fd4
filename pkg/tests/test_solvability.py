import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formkit.errors import DimensionMismatch
from formkit.forms import DomainMetric, FormMatrix, q_closed_constants
from formkit.models import ModelSpec, alternating_witness, build
from formkit.solvability import Perturbation, criteria, criterion_disjoint, in_P0, qc_margin, x_upsilon

from conftest import random_complex, random_hpd

seeds = st.integers(0, 2**32 - 1)
JORDAN = np.array([[0, 1], [0, 0]], dtype=complex)


def qform(m, g=None):
    m = np.asarray(m, dtype=complex)
    g = np.eye(m.shape[0]) if g is None else g
    return q_closed_constants(FormMatrix(m), DomainMetric(g))


class TestXUpsilon:
    def test_identity_metric(self, rng):
        m = random_complex(rng, (4, 4))
        x = x_upsilon(qform(m), Perturbation.zero(4))
        assert np.allclose(x.matrix, m)

    def test_diagonal_quotient(self):
        alpha = np.array([-1.0, 2.0, -3.0, 4.0])
        lam = 0.3 + 0.7j
        q = q_closed_constants(FormMatrix(alpha), DomainMetric(1 + np.abs(alpha)))
        x = x_upsilon(q, Perturbation.scalar(lam, 4))
        assert np.allclose(x.matrix, (alpha - lam) / (1 + np.abs(alpha)), rtol=0, atol=1e-15)

    @given(seed=seeds, n=st.integers(1, 7))
    @settings(max_examples=30, deadline=None)
    def test_bilinear_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        m, b, g = random_complex(rng, (n, n)), random_complex(rng, (n, n)), random_hpd(rng, n)
        q = qform(m, g)
        x = x_upsilon(q, Perturbation.dense(b))
        w, v = np.linalg.eigh(g)
        root = (v * np.sqrt(w)) @ v.conj().T
        for _ in range(100):
            xi, eta = random_complex(rng, n), random_complex(rng, n)
            lhs = np.vdot(eta, (m + b) @ xi)
            rhs = np.vdot(root @ eta, x.matrix @ (root @ xi))
            assert abs(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(root @ xi) * np.linalg.norm(root @ eta) * x.sigma_max)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            x_upsilon(qform(np.eye(3)), Perturbation.zero(2))


class TestCriteria:
    def test_identity(self):
        c = criteria(qform(np.eye(3)), Perturbation.zero(3))
        assert c.in_P0 and abs(c.c1 - 1) < 1e-14 and abs(c.c2 - 1) < 1e-14

    def test_alternating_lambda_i(self):
        q, p = build(ModelSpec("alternating", n=40))
        c = criteria(q, p)
        k = np.arange(1, 41)
        assert abs(c.c1 - np.min(np.sqrt(k**2 + 1) / (1 + k))) < 1e-12
        assert abs(c.c1 - 1 / math.sqrt(2)) < 1e-12 and c.in_P0

    def test_nilpotent_kernel(self):
        c = criteria(qform(JORDAN), Perturbation.zero(2))
        assert not c.kernel_a and not c.in_P0
        assert abs(abs(c.witness_a[0]) - 1) < 1e-12

    @given(seed=seeds, n=st.integers(1, 8), singular=st.booleans())
    @settings(max_examples=60, deadline=None)
    def test_collapse(self, seed, n, singular):
        rng = np.random.default_rng(seed)
        m = random_complex(rng, (n, n))
        b = random_complex(rng, (n, n))
        if singular:
            r = random_complex(rng, (n, n))
            r[:, -1] = r[:, :-1] @ random_complex(rng, n - 1) if n > 1 else 0
            b = r - m
        c = criteria(qform(m, random_hpd(rng, n)), Perturbation.dense(b))
        assert c.kernel_a == c.kernel_b
        assert abs(c.c1 - c.c2) <= 1e-10
        assert c.in_P0 == (not singular)


class TestInP0:
    def test_identity(self):
        assert in_P0(qform(np.eye(2)), Perturbation.zero(2))

    def test_lambda_on_sequence(self):
        q, _ = build(ModelSpec("diagonal", alpha=(1, 2, 3)))
        v = in_P0(q, Perturbation.scalar(2, 3))
        assert not v and v.sigma_min == 0.0 and v.inverse_bound is None
        c = criteria(q, Perturbation.scalar(2, 3))
        assert abs(abs(c.witness_a[1]) - 1) < 1e-15

    def test_mult_complex(self):
        q, p = build(ModelSpec("mult_complex"))
        v = in_P0(q, p)
        assert v and v.sigma_min >= 0.5 and abs(v.inverse_bound - 1 / v.sigma_min) < 1e-15

    @given(seed=seeds, n=st.integers(1, 6))
    @settings(max_examples=40, deadline=None)
    def test_adjoint_symmetry(self, seed, n):
        rng = np.random.default_rng(seed)
        m, b, g = random_complex(rng, (n, n)), random_complex(rng, (n, n)), random_hpd(rng, n)
        v = in_P0(qform(m, g), Perturbation.dense(b))
        w = in_P0(qform(m.conj().T, g), Perturbation.dense(b).adjoint())
        assert v.in_P0 == w.in_P0

    @given(seed=seeds, n=st.integers(1, 6))
    @settings(max_examples=40, deadline=None)
    def test_scalar_gives_resolvent_point(self, seed, n):
        rng = np.random.default_rng(seed)
        m = random_complex(rng, (n, n))
        lam = complex(np.linalg.eigvals(m)[0]) if rng.random() < 0.5 else complex(*rng.standard_normal(2))
        v = in_P0(qform(m, random_hpd(rng, n)), Perturbation.scalar(lam, n))
        if v:
            assert np.linalg.svd(m - lam * np.eye(n), compute_uv=False)[-1] > 0

    @given(seed=seeds, n=st.integers(2, 6), singular=st.booleans())
    @settings(max_examples=40, deadline=None)
    def test_metric_invariance(self, seed, n, singular):
        rng = np.random.default_rng(seed)
        m = random_complex(rng, (n, n))
        lam = complex(np.linalg.eigvals(m)[0]) if singular else 10.0
        p = Perturbation.scalar(lam, n)
        v1 = in_P0(qform(m, random_hpd(rng, n)), p)
        v2 = in_P0(qform(m, random_hpd(rng, n)), p)
        assert v1.in_P0 == v2.in_P0 == (not singular)


class TestDisjoint:
    def test_separated_point(self):
        v = criterion_disjoint(qform(np.diag([0.0, 1.0])), Perturbation.scalar(-3, 2))
        assert v.hypothesis and v.c1 > 0 and v.in_P0 and v.status == "equivalence-holds"

    def test_point_inside(self):
        v = criterion_disjoint(qform(np.diag([0.0, 1.0])), Perturbation.scalar(0.5, 2))
        assert not v.hypothesis and v.status == "hypothesis-violated"

    @given(seed=seeds, n=st.integers(1, 6), im=st.floats(0.05, 5))
    @settings(max_examples=30, deadline=None)
    def test_hermitian_nonreal_lambda(self, seed, n, im):
        rng = np.random.default_rng(seed)
        h = random_complex(rng, (n, n))
        h = (h + h.conj().T) / 2
        v = criterion_disjoint(qform(h, random_hpd(rng, n)), Perturbation.scalar(complex(rng.normal(), im), n))
        assert v.hypothesis and v.in_P0 and v.status == "equivalence-holds"


class TestQcMargin:
    def test_identity(self):
        assert abs(qc_margin(qform(np.eye(3)), samples=100) - 2) < 1e-12

    def test_equal_metric(self, rng):
        g = random_hpd(rng, 5)
        m = qc_margin(qform(g, g), samples=2000)
        # N0 = I, so the minimum is 1 + 1/lambda_max(G), attained at the top eigenvector
        assert m >= 1 + 1 / np.linalg.eigvalsh(g)[-1] - 1e-12
        assert m <= 1 + 1 / np.linalg.eigvalsh(g)[-1] + 0.05

    @pytest.mark.parametrize("n", [17, 65, 257])
    def test_alternating_witness_bound(self, n):
        q, _ = build(ModelSpec("alternating", n=n))
        j = (n - 1) // 2
        z = alternating_witness(j, n)
        ratio = np.linalg.norm(z) ** 2 / q.metric.norm(z) ** 2
        margin = qc_margin(q, samples=200, candidates=z[None, :])
        assert margin <= ratio + 1e-12
        assert margin <= 3 / n
