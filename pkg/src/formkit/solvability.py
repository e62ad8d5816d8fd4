"""Solvability of q-closed forms: the operator X_Upsilon and the set P0.

In orthonormal coordinates of the domain space (``u = G^{1/2} xi``) the dual
norm of a functional ``eta -> <Lambda, eta>`` is ``||G^{-1/2} Lambda||``, so

    sup_{||eta||_Omega = 1} |(Omega + Upsilon)(xi, eta)| = ||G^{-1/2} (M + B) xi||

and ``X_Upsilon`` is represented by ``N = G^{-1/2} (M + B) G^{-1/2}``. Every
criterion below is a statement about the singular values of ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nx
from .errors import DimensionMismatch
from .forms import DEFAULT_ANGLES, FormMatrix, QClosedForm, disjoint_ranges, numerical_range

__all__ = [
    "Perturbation",
    "NormalizedOperator",
    "SolvabilityCertificate",
    "P0Verdict",
    "DisjointVerdict",
    "DEFAULT_THRESHOLD",
    "x_upsilon",
    "criteria",
    "in_P0",
    "criterion_disjoint",
    "qc_margin",
]

DEFAULT_THRESHOLD = 1e-8


@dataclass(frozen=True)
class Perturbation:
    """Bounded form ``Upsilon(xi, eta) = eta* B xi`` on the whole space.

    Scalar perturbations ``Upsilon = -lambda iota`` are stored as the diagonal
    ``B = -lambda I``.
    """

    matrix: np.ndarray
    kind: str = "dense"
    lam: Optional[complex] = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", nx.as_matrix(self.matrix, "perturbation"))
        if self.kind not in ("scalar", "dense"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")

    @classmethod
    def scalar(cls, lam, n):
        lam = complex(lam)
        return cls(np.full(n, -lam, dtype=complex), "scalar", lam)

    @classmethod
    def dense(cls, b):
        return cls(b, "dense")

    @classmethod
    def zero(cls, n):
        return cls.scalar(0.0, n)

    @property
    def n(self):
        return self.matrix.shape[0]

    def adjoint(self):
        if self.kind == "scalar":
            return Perturbation.scalar(np.conj(self.lam), self.n)
        return Perturbation(nx.ctranspose(self.matrix), "dense")

    def label(self):
        if self.kind == "scalar":
            return f"scalar(lambda={self.lam.real:.12g}{self.lam.imag:+.12g}j)"
        return "dense"


@dataclass(frozen=True)
class NormalizedOperator:
    matrix: np.ndarray
    sigma_min: float
    sigma_max: float

    @property
    def cond(self):
        return self.sigma_max / self.sigma_min if self.sigma_min > 0 else float("inf")


@dataclass(frozen=True)
class SolvabilityCertificate:
    """Finite-dimensional readout of the solvability criteria.

    ``c1``/``c2`` are the best constants of the lower bounds on
    ``sup_eta |(Omega+Upsilon)(xi, eta)|`` and ``sup_xi |(Omega+Upsilon)(xi, eta)|``;
    ``kernel_a``/``kernel_b`` say that ``Omega+Upsilon`` and its adjoint have
    trivial kernel. ``witness_a``/``witness_b`` are least-singular vectors in
    the original coordinates when the corresponding kernel is not trivial.
    """

    in_P0: bool
    c1: float
    c2: float
    kernel_a: bool
    kernel_b: bool
    threshold: float
    sigma_max: float
    witness_a: Optional[np.ndarray] = None
    witness_b: Optional[np.ndarray] = None


@dataclass(frozen=True)
class P0Verdict:
    in_P0: bool
    sigma_min: float
    threshold: float
    inverse_bound: Optional[float]

    def __bool__(self):
        return self.in_P0


@dataclass(frozen=True)
class DisjointVerdict:
    hypothesis: bool
    margin: float
    c1: float
    in_P0: bool
    status: str


def _check_dims(q, p):
    if q.n != p.n:
        raise DimensionMismatch(f"form has dimension {q.n}, perturbation {p.n}")


def x_upsilon(q: QClosedForm, p: Perturbation) -> NormalizedOperator:
    """Matrix of X_Upsilon in orthonormal domain / dual-domain coordinates."""
    _check_dims(q, p)
    n_mat = q.metric.normalize(nx.add(q.matrix, p.matrix))
    s = nx.singular_values(n_mat)
    return NormalizedOperator(n_mat, float(s[-1]), float(s[0]))


def _threshold(sigma_max, threshold):
    return DEFAULT_THRESHOLD * sigma_max if threshold is None else float(threshold)


def _least_right_vector(a):
    """Right singular vector of the smallest singular value."""
    if a.ndim == 1:
        v = np.zeros(a.size, dtype=complex)
        v[int(np.argmin(np.abs(a)))] = 1.0
        return v
    _, _, vh = nx.svd(a)
    return vh[-1].conj()


def criteria(q: QClosedForm, p: Perturbation, threshold=None) -> SolvabilityCertificate:
    """Evaluate the kernel and inf-sup criteria for ``Upsilon`` in ``P0(Omega)``.

    ``c1 = sigma_min(N)`` and ``c2 = sigma_min(N*)`` are computed separately,
    as are the kernels of ``M + B`` and ``(M + B)*``; in finite dimension they
    all collapse to invertibility of ``M + B``.
    """
    x = x_upsilon(q, p)
    thr = _threshold(x.sigma_max, threshold)
    c1 = x.sigma_min
    c2 = float(nx.singular_values(nx.ctranspose(x.matrix))[-1])

    s = nx.add(q.matrix, p.matrix)
    sa = nx.singular_values(s)
    sb = nx.singular_values(nx.ctranspose(s))
    kernel_a = bool(sa[-1] > DEFAULT_THRESHOLD * sa[0])
    kernel_b = bool(sb[-1] > DEFAULT_THRESHOLD * sb[0])

    witness_a = witness_b = None
    if not kernel_a:
        witness_a = _unit(_least_right_vector(s))
    if not kernel_b:
        witness_b = _unit(_least_right_vector(nx.ctranspose(s)))
    return SolvabilityCertificate(
        in_P0=bool(c1 > thr),
        c1=c1,
        c2=c2,
        kernel_a=kernel_a,
        kernel_b=kernel_b,
        threshold=thr,
        sigma_max=x.sigma_max,
        witness_a=witness_a,
        witness_b=witness_b,
    )


def _unit(v):
    return v / np.linalg.norm(v)


def in_P0(q: QClosedForm, p: Perturbation, threshold=None) -> P0Verdict:
    """Whether X_Upsilon is a bijection, i.e. ``sigma_min(N) > threshold``.

    The default threshold is ``1e-8 * sigma_max(N)``. When true, the bound
    ``1/sigma_min(N)`` on the inverse of X_Upsilon is reported.
    """
    x = x_upsilon(q, p)
    thr = _threshold(x.sigma_max, threshold)
    ok = bool(x.sigma_min > thr)
    return P0Verdict(ok, x.sigma_min, thr, 1.0 / x.sigma_min if ok else None)


def criterion_disjoint(q: QClosedForm, p: Perturbation, k=DEFAULT_ANGLES, threshold=None) -> DisjointVerdict:
    """Check disjointness of the ranges of ``Omega`` and ``-Upsilon``.

    Under a disjoint hypothesis the adjoint kernel is trivial, so membership in
    P0 reduces to the single inf-sup bound ``c1 > 0``; both are recorded.
    """
    _check_dims(q, p)
    hyp, margin = disjoint_ranges(q.form, FormMatrix(-p.matrix), k)
    cert = criteria(q, p, threshold)
    full = cert.c1 > cert.threshold and cert.c2 > cert.threshold
    condition2 = cert.c1 > cert.threshold
    if not hyp:
        status = "hypothesis-violated"
    elif full == condition2:
        status = "equivalence-holds"
    else:
        status = "equivalence-broken"
    return DisjointVerdict(hyp, margin, cert.c1, bool(full), status)


def qc_margin(q: QClosedForm, samples=10_000, seed=0, candidates=None, k=DEFAULT_ANGLES, chunk=512) -> float:
    """Sampled upper bound on ``min ||xi||^2 + |Omega(xi, xi)|`` over ``||xi||_Omega = 1``.

    Candidates in orthonormal domain coordinates ``u`` (unit vectors) are the
    support vectors of the range of ``N0``, the top eigenvector of ``G`` (which
    minimises the first term), ``samples`` random unit vectors,
    and the optional extra ``candidates`` (given in original coordinates and
    normalised in ``||.||_Omega``). A margin that decays along a truncation
    sweep flags failure of condition (qc).
    """
    n0 = q.normalized()
    inv_g = nx.matmul(q.metric.inv_sqrt, q.metric.inv_sqrt)

    def objective(u):
        # u has unit vectors as rows
        a = np.einsum("ij,ij->i", u.conj(), nx.apply(inv_g, u.T).T).real
        b = np.abs(np.einsum("ij,ij->i", u.conj(), nx.apply(n0, u.T).T))
        return a + b

    poly = numerical_range(FormMatrix(n0), k)
    best = float(np.min(objective(poly.vectors)))
    _, top = nx.eigh_extreme(q.gram, "max")
    best = min(best, float(objective(top[None, :] / np.linalg.norm(top))[0]))

    rng = np.random.default_rng(seed)
    remaining = int(samples)
    while remaining > 0:
        m = min(chunk, remaining)
        u = rng.standard_normal((m, q.n)) + 1j * rng.standard_normal((m, q.n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        best = min(best, float(np.min(objective(u))))
        remaining -= m

    if candidates is not None:
        c = np.atleast_2d(np.asarray(candidates, dtype=complex))
        u = nx.apply(q.metric.sqrt, c.T).T
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        best = min(best, float(np.min(objective(u))))
    return best
