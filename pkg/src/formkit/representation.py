"""Gram operator, associated operator ``T = R A`` and the checks built on them.

``R`` is the metric operator of the domain inner product (``R = G`` in the
standard basis) and ``A = G^{-1} M`` the Gram operator of the form with
respect to it. ``T`` is always formed as the product ``R A``; in finite
dimension it must reproduce ``M``, and that reconstruction residual is
reported rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .errors import NotSolvable
from .forms import FormMatrix, QClosedForm, adjoint, q_closed_constants
from .solvability import Perturbation, in_P0

__all__ = [
    "GramOperator",
    "AssociatedOperator",
    "CheckResult",
    "EigenPair",
    "gram_operator",
    "associated_operator",
    "verify_representation",
    "adjoint_theorem_check",
    "symmetry_selfadjoint_check",
    "metric_independence_check",
    "eigencheck",
]

IDENTITY_TOL = 1e-10
OPERATOR_TOL = 1e-9
SPECTRAL_TOL = 1e-8


@dataclass(frozen=True)
class GramOperator:
    matrix: np.ndarray
    residual: float


@dataclass(frozen=True)
class AssociatedOperator:
    """``T = R A`` together with its construction trace.

    ``resolvent_norm`` is ``||(T + B)^{-1}||_2`` and ``resolvent_bound`` the a
    priori bound ``alpha^2 / sigma_min(N)``.
    """

    matrix: np.ndarray
    metric: np.ndarray
    gram: np.ndarray
    perturbation: np.ndarray
    reconstruction_residual: float
    resolvent_norm: float
    resolvent_bound: float
    sigma_min: float

    @property
    def resolvent_bound_holds(self):
        return self.resolvent_norm <= self.resolvent_bound * (1 + 1e-9)


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    residual: float
    detail: str = ""

    def __bool__(self):
        return self.passed


@dataclass(frozen=True)
class EigenPair:
    value: complex
    vector: np.ndarray
    residual: float


def _sample_pairs(q, samples, seed):
    """Random pairs normalised to unit domain norm, as rows."""
    rng = np.random.default_rng(seed)
    shape = (samples, q.n)
    xi = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    eta = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    for v in (xi, eta):
        norms = np.sqrt(np.einsum("ij,ij->i", v.conj(), nx.apply(q.gram, v.T).T).real)
        v /= norms[:, None]
    return xi, eta


def _bilinear(mat, xi, eta):
    """Row-wise ``eta_i* mat xi_i``."""
    return np.einsum("ij,ij->i", eta.conj(), nx.apply(mat, xi.T).T)


def gram_operator(q: QClosedForm, samples=100, seed=0) -> GramOperator:
    """Solve ``G A = M``; check ``Omega(xi, eta) = <A xi, eta>_Omega`` on samples."""
    a = nx.solve(q.gram, q.matrix)
    xi, eta = _sample_pairs(q, samples, seed)
    lhs = _bilinear(q.matrix, xi, eta)
    rhs = _bilinear(nx.matmul(q.gram, a), xi, eta)
    return GramOperator(a, float(np.max(np.abs(lhs - rhs))))


def associated_operator(q: QClosedForm, p: Perturbation, threshold=None) -> AssociatedOperator:
    """Operator associated to a solvable form, built as ``T = R A``.

    Raises
    ------
    NotSolvable
        If ``p`` is not in P0 of the form.
    """
    verdict = in_P0(q, p, threshold)
    if not verdict:
        raise NotSolvable(
            f"perturbation {p.label()} is not in P0 (sigma_min={verdict.sigma_min:.3e} <= {verdict.threshold:.3e})",
            verdict.sigma_min,
        )
    a = gram_operator(q).matrix
    t = nx.matmul(q.gram, a)
    residual = nx.fro_norm(nx.add(t, q.matrix, -1.0)) / nx.scale(q.matrix)
    s = nx.singular_values(nx.add(t, p.matrix))
    resolvent_norm = 1.0 / float(s[-1])
    bound = q.alpha**2 * verdict.inverse_bound
    return AssociatedOperator(t, q.gram, a, p.matrix, residual, resolvent_norm, bound, verdict.sigma_min)


def verify_representation(t: AssociatedOperator, q: QClosedForm, samples=100, seed=0) -> float:
    """Max of ``|Omega(xi, eta) - <T xi, eta>| / (1 + ||xi||_Omega ||eta||_Omega)`` over samples."""
    xi, eta = _sample_pairs(q, samples, seed)
    diff = _bilinear(q.matrix, xi, eta) - _bilinear(t.matrix, xi, eta)
    # samples are unit in the domain norm
    return float(np.max(np.abs(diff)) / 2.0)


def _rel_diff(a, b):
    return nx.fro_norm(nx.add(a, b, -1.0)) / (1.0 + max(nx.fro_norm(a), nx.fro_norm(b)))


def adjoint_theorem_check(q: QClosedForm, p: Perturbation, tol=OPERATOR_TOL) -> CheckResult:
    """The adjoint form is solvable with ``Upsilon*`` and has associated operator ``T*``."""
    t = associated_operator(q, p)
    q_star = q_closed_constants(adjoint(q.form), q.metric)
    t_star = associated_operator(q_star, p.adjoint())
    r = _rel_diff(t_star.matrix, nx.ctranspose(t.matrix))
    return CheckResult(r <= tol, r)


def symmetry_selfadjoint_check(q: QClosedForm, p: Perturbation, tol=OPERATOR_TOL) -> CheckResult:
    """Symmetric form if and only if self-adjoint associated operator."""
    t = associated_operator(q, p)
    sym_defect = nx.hermitian_defect(q.matrix)
    sa_defect = nx.hermitian_defect(t.matrix)
    symmetric = sym_defect <= tol
    selfadjoint = sa_defect <= tol
    detail = f"symmetric={symmetric} selfadjoint={selfadjoint}"
    return CheckResult(symmetric == selfadjoint, sa_defect, detail)


def metric_independence_check(f, metrics, p: Perturbation, tol=OPERATOR_TOL) -> CheckResult:
    """Associated operators computed under several metrics must coincide."""
    if not isinstance(f, FormMatrix):
        f = FormMatrix(f)
    ops = []
    for i, m in enumerate(metrics):
        q = q_closed_constants(f, m)
        try:
            ops.append(associated_operator(q, p).matrix)
        except NotSolvable as exc:
            raise NotSolvable(f"metric #{i}: {exc}", exc.sigma_min, label=i) from exc
    worst = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            worst = max(worst, _rel_diff(ops[i], ops[j]))
    return CheckResult(worst <= tol, worst)


def eigencheck(t: AssociatedOperator, q: QClosedForm, tol=SPECTRAL_TOL, form_pairs=None):
    """Operator eigenpairs are form eigenpairs, and conversely.

    For each eigenpair ``T xi = lambda xi`` (``||xi|| = 1``) the residual is
    ``max_j |Omega(xi, e_j) - lambda <xi, e_j>|`` over the standard basis.
    ``form_pairs`` is an optional list of ``(lambda, xi)`` claimed to satisfy
    ``Omega(xi, eta) = lambda <xi, eta>``; each is verified as ``T xi = lambda xi``.

    Returns
    -------
    (list of EigenPair, list of float, bool)
        Operator eigenpairs with form residuals, residuals ``||T xi - lambda xi||``
        of the supplied form pairs, and whether every residual is within ``tol``.
    """
    values, vectors = nx.eig_general(t.matrix)
    pairs = []
    m = q.matrix
    for i in range(values.size):
        if vectors is None:
            v = np.zeros(values.size, dtype=complex)
            v[i] = 1.0
        else:
            v = vectors[:, i]
        res = float(np.max(np.abs(nx.apply(m, v) - values[i] * v)))
        pairs.append(EigenPair(complex(values[i]), v, res))
    converse = []
    for lam, xi in form_pairs or ():
        xi = np.asarray(xi, dtype=complex)
        xi = xi / np.linalg.norm(xi)
        converse.append(float(np.linalg.norm(nx.apply(t.matrix, xi) - lam * xi)))
    scale_ = 1.0 + float(np.max(np.abs(values)))
    ok = all(p.residual <= tol * scale_ for p in pairs) and all(r <= tol * scale_ for r in converse)
    return pairs, converse, ok
