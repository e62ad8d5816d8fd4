"""Krein-space structure of symmetric forms ``Omega + Upsilon``.

The Gram operator of ``Omega + Upsilon`` with respect to the domain inner
product is ``G^{-1}(M + B)``; it is G-self-adjoint and its spectrum is that of
the Hermitian pencil ``(M + B) v = mu G v``. The pair is a Krein space exactly
when no ``mu`` vanishes, and the positive / negative pencil eigenspaces give
the fundamental decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nx
from .errors import NotKrein, NotSymmetric
from .forms import QClosedForm
from .solvability import DEFAULT_THRESHOLD, Perturbation, in_P0

__all__ = ["KreinDecomposition", "GapPoint", "krein_decompose", "gap_point_scan"]

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class KreinDecomposition:
    """Fundamental decomposition ``D = ran P_plus [+] ran P_minus``.

    Projections and ``J`` use the same storage as the inputs (1-D when both
    the form and the metric are diagonal, in which case ``vectors`` is None;
    otherwise its columns are G-orthonormal pencil eigenvectors).
    """

    P_plus: np.ndarray
    P_minus: np.ndarray
    J: np.ndarray
    signature: tuple
    gram_spectrum: np.ndarray
    vectors: Optional[np.ndarray]


@dataclass(frozen=True)
class GapPoint:
    lam: float
    is_gap: bool
    sigma_min: float


def _symmetric_sum(q, p):
    s = nx.add(q.matrix, p.matrix)
    defect = nx.hermitian_defect(s)
    if defect > SYMMETRY_TOL:
        raise NotSymmetric(f"Omega + Upsilon is not symmetric (relative defect {defect:.3e})")
    return s


def krein_decompose(q: QClosedForm, p: Perturbation, threshold=None) -> KreinDecomposition:
    """Fundamental decomposition of the symmetric form ``Omega + Upsilon``.

    Raises
    ------
    NotSymmetric
        If ``M + B`` is not Hermitian within ``1e-10``.
    NotKrein
        If some pencil eigenvalue satisfies ``|mu| <= threshold`` (default
        ``1e-8 * max|mu|``, the same threshold as the solvability test).
    """
    s = _symmetric_sum(q, p)
    g = q.gram
    if s.ndim == 1 and g.ndim == 1:
        mu_raw = s.real / g.real
        order = np.argsort(mu_raw, kind="stable")
        mu = mu_raw[order]
        vectors = None
    else:
        mu, v = nx.eig_pencil(nx.dense(s), nx.dense(g), rtol=SYMMETRY_TOL)
        vectors = v
    mags = np.abs(mu)
    thr = DEFAULT_THRESHOLD * float(np.max(mags)) if threshold is None else float(threshold)
    k = int(np.argmin(mags))
    if mags[k] <= thr:
        witness_vec = None
        if vectors is not None:
            witness_vec = vectors[:, k]
        else:
            witness_vec = np.zeros(mu.size, dtype=complex)
            witness_vec[order[k]] = 1.0
        raise NotKrein(f"pencil eigenvalue {mu[k]:.3e} is zero within {thr:.1e}", float(mu[k]), witness_vec)

    n_plus = int(np.sum(mu > 0))
    n_minus = int(np.sum(mu < 0))
    if vectors is None:
        pos = (mu_raw > 0).astype(float)
        P_plus = pos.astype(complex)
        P_minus = (1.0 - pos).astype(complex)
    else:
        vp = vectors[:, mu > 0]
        vm = vectors[:, mu < 0]
        gd = nx.dense(g)
        # V* G V = I, so V V* G is the G-orthogonal projection onto ran V
        P_plus = vp @ (vp.conj().T @ gd)
        P_minus = vm @ (vm.conj().T @ gd)
    J = P_plus - P_minus
    return KreinDecomposition(P_plus, P_minus, J, (n_plus, n_minus), mu, vectors)


def gap_point_scan(q: QClosedForm, grid, threshold=None):
    """For each real ``lambda``: is it a gap point, i.e. is ``-lambda iota`` in P0?

    Requires a symmetric form. ``sigma_min`` of ``N_lambda`` is the margin.
    """
    if nx.hermitian_defect(q.matrix) > SYMMETRY_TOL:
        raise NotSymmetric("gap points are defined for symmetric forms only")
    out = []
    for lam in grid:
        lam = float(np.real(lam))
        v = in_P0(q, Perturbation.scalar(lam, q.n), threshold)
        out.append(GapPoint(lam, v.in_P0, v.sigma_min))
    return out
