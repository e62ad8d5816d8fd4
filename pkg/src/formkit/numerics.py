"""Dense complex linear algebra with explicit tolerance contracts.

Every matrix handed to this module is a complex ``numpy.ndarray`` in one of
two storages:

* 2-D array: a dense (possibly rectangular) matrix;
* 1-D array of length ``n``: the diagonal of an ``n x n`` diagonal matrix.

The diagonal storage lets the sequence-space models run at truncations where a
dense matrix would not fit in memory. The helpers below (:func:`matmul`,
:func:`add`, :func:`ctranspose`, :func:`apply`) keep diagonal operands
diagonal and only densify when a dense operand forces it.

Tolerances are relative to the scale ``1 + ||A||_F``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotHermitian, NotPositiveDefinite, NumericalFailure, Singular

__all__ = [
    "HermitianEigen",
    "as_matrix",
    "is_diagonal",
    "dense",
    "ctranspose",
    "matmul",
    "add",
    "apply",
    "fro_norm",
    "scale",
    "hermitian_defect",
    "eig_hermitian",
    "eigvals_hermitian",
    "eigh_extreme",
    "svd",
    "singular_values",
    "hpd_sqrt",
    "solve",
    "eig_general",
    "eig_pencil",
]

HERMITIAN_RTOL = 1e-12
PD_RTOL = 1e-12
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class HermitianEigen:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


# ---------------------------------------------------------------------------
# storage helpers


def as_matrix(a, name="matrix", square=True):
    """Validate and convert ``a`` to a read-only complex array (1-D or 2-D)."""
    arr = np.array(a, dtype=complex)
    if arr.ndim not in (1, 2) or arr.size == 0:
        raise ValueError(f"{name}: expected a non-empty 1-D (diagonal) or 2-D array, got shape {arr.shape}")
    if square and arr.ndim == 2 and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name}: expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: entries must be finite")
    arr.setflags(write=False)
    return arr


def is_diagonal(a):
    return a.ndim == 1


def dense(a):
    return np.diag(a) if a.ndim == 1 else a


def ctranspose(a):
    return a.conj() if a.ndim == 1 else a.conj().T


def matmul(*mats):
    """Product of matrices in either storage, left to right."""
    out = mats[0]
    for b in mats[1:]:
        if out.ndim == 1 and b.ndim == 1:
            out = out * b
        elif out.ndim == 1:
            out = out[:, None] * b
        elif b.ndim == 1:
            out = out * b[None, :]
        else:
            out = out @ b
    return out


def add(a, b, beta=1.0):
    """Return ``a + beta * b``."""
    if a.ndim == 1 and b.ndim == 1:
        return a + beta * b
    if a.ndim == 2 and b.ndim == 2:
        return a + beta * b
    if a.ndim == 1:
        out = beta * b.astype(complex, copy=True)
        out[np.diag_indices_from(out)] += a
        return out
    out = a.astype(complex, copy=True)
    out[np.diag_indices_from(out)] += beta * b
    return out


def apply(a, x):
    """Matrix-vector (or matrix-block) product ``a @ x``."""
    if a.ndim == 1:
        return a * x if x.ndim == 1 else a[:, None] * x
    return a @ x


def fro_norm(a):
    return float(np.linalg.norm(a))


def scale(a):
    return 1.0 + fro_norm(a)


def hermitian_defect(a):
    """Relative distance ``||A - A*||_F / (1 + ||A||_F)``."""
    if a.ndim == 1:
        return float(np.linalg.norm(a.imag)) * 2.0 / scale(a)
    return fro_norm(a - a.conj().T) / scale(a)


def _check_square(a):
    if a.ndim == 2 and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")


def _hermitian_part(a, rtol):
    _check_square(a)
    defect = hermitian_defect(a)
    if defect > rtol:
        raise NotHermitian(f"matrix is not Hermitian (relative defect {defect:.3e} > {rtol:.1e})")
    if a.ndim == 1:
        return a.real.astype(complex)
    return (a + a.conj().T) / 2


# ---------------------------------------------------------------------------
# decompositions


def eig_hermitian(a, rtol=HERMITIAN_RTOL) -> HermitianEigen:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrised as ``(A + A*)/2`` after the Hermitian check so
    that roundoff asymmetry does not leak into the eigenvectors.
    """
    h = _hermitian_part(a, rtol)
    if h.ndim == 1:
        order = np.argsort(h.real, kind="stable")
        q = np.zeros((h.size, h.size), dtype=complex)
        q[order, np.arange(h.size)] = 1.0
        return HermitianEigen(h.real[order], q)
    try:
        w, q = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigh did not converge: {exc}") from exc
    return HermitianEigen(w, q)


def eigvals_hermitian(a, rtol=HERMITIAN_RTOL):
    h = _hermitian_part(a, rtol)
    if h.ndim == 1:
        return np.sort(h.real)
    try:
        return np.linalg.eigvalsh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigvalsh did not converge: {exc}") from exc


def eigh_extreme(h, which="max"):
    """Extreme eigenpair ``(value, unit vector)`` of a Hermitian matrix.

    No symmetry check: callers pass matrices that are Hermitian by
    construction, such as ``(e^{it} M + e^{-it} M*) / 2``.
    """
    if h.ndim == 1:
        d = h.real
        idx = int(np.argmax(d)) if which == "max" else int(np.argmin(d))
        v = np.zeros(d.size, dtype=complex)
        v[idx] = 1.0
        return float(d[idx]), v
    n = h.shape[0]
    sel = [n - 1, n - 1] if which == "max" else [0, 0]
    try:
        w, q = scipy.linalg.eigh(h, subset_by_index=sel, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigh did not converge: {exc}") from exc
    return float(w[0]), q[:, 0]


def eigh_extreme_batch(stack, which="max"):
    """Extreme eigenpairs of a stack ``(b, n, n)`` of Hermitian matrices.

    Returns ``(values (b,), vectors (b, n))``.
    """
    try:
        w, q = np.linalg.eigh(stack)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigh did not converge: {exc}") from exc
    j = -1 if which == "max" else 0
    return w[:, j], q[:, :, j]


def svd(a):
    """Full SVD ``A = U diag(s) V*`` with ``s`` descending.

    Returns ``(s, U, Vh)``; diagonal storage is expanded to dense factors.
    """
    if a.ndim == 1:
        mag = np.abs(a)
        order = np.argsort(-mag, kind="stable")
        n = a.size
        u = np.zeros((n, n), dtype=complex)
        vh = np.zeros((n, n), dtype=complex)
        phase = np.where(mag > 0, a / np.where(mag > 0, mag, 1.0), 1.0)
        cols = np.arange(n)
        u[order, cols] = phase[order]
        vh[cols, order] = 1.0
        return mag[order], u, vh
    try:
        u, s, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return s, u, vh


def singular_values(a):
    """Singular values, descending."""
    if a.ndim == 1:
        return np.sort(np.abs(a))[::-1]
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc


def hpd_sqrt(g, rtol=HERMITIAN_RTOL):
    """Return ``(G^{1/2}, G^{-1/2})`` for a Hermitian positive-definite ``G``.

    Raises
    ------
    NotPositiveDefinite
        If ``G`` is not Hermitian or ``lambda_min <= 1e-12 * lambda_max``.
    """
    try:
        eig = eig_hermitian(g, rtol) if g.ndim == 2 else None
    except NotHermitian as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if g.ndim == 1:
        if hermitian_defect(g) > rtol:
            raise NotPositiveDefinite("diagonal metric has non-real entries")
        w = g.real
    else:
        w = eig.eigenvalues
    lmax, lmin = float(np.max(w)), float(np.min(w))
    if not lmax > 0 or lmin <= PD_RTOL * lmax:
        raise NotPositiveDefinite(f"metric is not positive definite (lambda_min={lmin:.3e}, lambda_max={lmax:.3e})")
    if g.ndim == 1:
        root = np.sqrt(w).astype(complex)
        return root, 1.0 / root
    q = eig.eigenvectors
    r = np.sqrt(w)
    root = (q * r) @ q.conj().T
    inv_root = (q / r) @ q.conj().T
    return (root + root.conj().T) / 2, (inv_root + inv_root.conj().T) / 2


def solve(a, y, full_output=False):
    """Solve ``A X = Y``.

    ``Y`` follows the storage convention: a 1-D ``Y`` is a diagonal matrix,
    so pass a single right-hand side vector as ``y[:, None]``. With
    ``full_output`` returns ``(X, sigma_min(A), sigma_max(A))``.

    Raises
    ------
    Singular
        If ``sigma_min(A) <= 1e-12 * sigma_max(A)``.
    """
    _check_square(a)
    s = singular_values(a)
    smax, smin = float(s[0]), float(s[-1])
    if smin <= SINGULAR_RTOL * smax:
        raise Singular(f"matrix is singular to working precision (sigma_min={smin:.3e}, sigma_max={smax:.3e})", smin, smax)
    if a.ndim == 1:
        x = y / a if y.ndim == 1 else y / a[:, None]
    else:
        try:
            x = scipy.linalg.solve(a, dense(y), check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise Singular(str(exc), smin, smax) from exc
    if full_output:
        return x, smin, smax
    return x


def eig_general(a):
    """Eigenvalues and unit eigenvectors (columns) of a general square matrix.

    For diagonal storage the eigenvectors are the standard basis and ``None``
    is returned in their place.
    """
    if a.ndim == 1:
        return a.copy(), None
    _check_square(a)
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eig did not converge: {exc}") from exc
    v = v / np.linalg.norm(v, axis=0, keepdims=True)
    return w, v


def eig_pencil(a, g, rtol=HERMITIAN_RTOL):
    """Hermitian-definite pencil ``A v = mu G v``.

    Returns ``(mu ascending, V)`` with ``V* G V = I``.
    """
    h = _hermitian_part(a, rtol)
    try:
        gg = _hermitian_part(g, rtol)
    except NotHermitian as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    try:
        mu, v = scipy.linalg.eigh(dense(h), dense(gg), check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"pencil metric is not positive definite: {exc}") from exc
    return mu, v
