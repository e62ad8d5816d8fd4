"""Sesquilinear forms on C^n and the norms they are closed under.

Convention: a form with matrix ``M`` acts as ``Omega(xi, eta) = eta* M xi``
(linear in the first slot). A domain metric ``G`` (Hermitian positive
definite) carries the inner product ``<xi, eta>_Omega = eta* G xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .errors import DimensionMismatch, NotSectorial

__all__ = [
    "FormMatrix",
    "DomainMetric",
    "QClosedForm",
    "RangePolygon",
    "Sector",
    "DEFAULT_ANGLES",
    "adjoint",
    "parts",
    "numerical_range",
    "disjoint_ranges",
    "sectorial_fit",
    "coercivity_constant",
    "q_closed_constants",
    "norm_equivalence_constants",
    "convex_hull",
    "distance_to_polygon",
    "hausdorff_polygons",
]

DEFAULT_ANGLES = 720


@dataclass(frozen=True)
class FormMatrix:
    """Matrix of a sesquilinear form; 1-D input is a diagonal form."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", nx.as_matrix(self.matrix, "form matrix"))

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def is_diagonal(self):
        return self.matrix.ndim == 1

    def __call__(self, xi, eta):
        return complex(np.vdot(eta, nx.apply(self.matrix, xi)))

    def dense(self):
        return nx.dense(self.matrix)


@dataclass(frozen=True)
class DomainMetric:
    """Hermitian positive-definite Gram matrix of the domain inner product.

    ``sqrt`` and ``inv_sqrt`` are computed once on construction; a matrix that
    is not positive definite raises :class:`~formkit.errors.NotPositiveDefinite`.
    """

    gram: np.ndarray
    sqrt: np.ndarray = field(init=False, repr=False, compare=False)
    inv_sqrt: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = nx.as_matrix(self.gram, "metric")
        root, inv_root = nx.hpd_sqrt(g)
        if g.ndim == 1:
            g = nx.as_matrix(g.real, "metric")
        else:
            g = nx.as_matrix((g + g.conj().T) / 2, "metric")
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "sqrt", nx.as_matrix(root))
        object.__setattr__(self, "inv_sqrt", nx.as_matrix(inv_root))

    @classmethod
    def identity(cls, n, diagonal=True):
        return cls(np.ones(n) if diagonal else np.eye(n))

    @property
    def n(self):
        return self.gram.shape[0]

    def inner(self, xi, eta):
        return complex(np.vdot(eta, nx.apply(self.gram, xi)))

    def norm(self, xi):
        return math.sqrt(max(self.inner(xi, xi).real, 0.0))

    def normalize(self, a):
        """``G^{-1/2} A G^{-1/2}``: a matrix in orthonormal domain coordinates."""
        return nx.matmul(self.inv_sqrt, a, self.inv_sqrt)


@dataclass(frozen=True)
class QClosedForm:
    """A form together with a metric and its best q-closedness constants.

    ``alpha`` is the embedding constant (``||xi|| <= alpha ||xi||_Omega``) and
    ``beta`` the boundedness constant on the domain space. Build with
    :func:`q_closed_constants`.
    """

    form: FormMatrix
    metric: DomainMetric
    alpha: float
    beta: float

    @property
    def n(self):
        return self.form.n

    @property
    def matrix(self):
        return self.form.matrix

    @property
    def gram(self):
        return self.metric.gram

    def normalized(self):
        return self.metric.normalize(self.form.matrix)


@dataclass(frozen=True)
class RangePolygon:
    """Inner polygonal approximation of a numerical range.

    Every support point ``points[j]`` equals ``u* M u`` for the stored unit
    vector ``vectors[j]`` (top eigenvector of ``Re(e^{i theta_j} M)``);
    ``vertices`` is their convex hull in counter-clockwise order and
    ``vertex_index`` maps each vertex back to its support point.
    """

    thetas: np.ndarray
    points: np.ndarray
    vectors: np.ndarray
    support: np.ndarray
    vertices: np.ndarray
    vertex_index: np.ndarray

    @property
    def angles(self):
        return self.thetas.size

    def vertex_vector(self, i):
        return self.vectors[self.vertex_index[i]]


@dataclass(frozen=True)
class Sector:
    vertex: float
    half_angle: float


def adjoint(f: FormMatrix) -> FormMatrix:
    return FormMatrix(nx.ctranspose(f.matrix))


def parts(f: FormMatrix):
    """Real and imaginary parts ``(Re Omega, Im Omega)``, both Hermitian."""
    m = f.matrix
    mh = nx.ctranspose(m)
    return FormMatrix((m + mh) / 2), FormMatrix((m - mh) / 2j)


# ---------------------------------------------------------------------------
# planar geometry


def _cross(o, a, b):
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def convex_hull(points, tol=1e-12):
    """Indices of the convex hull of complex ``points``, counter-clockwise.

    Collinear and repeated points are dropped; a degenerate hull is returned
    as one index (a point) or two indices (a segment).
    """
    pts = np.asarray(points, dtype=complex)
    if pts.size == 0:
        return np.array([], dtype=int)
    span = float(np.max(np.abs(pts - pts[0])))
    order = sorted(range(pts.size), key=lambda i: (pts[i].real, pts[i].imag))
    if span <= tol * max(1.0, float(np.max(np.abs(pts)))):
        return np.array([order[0]])
    eps = tol * span**2

    def chain(idx):
        out = []
        for i in idx:
            while len(out) >= 2 and _cross(pts[out[-2]], pts[out[-1]], pts[i]) <= eps:
                out.pop()
            out.append(i)
        return out

    lower = chain(order)
    upper = chain(order[::-1])
    hull = lower[:-1] + upper[:-1]
    # drop consecutive duplicates that survive on near-degenerate inputs
    cleaned = []
    for i in hull:
        if not cleaned or abs(pts[i] - pts[cleaned[-1]]) > tol * span:
            cleaned.append(i)
    while len(cleaned) > 1 and abs(pts[cleaned[0]] - pts[cleaned[-1]]) <= tol * span:
        cleaned.pop()
    return np.array(cleaned, dtype=int)


def _segment_distance(z, a, b):
    d = b - a
    denom = abs(d) ** 2
    if denom == 0.0:
        return abs(z - a)
    t = ((z - a) * d.conjugate()).real / denom
    t = min(1.0, max(0.0, t))
    return abs(z - (a + t * d))


def distance_to_polygon(z, vertices, tol=1e-12):
    """Euclidean distance from ``z`` to a convex polygon (CCW vertices).

    Zero when ``z`` lies inside; one or two vertices describe a point or a
    segment.
    """
    v = np.asarray(vertices, dtype=complex)
    z = complex(z)
    if v.size == 1:
        return abs(z - v[0])
    if v.size == 2:
        return _segment_distance(z, v[0], v[1])
    scale = max(1.0, float(np.max(np.abs(v))))
    inside = all(_cross(v[i], v[(i + 1) % v.size], z) >= -tol * scale**2 for i in range(v.size))
    if inside:
        return 0.0
    return min(_segment_distance(z, v[i], v[(i + 1) % v.size]) for i in range(v.size))


def hausdorff_polygons(p, q):
    """Hausdorff distance between two convex polygons given by their vertices.

    For convex sets the distance to the other set is a convex function, so its
    maximum over a polygon is attained at a vertex.
    """
    d1 = max(distance_to_polygon(z, q) for z in np.atleast_1d(p))
    d2 = max(distance_to_polygon(z, p) for z in np.atleast_1d(q))
    return max(d1, d2)


# ---------------------------------------------------------------------------
# numerical range


def _rotated_real_part(m, theta):
    """``Re(e^{i theta} M) = (e^{i theta} M + e^{-i theta} M*) / 2``."""
    c = np.exp(1j * theta)
    if m.ndim == 1:
        return (c * m).real.astype(complex)
    h = c * m
    return (h + h.conj().T) / 2


def _thetas(k):
    return 2.0 * np.pi * np.arange(k) / k


BATCH_MAX_N = 64


def _support_sweep(m, thetas, which="max"):
    """Extreme eigenpairs of ``Re(e^{i theta} M)`` for every angle.

    Small dense matrices go through one batched LAPACK call per chunk of
    angles; large or diagonal ones are handled angle by angle.
    """
    n = m.shape[0]
    if m.ndim == 2 and n <= BATCH_MAX_N:
        re = (m + m.conj().T) / 2
        im = (m - m.conj().T) / 2j
        # Re(e^{it}(A + iB)) = cos(t) A - sin(t) B
        stack = np.cos(thetas)[:, None, None] * re - np.sin(thetas)[:, None, None] * im
        return nx.eigh_extreme_batch(stack, which)
    values = np.empty(thetas.size)
    vectors = np.empty((thetas.size, n), dtype=complex)
    for j, theta in enumerate(thetas):
        values[j], vectors[j] = nx.eigh_extreme(_rotated_real_part(m, theta), which)
    return values, vectors


def numerical_range(f, k=DEFAULT_ANGLES) -> RangePolygon:
    """Inner polygon of the numerical range ``{u* M u : ||u|| = 1}``.

    For each angle ``theta_j = 2 pi j / k`` the top eigenvector ``u`` of
    ``Re(e^{i theta_j} M)`` gives the support point ``u* M u`` of the range in
    direction ``e^{-i theta_j}``.

    Parameters
    ----------
    f : FormMatrix or array
    k : int
        Number of sweep angles, at least 8.
    """
    m = f.matrix if isinstance(f, FormMatrix) else nx.as_matrix(f)
    if k < 8:
        raise ValueError("numerical_range needs at least 8 angles")
    thetas = _thetas(k)
    support, vectors = _support_sweep(m, thetas, "max")
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    points = np.einsum("ij,ij->i", vectors.conj(), nx.apply(m, vectors.T).T)
    idx = convex_hull(points)
    return RangePolygon(thetas, points, vectors, support, points[idx], idx)


def disjoint_ranges(f1, f2, k=DEFAULT_ANGLES, tol=1e-12):
    """Separate two numerical ranges by a sweep of support functions.

    At each angle the gap is ``lambda_min(Re(e^{it} M2)) - lambda_max(Re(e^{it} M1))``;
    a positive gap is a separating direction. Both eigenvalues are exact
    support-function values, so a positive margin certifies that the true
    ranges (not only their polygons) are disjoint.

    Returns
    -------
    (bool, float)
        The verdict and the largest gap over the swept angles.
    """
    m1 = f1.matrix if isinstance(f1, FormMatrix) else nx.as_matrix(f1)
    m2 = f2.matrix if isinstance(f2, FormMatrix) else nx.as_matrix(f2)
    if m1.shape[0] != m2.shape[0]:
        raise DimensionMismatch(f"forms have dimensions {m1.shape[0]} and {m2.shape[0]}")
    thetas = _thetas(k)
    top1, _ = _support_sweep(m1, thetas, "max")
    low2, _ = _support_sweep(m2, thetas, "min")
    margin = float(np.max(low2 - top1))
    thresh = tol * (nx.scale(m1) + nx.scale(m2))
    return bool(margin > thresh), float(margin)


def _sector_angle(vertices, gamma):
    worst = 0.0
    for z in vertices:
        w = complex(z) - gamma
        if abs(w) <= 1e-14 * max(1.0, abs(gamma)):
            continue
        worst = max(worst, abs(math.atan2(w.imag, w.real)))
    return worst


def sectorial_fit(f, k=DEFAULT_ANGLES, vertex=None, aperture=math.pi / 4):
    """Fit a sector ``{gamma + r e^{i t}: r >= 0, |t| <= theta0}`` around the range.

    Without ``vertex`` the largest ``gamma`` is chosen for which every range
    vertex fits in a sector of half-angle ``aperture``, i.e.
    ``gamma = min(Re z - |Im z| / tan(aperture))``; the returned half-angle is
    then the smallest one that fits at that ``gamma``. With ``vertex`` given,
    only the half-angle is computed.

    Raises
    ------
    NotSectorial
        If the half-angle is not below ``pi/2 - 1e-9``.
    """
    poly = numerical_range(f, k)
    verts = poly.vertices
    if vertex is None:
        slope = 1.0 / math.tan(aperture)
        gamma = float(np.min(verts.real - slope * np.abs(verts.imag)))
    else:
        gamma = float(vertex)
    theta0 = _sector_angle(verts, gamma)
    if not theta0 < math.pi / 2 - 1e-9:
        raise NotSectorial(f"no sector with vertex {gamma:.6g} and half-angle below pi/2 (got {theta0:.6g})")
    return Sector(gamma, theta0)


# ---------------------------------------------------------------------------
# constants


def q_closed_constants(f, m: DomainMetric) -> QClosedForm:
    """Best constants of q-closedness of ``f`` under the metric ``m``.

    ``alpha = lambda_min(G)^{-1/2}`` and ``beta = sigma_max(G^{-1/2} M G^{-1/2})``.
    """
    if not isinstance(f, FormMatrix):
        f = FormMatrix(f)
    if f.n != m.n:
        raise DimensionMismatch(f"form has dimension {f.n}, metric {m.n}")
    lam_min = float(nx.eigvals_hermitian(m.gram)[0])
    alpha = lam_min ** -0.5
    beta = float(nx.singular_values(m.normalize(f.matrix))[0])
    return QClosedForm(f, m, alpha, beta)


def coercivity_constant(q: QClosedForm, k=DEFAULT_ANGLES) -> float:
    """Distance from 0 to the range polygon of ``G^{-1/2} M G^{-1/2}``.

    Positive exactly when the form is coercive on the domain space (up to the
    polygon resolution).
    """
    poly = numerical_range(FormMatrix(q.normalized()), k)
    return float(distance_to_polygon(0.0, poly.vertices))


def norm_equivalence_constants(m1: DomainMetric, m2: DomainMetric):
    """Best ``(c_low, c_high)`` with ``c_low ||x||_1 <= ||x||_2 <= c_high ||x||_1``."""
    if m1.n != m2.n:
        raise DimensionMismatch(f"metrics have dimensions {m1.n} and {m2.n}")
    w = nx.eigvals_hermitian(m1.normalize(m2.gram), rtol=1e-10)
    return math.sqrt(max(w[0], 0.0)), math.sqrt(max(w[-1], 0.0))
