"""Worked-example generators, witness vectors and truncation sweeps.

Sequence-space models live on ``C^n`` with diagonal storage. L^2 models use
midpoint quadrature on a uniform grid with the weights absorbed into the
coordinates (``xi_j = sqrt(w_j) f(x_j)``), which turns the discretised space
into plain ``C^n`` and the multiplication forms into diagonal ones.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import numerics as nx
from .errors import IndexOutOfRange, InvalidSpec
from .forms import DomainMetric, FormMatrix, QClosedForm, q_closed_constants
from .representation import associated_operator
from .solvability import Perturbation, qc_margin, x_upsilon

__all__ = [
    "KINDS",
    "SEQUENCES",
    "ModelSpec",
    "SweepRow",
    "SweepReport",
    "DiscretenessRow",
    "build",
    "sequence_values",
    "grid_points",
    "alternating_witness",
    "truncation_sweep",
    "discreteness_report",
    "worker_count",
]

KINDS = ("diagonal", "alternating", "mult_complex", "mult_real", "sectorial", "dense")
SEQUENCES = ("linear", "square", "alternating")


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of a model instance.

    ``n`` is the truncation dimension. For the grid models it may replace
    ``step``: ``mult_real`` uses ``n`` cells on ``[-L, L]`` and
    ``mult_complex`` needs ``n = m^2`` for an ``m x m`` grid on ``[-L, L]^2``.
    """

    kind: str
    n: Optional[int] = None
    alpha: Optional[tuple] = None
    sequence: Optional[str] = None
    lam: Optional[complex] = None
    half_width: float = 3.0
    step: float = 0.25
    vertex: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.alpha is not None:
            alpha = tuple(complex(a) for a in self.alpha)
            if not all(math.isfinite(a.real) and math.isfinite(a.imag) for a in alpha):
                raise InvalidSpec("diagonal sequence must be finite")
            object.__setattr__(self, "alpha", alpha)
        if self.sequence is not None and self.sequence not in SEQUENCES:
            raise InvalidSpec(f"unknown sequence {self.sequence!r}; expected one of {SEQUENCES}")
        if not (self.half_width > 0 and self.step > 0):
            raise InvalidSpec("grid half-width and step must be positive")
        if self.n is not None and self.n < 2:
            raise InvalidSpec("truncation dimension must be at least 2")

    def with_n(self, n):
        if self.kind == "diagonal" and self.alpha is not None:
            raise InvalidSpec("an explicit diagonal sequence has a fixed dimension; use 'sequence' to sweep")
        return replace(self, n=int(n))


@dataclass(frozen=True)
class SweepRow:
    n: int
    sigma_min: float
    sigma_max: float
    cond: float
    qc_margin: float
    eig_min: float
    eig_max: float


@dataclass(frozen=True)
class SweepReport:
    rows: list
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DiscretenessRow:
    """Compactness proxies at one truncation.

    ``embedding_sv`` are the singular values of ``G^{-1/2}``, ``resolvent_sv``
    those of ``(T + B)^{-1}`` (both descending); ``decay_exponent`` is the
    log-log slope of the embedding tail and ``counts`` maps each threshold
    ``t`` to the number of eigenvalues of ``T`` with ``|lambda| <= t``.
    """

    n: int
    embedding_sv: np.ndarray
    resolvent_sv: np.ndarray
    decay_exponent: float
    counts: dict


def worker_count():
    """Thread cap from ``FORMKIT_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("FORMKIT_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _ordered_map(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# generators


def sequence_values(name, n):
    """Named diagonal sequences indexed ``k = 1..n``."""
    k = np.arange(1, n + 1, dtype=float)
    if name == "linear":
        return k.astype(complex)
    if name == "square":
        return (k**2).astype(complex)
    if name == "alternating":
        return ((-1.0) ** k * k).astype(complex)
    raise InvalidSpec(f"unknown sequence {name!r}")


def grid_points(spec: ModelSpec):
    """Cell midpoints of the uniform grid of a ``mult_real`` / ``mult_complex`` model."""
    L = float(spec.half_width)
    if spec.kind == "mult_real":
        m = spec.n if spec.n is not None else int(round(2 * L / spec.step))
        h = 2 * L / m
        return (-L + h * (np.arange(m) + 0.5)).astype(complex)
    if spec.kind == "mult_complex":
        if spec.n is not None:
            m = math.isqrt(spec.n)
            if m * m != spec.n:
                raise InvalidSpec(f"mult_complex needs a square dimension, got {spec.n}")
        else:
            m = int(round(2 * L / spec.step))
        h = 2 * L / m
        axis = -L + h * (np.arange(m) + 0.5)
        re, im = np.meshgrid(axis, axis, indexing="xy")
        return (re + 1j * im).ravel()
    raise InvalidSpec(f"model kind {spec.kind!r} has no grid")


def _diagonal_alpha(spec):
    if spec.kind == "alternating":
        if spec.n is None:
            raise InvalidSpec("alternating model needs n")
        return sequence_values("alternating", spec.n)
    if spec.alpha is not None:
        return np.array(spec.alpha, dtype=complex)
    if spec.sequence is not None and spec.n is not None:
        return sequence_values(spec.sequence, spec.n)
    raise InvalidSpec("diagonal model needs either alpha or (sequence, n)")


def _default_lambda(alpha):
    if np.all(alpha.imag == 0):
        return 1j
    return complex(1.0 + float(np.max(np.abs(alpha))))


def _random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def build(spec: ModelSpec):
    """Instantiate a model: ``(QClosedForm, default Perturbation)``."""
    if spec.kind in ("diagonal", "alternating"):
        alpha = _diagonal_alpha(spec)
        if alpha.size < 2:
            raise InvalidSpec("truncation dimension must be at least 2")
        metric = DomainMetric(1.0 + np.abs(alpha))
        lam = spec.lam if spec.lam is not None else _default_lambda(alpha)
        q = q_closed_constants(FormMatrix(alpha), metric)
        return q, Perturbation.scalar(lam, alpha.size)

    if spec.kind == "mult_complex":
        x = grid_points(spec)
        metric = DomainMetric(1.0 + np.abs(x))
        q = q_closed_constants(FormMatrix(x), metric)
        if spec.lam is not None:
            return q, Perturbation.scalar(spec.lam, x.size)
        # B = chi_{|x| <= 1} (1 - x): Omega + Upsilon becomes multiplication by r
        b = np.where(np.abs(x) <= 1.0, 1.0 - x, 0.0)
        return q, Perturbation.dense(b)

    if spec.kind == "mult_real":
        x = grid_points(spec)
        metric = DomainMetric(1.0 + np.abs(x))
        q = q_closed_constants(FormMatrix(x), metric)
        lam = spec.lam if spec.lam is not None else 1j
        return q, Perturbation.scalar(lam, x.size)

    n = spec.n
    if n is None:
        raise InvalidSpec(f"{spec.kind} model needs n")
    rng = np.random.default_rng(spec.seed)

    if spec.kind == "sectorial":
        gamma = float(spec.vertex)
        u = _random_unitary(rng, n)
        h_diag = gamma + np.concatenate([[0.0], rng.uniform(0.0, 2.0, n - 1)])
        h = (u * h_diag) @ u.conj().T
        h = (h + h.conj().T) / 2
        k = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        k = (k + k.conj().T) / 2
        k /= np.linalg.norm(k, 2)
        # closed sectorial norm: ||xi||^2 = Re Omega(xi, xi) + (1 - gamma) ||xi||^2
        metric = DomainMetric(h + (1.0 - gamma) * np.eye(n))
        q = q_closed_constants(FormMatrix(h + 1j * k), metric)
        lam = spec.lam if spec.lam is not None else gamma - 1.0
        return q, Perturbation.scalar(lam, n)

    # dense
    m = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    c = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    metric = DomainMetric(c.conj().T @ c + np.eye(n))
    q = q_closed_constants(FormMatrix(m), metric)
    # |lambda| above ||M||_F >= numerical radius keeps lambda off the range
    lam = spec.lam if spec.lam is not None else complex(1.0 + np.linalg.norm(m))
    return q, Perturbation.scalar(lam, n)


def alternating_witness(n, dim):
    """``zeta_n = e_{2n}/sqrt(2n) + e_{2n+1}/sqrt(2n+1)`` (1-based basis) in ``C^dim``.

    On the alternating model ``alpha_k = (-1)^k k`` it is an isotropic vector:
    ``Omega(zeta_n, zeta_n) = 2n/(2n) - (2n+1)/(2n+1) = 0``.
    """
    if n < 1 or 2 * n + 1 > dim:
        raise IndexOutOfRange(f"witness zeta_{n} needs dimension >= {2 * n + 1}, got {dim}")
    z = np.zeros(dim, dtype=complex)
    z[2 * n - 1] = 1.0 / math.sqrt(2 * n)
    z[2 * n] = 1.0 / math.sqrt(2 * n + 1)
    return z


# ---------------------------------------------------------------------------
# sweeps


def _resize_perturbation(p, n, default):
    if p is None:
        return default
    if isinstance(p, Perturbation):
        if p.kind != "scalar":
            if p.n != n:
                raise InvalidSpec("a dense perturbation cannot be resized across a sweep")
            return p
        return Perturbation.scalar(p.lam, n)
    return Perturbation.scalar(p, n)


def _is_alternating(spec):
    return spec.kind == "alternating" or (spec.kind == "diagonal" and spec.sequence == "alternating")


def _witnesses(spec, n):
    if not _is_alternating(spec):
        return None
    count = (n - 1) // 2
    if count < 1:
        return None
    return np.array([alternating_witness(j, n) for j in range(1, count + 1)])


def truncation_sweep(spec: ModelSpec, dims, perturbation=None, samples=10_000, seed=0) -> SweepReport:
    """Solvability constants of a model across truncation dimensions.

    ``perturbation`` is ``None`` (model default), a scalar ``lambda`` or a
    scalar :class:`Perturbation`; it is resized to every ``n``. A stable
    ``sigma_min`` indicates uniform solvability, a decaying ``qc_margin``
    flags failure of condition (qc).
    """
    dims = [int(d) for d in dims]
    if dims != sorted(dims):
        raise InvalidSpec("sweep dimensions must be ascending")
    label = {"value": None}

    def one(n):
        q, default = build(spec.with_n(n))
        p = _resize_perturbation(perturbation, q.n, default)
        x = x_upsilon(q, p)
        margin = qc_margin(q, samples=samples, seed=seed, candidates=_witnesses(spec, q.n))
        t = associated_operator(q, p)
        ev = np.abs(nx.eig_general(t.matrix)[0])
        label["value"] = p.label()
        return SweepRow(q.n, x.sigma_min, x.sigma_max, x.cond, margin, float(ev.min()), float(ev.max()))

    rows = _ordered_map(one, dims)
    meta = {"model": spec.kind, "perturbation": label["value"]}
    return SweepReport(rows, meta)


def _decay_exponent(sv):
    n = sv.size
    k = np.arange(1, n + 1, dtype=float)
    lo = max(1, n // 4)
    if n - lo < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(k[lo:]), np.log(sv[lo:]), 1)
    return float(slope)


def discreteness_report(spec: ModelSpec, dims, perturbation=None, thresholds=(10.0, 100.0)):
    """Compactness and discreteness proxies across truncations.

    Returns a list of :class:`DiscretenessRow`, ascending in ``n``.
    """
    dims = [int(d) for d in dims]
    if dims != sorted(dims):
        raise InvalidSpec("sweep dimensions must be ascending")

    def one(n):
        q, default = build(spec.with_n(n))
        p = _resize_perturbation(perturbation, q.n, default)
        t = associated_operator(q, p)
        emb = nx.singular_values(q.metric.inv_sqrt)
        s = nx.singular_values(nx.add(t.matrix, p.matrix))
        res = 1.0 / s[::-1]
        ev = np.abs(nx.eig_general(t.matrix)[0])
        counts = {float(th): int(np.sum(ev <= th)) for th in thresholds}
        return DiscretenessRow(q.n, emb, res, _decay_exponent(emb), counts)

    return _ordered_map(one, dims)
