"""Command-line driver: ``formkit {check,range,scan,sweep} DOCUMENT``.

Instance documents are JSON. Complex numbers are written as ``[re, im]`` or
plain numbers, dense matrices as row-major nested lists::

    {
      "space": {"dim": 3},
      "form": {"kind": "diagonal", "payload": [1, 2, 3]},
      "metric": {"kind": "auto"},
      "perturbations": [{"kind": "scalar", "lambda": [0, 1]}],
      "tolerances": {"identity": 1e-10, "solvability": 1e-8, "spectral": 1e-8},
      "seed": 0,
      "sweep": {"dims": [64, 256, 1024]}
    }

``form.kind`` is ``dense``, ``diagonal`` or ``model``; a model payload holds
:class:`~formkit.models.ModelSpec` fields. Exit codes: 0 every verdict passed,
1 some verdict failed, 2 the document or flags could not be parsed,
3 a numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from . import numerics as nx
from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidSpec,
    NotHermitian,
    NotKrein,
    NotPositiveDefinite,
    NotSectorial,
    NumericalFailure,
    ParseError,
    Singular,
)
from .forms import DEFAULT_ANGLES, DomainMetric, FormMatrix, numerical_range, q_closed_constants, sectorial_fit
from .krein import SYMMETRY_TOL, krein_decompose
from .models import ModelSpec, build, discreteness_report, truncation_sweep
from .representation import (
    adjoint_theorem_check,
    associated_operator,
    eigencheck,
    symmetry_selfadjoint_check,
    verify_representation,
)
from .solvability import Perturbation, criteria, x_upsilon

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_TOLERANCES = {"identity": 1e-10, "solvability": 1e-8, "spectral": 1e-8}
WITNESS_VECTOR_MAX = 64


@dataclass
class Instance:
    q: object
    perturbations: list
    tolerances: dict
    seed: int
    dims: Optional[list] = None
    model: Optional[ModelSpec] = None
    sources: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# parsing


def _complex(v, where):
    if isinstance(v, bool):
        raise ParseError(f"{where}: expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise ParseError(f"{where}: expected a number or [re, im], got {v!r}")


def _vector(v, where):
    if not isinstance(v, list) or not v:
        raise ParseError(f"{where}: expected a non-empty list")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(v)], dtype=complex)


def _matrix(v, where):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ParseError(f"{where}: expected a non-empty list of rows")
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(v)]
    if len({r.size for r in rows}) != 1 or rows[0].size != len(rows):
        raise ParseError(f"{where}: matrix must be square")
    return np.array(rows)


def _section(doc, key, required=True):
    v = doc.get(key)
    if v is None:
        if required:
            raise ParseError(f"missing '{key}'")
        return None
    if not isinstance(v, dict):
        raise ParseError(f"'{key}' must be an object")
    return v


_MODEL_FIELDS = {"kind", "n", "alpha", "sequence", "lambda", "half_width", "step", "vertex", "seed"}


def _model_spec(payload, seed, dim):
    if not isinstance(payload, dict) or "kind" not in payload:
        raise ParseError("model payload must be an object with a 'kind'")
    unknown = set(payload) - _MODEL_FIELDS
    if unknown:
        raise ParseError(f"unknown model fields {sorted(unknown)}")
    kw = {k: payload[k] for k in ("kind", "n", "sequence", "half_width", "step", "vertex") if k in payload}
    if "alpha" in payload:
        kw["alpha"] = tuple(_vector(payload["alpha"], "form.payload.alpha"))
    if "lambda" in payload:
        kw["lam"] = _complex(payload["lambda"], "form.payload.lambda")
    kw["seed"] = int(payload.get("seed", seed))
    if "n" not in kw and dim is not None and kw["kind"] not in ("mult_real", "mult_complex"):
        kw["n"] = dim
    try:
        return ModelSpec(**kw)
    except TypeError as exc:
        raise ParseError(f"model payload: {exc}") from exc


def _perturbation(entry, n, i):
    where = f"perturbations[{i}]"
    if not isinstance(entry, dict):
        raise ParseError(f"{where}: expected an object")
    kind = entry.get("kind")
    if kind == "scalar":
        if "lambda" not in entry:
            raise ParseError(f"{where}: scalar perturbation needs 'lambda'")
        return Perturbation.scalar(_complex(entry["lambda"], f"{where}.lambda"), n)
    if kind == "dense":
        b = _matrix(entry.get("payload"), f"{where}.payload")
        if b.shape[0] != n:
            raise ParseError(f"{where}: dimension {b.shape[0]} does not match {n}")
        return Perturbation.dense(b)
    raise ParseError(f"{where}: unknown kind {kind!r}")


def load_document(path, overrides=None):
    """Parse an instance document into an :class:`Instance`.

    ``overrides`` may set ``seed`` and tolerance entries (from CLI flags).
    Every malformed or inconsistent input raises :class:`ParseError`.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    overrides = overrides or {}
    try:
        return _instance(doc, overrides)
    except (InvalidSpec, DimensionMismatch, NotHermitian, IndexOutOfRange) as exc:
        raise ParseError(str(exc)) from exc
    except NotPositiveDefinite as exc:
        raise ParseError(f"metric: {exc}") from exc
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc)) from exc


def _instance(doc, overrides):
    seed = overrides.get("seed")
    if seed is None:
        seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ParseError("'seed' must be an integer")

    tol = dict(DEFAULT_TOLERANCES)
    tsec = _section(doc, "tolerances", required=False) or {}
    for k, v in tsec.items():
        if k not in tol:
            raise ParseError(f"unknown tolerance {k!r}")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ParseError(f"tolerance {k!r} must be a positive number")
        tol[k] = float(v)
    for k, v in overrides.items():
        if k in tol and v is not None:
            tol[k] = float(v)

    space = _section(doc, "space", required=False) or {}
    dim = space.get("dim")
    if dim is not None and (not isinstance(dim, int) or isinstance(dim, bool) or dim < 1):
        raise ParseError("space.dim must be a positive integer")

    form = _section(doc, "form")
    fkind = form.get("kind")
    metric = _section(doc, "metric", required=False) or {"kind": "auto"}
    mkind = metric.get("kind", "auto")
    model = None
    default_p = None

    if fkind == "model":
        model = _model_spec(form.get("payload"), seed, dim)
        if mkind != "auto":
            raise ParseError("model forms carry their own metric; use metric kind 'auto'")
        q, default_p = build(model)
    elif fkind in ("dense", "diagonal"):
        if fkind == "dense":
            m = _matrix(form.get("payload"), "form.payload")
        else:
            m = _vector(form.get("payload"), "form.payload")
        n = m.shape[0]
        if mkind == "identity":
            g = np.ones(n)
        elif mkind == "auto":
            if fkind != "diagonal":
                raise ParseError("metric 'auto' is only valid for diagonal or model forms")
            g = 1.0 + np.abs(m)
        elif mkind == "diagonal":
            g = _vector(metric.get("payload"), "metric.payload")
        elif mkind == "dense":
            g = _matrix(metric.get("payload"), "metric.payload")
        else:
            raise ParseError(f"unknown metric kind {mkind!r}")
        if g.shape[0] != n:
            raise ParseError(f"metric dimension {g.shape[0]} does not match form dimension {n}")
        q = q_closed_constants(FormMatrix(m), DomainMetric(g))
    else:
        raise ParseError(f"unknown form kind {fkind!r}")

    if dim is not None and dim != q.n and fkind != "model":
        raise ParseError(f"space.dim = {dim} but the form has dimension {q.n}")

    entries = doc.get("perturbations")
    if entries is None:
        if default_p is None:
            raise ParseError("'perturbations' is required unless the form is a model")
        perts = [default_p]
    else:
        if not isinstance(entries, list) or not entries:
            raise ParseError("'perturbations' must be a non-empty list")
        perts = [_perturbation(e, q.n, i) for i, e in enumerate(entries)]

    dims = None
    sweep = _section(doc, "sweep", required=False)
    if sweep is not None:
        dims = _dims(sweep.get("dims"), "sweep.dims")
    return Instance(q, perts, tol, seed, dims, model)


def _dims(v, where):
    if not isinstance(v, list) or not v or not all(isinstance(d, int) and not isinstance(d, bool) for d in v):
        raise ParseError(f"{where}: expected a non-empty list of integers")
    if v != sorted(v) or len(set(v)) != len(v):
        raise ParseError(f"{where}: dimensions must be strictly ascending")
    return list(v)


def parse_grid(text):
    """``"a,b,c"`` or ``"a:b:step"`` (inclusive of ``b`` up to rounding)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            a, b, h = parts
            if not h > 0 or b < a:
                raise ParseError(f"bad grid {text!r}: need a <= b and step > 0")
            count = int(math.floor((b - a) / h + 1e-9)) + 1
            return [a + i * h for i in range(count)]
        vals = [complex(x.strip().replace("i", "j")) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ParseError(f"bad grid {text!r}") from exc
    if not vals:
        raise ParseError("empty lambda grid")
    return vals


# ---------------------------------------------------------------------------
# serialisation


def _num(x):
    """Round to 12 significant digits for serialisation."""
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        if x.imag == 0:
            return _num(float(x.real))
        return [_num(float(x.real)), _num(float(x.imag))]
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _witness(v):
    if v is None:
        return None
    v = np.asarray(v)
    out = {"basis_index": int(np.argmax(np.abs(v))) + 1}
    if v.size <= WITNESS_VECTOR_MAX:
        out["vector"] = [_num(complex(z)) for z in v]
    return out


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def _record(name, verdict, constants=None, residuals=None, witnesses=None, reason=None, perturbation=None):
    rec = {"name": name, "verdict": verdict}
    if perturbation is not None:
        rec["perturbation"] = perturbation
    if constants:
        rec["constants"] = {k: _num(v) for k, v in constants.items()}
    if residuals:
        rec["residuals"] = {k: _num(v) for k, v in residuals.items()}
    if witnesses:
        rec["witnesses"] = witnesses
    if reason:
        rec["reason"] = reason
    return rec


def _verdict(ok):
    return "pass" if ok else "fail"


def run_checks(inst: Instance):
    """Run every check on every perturbation; returns the list of records."""
    q = inst.q
    tol = inst.tolerances
    records = [
        _record("q_closed_constants", "pass", {"alpha": q.alpha, "beta": q.beta}),
    ]
    try:
        sec = sectorial_fit(q.form)
        records.append(_record("sectorial_fit", "info", {"gamma": sec.vertex, "half_angle": sec.half_angle}))
    except NotSectorial as exc:
        records.append(_record("sectorial_fit", "info", reason=f"not sectorial: {exc}"))

    for i, p in enumerate(inst.perturbations):
        label = f"{i}:{p.label()}"
        x = x_upsilon(q, p)
        thr = tol["solvability"] * x.sigma_max
        cert = criteria(q, p, thr)
        wit = {}
        if cert.witness_a is not None:
            wit["kernel_a"] = _witness(cert.witness_a)
        if cert.witness_b is not None:
            wit["kernel_b"] = _witness(cert.witness_b)
        records.append(
            _record(
                "criteria",
                _verdict(cert.kernel_a == cert.kernel_b and abs(cert.c1 - cert.c2) <= 1e-10 * (1 + cert.c1)),
                {"c1": cert.c1, "c2": cert.c2, "kernel_a": cert.kernel_a, "kernel_b": cert.kernel_b},
                perturbation=label,
                witnesses=wit or None,
            )
        )
        records.append(
            _record(
                "in_P0",
                _verdict(cert.in_P0),
                {"sigma_min": x.sigma_min, "sigma_max": x.sigma_max, "threshold": thr},
                perturbation=label,
                witnesses=wit or None,
            )
        )
        skip = None if cert.in_P0 else "perturbation is not in P0"
        names = ["associated_operator", "adjoint_theorem", "symmetry_selfadjoint", "eigencheck"]
        if skip:
            records.extend(_record(nm, "skip", reason=skip, perturbation=label) for nm in names)
        else:
            t = associated_operator(q, p, thr)
            rep = verify_representation(t, q, seed=inst.seed)
            ok = t.reconstruction_residual <= tol["identity"] and rep <= tol["identity"] and t.resolvent_bound_holds
            records.append(
                _record(
                    "associated_operator",
                    _verdict(ok),
                    {"resolvent_norm": t.resolvent_norm, "resolvent_bound": t.resolvent_bound},
                    {"reconstruction": t.reconstruction_residual, "representation": rep},
                    perturbation=label,
                )
            )
            adj = adjoint_theorem_check(q, p, tol=10 * tol["identity"])
            records.append(_record("adjoint_theorem", _verdict(adj.passed), residuals={"adjoint": adj.residual}, perturbation=label))
            sym = symmetry_selfadjoint_check(q, p, tol=10 * tol["identity"])
            records.append(
                _record(
                    "symmetry_selfadjoint",
                    _verdict(sym.passed),
                    residuals={"selfadjoint_defect": sym.residual},
                    reason=sym.detail,
                    perturbation=label,
                )
            )
            _, _, eok = eigencheck(t, q, tol=tol["spectral"])
            records.append(_record("eigencheck", _verdict(eok), perturbation=label))

        if nx.hermitian_defect(nx.add(q.matrix, p.matrix)) > SYMMETRY_TOL:
            records.append(_record("krein_decompose", "skip", reason="form plus perturbation is not symmetric", perturbation=label))
        else:
            try:
                kd = krein_decompose(q, p, thr)
                records.append(
                    _record(
                        "krein_decompose",
                        _verdict(cert.in_P0),
                        {"n_plus": kd.signature[0], "n_minus": kd.signature[1]},
                        perturbation=label,
                    )
                )
            except NotKrein as exc:
                records.append(
                    _record(
                        "krein_decompose",
                        "fail",
                        {"mu": exc.witness},
                        witnesses={"pencil": _witness(exc.vector)},
                        reason="zero pencil eigenvalue",
                        perturbation=label,
                    )
                )
    return records


def cmd_check(args):
    inst = load_document(args.document, {"seed": args.seed, "identity": args.tol_identity, "solvability": args.tol_solv})
    records = run_checks(inst)
    report = {
        "environment": {
            "version": __version__,
            "seed": inst.seed,
            "tolerances": {k: _num(v) for k, v in inst.tolerances.items()},
        },
        "dimension": inst.q.n,
        "checks": records,
    }
    failed = [r for r in records if r["verdict"] == "fail"]
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        _emit(text, args.out)
    for r in records:
        who = f" [{r['perturbation']}]" if "perturbation" in r else ""
        extra = f" ({r['reason']})" if r.get("reason") else ""
        print(f"{r['verdict']:>4}  {r['name']}{who}{extra}")
    print(f"{len(failed)} failed of {sum(r['verdict'] in ('pass', 'fail') for r in records)} verdicts")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_range(args):
    inst = load_document(args.document, {"seed": args.seed})
    if args.angles < 8:
        raise ParseError("--angles must be at least 8")
    poly = numerical_range(inst.q.form, args.angles)
    rows = [(th, z.real, z.imag) for th, z in zip(poly.thetas, poly.points)]
    _emit(_csv(["theta", "re", "im"], rows), args.out)
    return EXIT_OK


def cmd_scan(args):
    inst = load_document(args.document, {"seed": args.seed, "solvability": args.tol_solv})
    grid = parse_grid(args.lambda_grid)
    q = inst.q
    symmetric = nx.hermitian_defect(q.matrix) <= SYMMETRY_TOL
    header = ["lambda_re", "lambda_im", "sigma_min", "in_P0"]
    if symmetric:
        header.append("is_gap_point")
    rows = []
    for lam in grid:
        lam = complex(lam)
        x = x_upsilon(q, Perturbation.scalar(lam, q.n))
        ok = x.sigma_min > inst.tolerances["solvability"] * x.sigma_max
        row = [lam.real, lam.imag, x.sigma_min, ok]
        if symmetric:
            row.append(bool(ok and lam.imag == 0))
        rows.append(row)
    _emit(_csv(header, rows), args.out)
    return EXIT_OK


def cmd_sweep(args):
    inst = load_document(args.document, {"seed": args.seed})
    if inst.model is None:
        raise ParseError("sweep needs a model form")
    dims = _dims([int(d) for d in args.dims.split(",")], "--dims") if args.dims else inst.dims
    if not dims:
        raise ParseError("no sweep dimensions (use --dims or sweep.dims)")
    p = inst.perturbations[0]
    lam = p.lam if p.kind == "scalar" else None
    report = truncation_sweep(inst.model, dims, lam, seed=inst.seed)
    rows = [(r.n, r.sigma_min, r.cond, r.qc_margin, r.eig_min, r.eig_max) for r in report.rows]
    _emit(_csv(["n", "sigma_min", "cond", "qc_margin", "eig_min", "eig_max"], rows), args.out)
    if args.discreteness:
        disc = discreteness_report(inst.model, dims, lam)
        drows = []
        for d in disc:
            for k in range(d.embedding_sv.size):
                drows.append((d.n, k + 1, d.embedding_sv[k], d.resolvent_sv[k]))
        target = args.discreteness if args.discreteness != "-" else None
        _emit(_csv(["n", "k", "sigma_embedding", "sigma_resolvent"], drows), target)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="formkit", description="Solvable sesquilinear forms on finite truncations.")
    parser.add_argument("--version", action="version", version=f"formkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("document", help="instance document (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the document seed")
        p.add_argument("--out", default=None, help="output file (default: stdout)")

    p = sub.add_parser("check", help="run every check suite and write a JSON report")
    common(p)
    p.add_argument("--tol-identity", type=float, default=None)
    p.add_argument("--tol-solv", type=float, default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("range", help="numerical-range support points as CSV")
    common(p)
    p.add_argument("--angles", type=int, default=DEFAULT_ANGLES)
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("scan", help="solvability of -lambda*iota over a lambda grid")
    common(p)
    p.add_argument("--lambda-grid", required=True, help='"a,b,c" or "a:b:step"')
    p.add_argument("--tol-solv", type=float, default=None)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("sweep", help="truncation sweep of a model as CSV")
    common(p)
    p.add_argument("--dims", default=None, help="comma-separated ascending dimensions")
    p.add_argument("--discreteness", default=None, metavar="PATH", help="also write singular-value tails ('-' for stdout)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which matches the parse-error code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NumericalFailure, Singular, NotPositiveDefinite) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
