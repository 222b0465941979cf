"""Command-line front end: problem files in, machine-readable reports out.

Problem files are JSON documents.  A static analysis problem carries a
``dims`` block (``{"n": ..., "m": ...}``), the matrix ``A``, the matrix
``B`` when ``m > 0``, and an optional ``iqcs`` list of symmetric
constraint matrices.  Matrices are objects with explicit dimensions,
``{"rows": r, "cols": c, "data": [...]}`` with row-major flat data (a
nested list of rows is also accepted), so an ``n x 0`` matrix
serializes as ``{"rows": n, "cols": 0, "data": []}``.  A file may
instead (or additionally) carry a ``plant`` block and a ``filters``
list describing filtered constraints for the ``augment`` command, plus
an ``options`` block overriding default tolerances.

Reports are JSON documents with sorted keys and fixed formatting, so
identical inputs and flags produce byte-identical files.  A report
records the computed radius, bracket, attainment, the certificate
``(P, lambda)``, the stability verdict, the full witness when one was
found (``Q``, ``X``, ``U``, ``F``, eigen-groups with their angles and
basis columns, ``v``, the feedback gain, the hard-constraint shift and
the constraint lower bounds), and the verification margins that
``verify`` re-checks.  Eigen-group bases are stored as separate real
and imaginary parts so reports round-trip exactly.

Exit codes:

* 0 -- success.
* 1 -- input error: unreadable or unparseable file, inconsistent
  dimensions, or missing blocks.
* 2 -- ``radius``: no certified rate at or below the search ceiling.
* 3 -- ``worst-case``: no witness; the stage that stopped the pipeline
  is named in the output.
* 4 -- ``verify``: a recorded margin failed to reproduce or a check
  failed.

The environment variables ``IQCRADIUS_TOL``, ``IQCRADIUS_RHO_MAX``,
``IQCRADIUS_STRICT_EPS`` and ``IQCRADIUS_HORIZON`` override the
built-in defaults; a problem file's ``options`` block overrides the
environment, and command-line flags override everything.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamic_iqc import IqcFilter, PlantData, augment_all
from .model import DimensionMismatchError, IqcSet, SystemData
from .radius import classify, margin_matrix, spectral_radius
from .verify import check_witness
from .worstcase import (
    EigenGroup,
    WitnessReport,
    WorstCaseModes,
    build_trajectory,
    build_witness,
    verify_direction,
)

__all__ = ["main", "load_problem", "ProblemFormatError"]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_CERTIFICATE = 2
EXIT_NO_WITNESS = 3
EXIT_VERIFY_FAILED = 4

DEFAULT_TOL = 1e-6
DEFAULT_RHO_MAX = 1e3
DEFAULT_STRICT_EPS = 1e-8
DEFAULT_HORIZON = 300
# Horizon over which verification re-checks constraint partial sums.
CHECK_HORIZON = 10_000
# Agreement required between recorded and recomputed margins.
REPRODUCE_RTOL = 1e-9

_OPTION_KEYS = ("horizon", "rho_max", "strict_eps", "tol")
_FILTER_KEYS = ("A_psi", "B_psi1", "B_psi2", "C_psi", "D_psi1", "D_psi2", "M")


class ProblemFormatError(ValueError):
    """A problem or report file does not parse; names field and place."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ProblemFormatError(message)


def _as_count(value, field: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool),
             f"{field}: expected an integer, got {value!r}")
    _require(value >= 0, f"{field}: must be nonnegative, got {value}")
    return value


def _matrix_from_json(obj, field: str) -> np.ndarray:
    """Decode a matrix: either {rows, cols, data} or a list of rows."""
    if isinstance(obj, list):
        cols = None
        flat: list = []
        for idx, row in enumerate(obj):
            _require(isinstance(row, list),
                     f"{field}: row {idx} is not a list")
            if cols is None:
                cols = len(row)
            _require(len(row) == cols,
                     f"{field}: row {idx} has {len(row)} entries, "
                     f"expected {cols}")
            flat.extend(row)
        rows = len(obj)
        cols = cols if cols is not None else 0
    else:
        _require(isinstance(obj, dict),
                 f"{field}: expected a matrix object with rows/cols/data "
                 f"or a list of rows")
        for key in ("rows", "cols", "data"):
            _require(key in obj, f"{field}: missing '{key}'")
        rows = _as_count(obj["rows"], f"{field}.rows")
        cols = _as_count(obj["cols"], f"{field}.cols")
        data = obj["data"]
        _require(isinstance(data, list), f"{field}.data: expected a list")
        if data and all(isinstance(row, list) for row in data):
            _require(len(data) == rows,
                     f"{field}: expected {rows} rows, got {len(data)}")
            flat = []
            for idx, row in enumerate(data):
                _require(len(row) == cols,
                         f"{field}: row {idx} has {len(row)} entries, "
                         f"expected {cols}")
                flat.extend(row)
        else:
            _require(len(data) == rows * cols,
                     f"{field}: expected {rows * cols} entries for "
                     f"{rows}x{cols}, got {len(data)}")
            flat = data
    try:
        arr = np.asarray(flat, dtype=float).reshape(rows, cols)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{field}: entries must be numbers "
                                 f"({exc})") from None
    _require(bool(np.all(np.isfinite(arr))) if arr.size else True,
             f"{field}: entries must be finite")
    return arr


def _matrix_to_json(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"rows": int(arr.shape[0]), "cols": int(arr.shape[1]),
            "data": [float(x) for x in arr.ravel(order="C")]}


def _vector_from_json(obj, field: str) -> np.ndarray:
    _require(isinstance(obj, list), f"{field}: expected a list of numbers")
    try:
        arr = np.asarray(obj, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{field}: entries must be numbers "
                                 f"({exc})") from None
    return arr


def _num(x) -> float | None:
    """A float for JSON, with None standing in for non-finite values."""
    x = float(x)
    return x if np.isfinite(x) else None


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


@dataclass
class Problem:
    """Parsed problem file: static system, filters, and options."""

    sys: SystemData | None
    iqcs: IqcSet | None
    plant: PlantData | None
    filters: tuple[IqcFilter, ...]
    options: dict


def load_problem(path: str) -> Problem:
    """Parse a problem file; errors name the offending field."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(
            f"{path}: invalid document: {exc.msg} (line {exc.lineno}, "
            f"column {exc.colno})") from None
    _require(isinstance(doc, dict), f"{path}: top level must be an object")
    allowed = {"dims", "A", "B", "iqcs", "plant", "filter", "filters",
               "options"}
    for key in doc:
        _require(key in allowed, f"unknown top-level field '{key}'")

    sys_data = None
    iqcs = None
    if "dims" in doc or "A" in doc:
        _require("dims" in doc, "dims block required alongside A")
        dims = doc["dims"]
        _require(isinstance(dims, dict), "dims: expected an object")
        _require("n" in dims and "m" in dims, "dims: needs both n and m")
        n = _as_count(dims["n"], "dims.n")
        m = _as_count(dims["m"], "dims.m")
        _require(n >= 1, "dims.n: must be at least 1")
        _require("A" in doc, "A: required")
        A = _matrix_from_json(doc["A"], "A")
        _require(A.shape == (n, n),
                 f"A: expected {n}x{n}, got {A.shape[0]}x{A.shape[1]}")
        if m == 0:
            B = _matrix_from_json(doc["B"], "B") if "B" in doc \
                else np.zeros((n, 0))
        else:
            _require("B" in doc, "B: required when m > 0")
            B = _matrix_from_json(doc["B"], "B")
        _require(B.shape == (n, m),
                 f"B: expected {n}x{m}, got {B.shape[0]}x{B.shape[1]}")
        mats = []
        raw = doc.get("iqcs", [])
        _require(isinstance(raw, list), "iqcs: expected a list")
        for idx, entry in enumerate(raw):
            M = _matrix_from_json(entry, f"iqcs[{idx}]")
            d = n + m
            _require(M.shape == (d, d),
                     f"iqcs[{idx}]: expected {d}x{d}, got "
                     f"{M.shape[0]}x{M.shape[1]}")
            asym = float(np.linalg.norm(M - M.T))
            _require(asym <= 1e-9 * max(1.0, float(np.linalg.norm(M))),
                     f"iqcs[{idx}]: matrix is not symmetric")
            mats.append(M)
        sys_data = SystemData(A=A, B=B)
        iqcs = IqcSet.from_matrices(mats, dim=n + m)

    plant = None
    if "plant" in doc:
        blk = doc["plant"]
        _require(isinstance(blk, dict), "plant: expected an object")
        for key in blk:
            _require(key in {"A", "B", "C", "D"},
                     f"plant: unknown field '{key}'")
        _require("A" in blk, "plant.A: required")
        _require("C" in blk, "plant.C: required")
        kwargs = {k: _matrix_from_json(blk[k], f"plant.{k}")
                  for k in ("A", "B", "C", "D") if k in blk}
        try:
            plant = PlantData(**kwargs)
        except (DimensionMismatchError, ValueError) as exc:
            raise ProblemFormatError(f"plant: {exc}") from None

    raw_filters = doc.get("filters", [])
    if "filter" in doc:
        _require("filters" not in doc,
                 "give either 'filter' or 'filters', not both")
        raw_filters = [doc["filter"]]
    _require(isinstance(raw_filters, list), "filters: expected a list")
    filters = []
    for idx, blk in enumerate(raw_filters):
        _require(isinstance(blk, dict), f"filters[{idx}]: expected an object")
        for key in blk:
            _require(key in _FILTER_KEYS,
                     f"filters[{idx}]: unknown field '{key}'")
        for key in _FILTER_KEYS:
            _require(key in blk, f"filters[{idx}]: missing field '{key}'")
        parts = {k: _matrix_from_json(blk[k], f"filters[{idx}].{k}")
                 for k in _FILTER_KEYS}
        try:
            filters.append(IqcFilter(**parts))
        except (DimensionMismatchError, ValueError) as exc:
            raise ProblemFormatError(f"filters[{idx}]: {exc}") from None

    options = doc.get("options", {})
    _require(isinstance(options, dict), "options: expected an object")
    for key, value in options.items():
        _require(key in _OPTION_KEYS,
                 f"options: unknown key '{key}' (allowed: "
                 f"{', '.join(_OPTION_KEYS)})")
        if key == "horizon":
            _require(isinstance(value, int) and not isinstance(value, bool)
                     and value >= 1,
                     f"options.horizon: expected a positive integer, "
                     f"got {value!r}")
        else:
            _require(isinstance(value, (int, float))
                     and not isinstance(value, bool) and value > 0,
                     f"options.{key}: expected a positive number, "
                     f"got {value!r}")

    return Problem(sys=sys_data, iqcs=iqcs, plant=plant,
                   filters=tuple(filters), options=dict(options))


def _resolve(flag_value, options: dict, key: str, env_key: str, default,
             cast=float):
    """Flag > problem-file options > environment > built-in default."""
    if flag_value is not None:
        return flag_value
    if key in options:
        return cast(options[key])
    raw = os.environ.get(env_key)
    if raw is not None:
        try:
            return cast(raw)
        except ValueError:
            raise ProblemFormatError(
                f"environment {env_key}: expected a number, got {raw!r}"
            ) from None
    return default


def _need_system(prob: Problem) -> tuple[SystemData, IqcSet]:
    _require(prob.sys is not None,
             "problem file has no static system block (dims/A/B); "
             "run the augment command first")
    return prob.sys, prob.iqcs


# ---------------------------------------------------------------------------
# report assembly


def _certificate_json(cert) -> dict:
    return {
        "P": None if cert.P is None else _matrix_to_json(cert.P),
        "lambdas": None if cert.lambdas is None
        else [float(x) for x in np.asarray(cert.lambdas).reshape(-1)],
        "rho_cert": None if cert.rho_cert is None else _num(cert.rho_cert),
        "margin": _num(cert.margin),
    }


def _certificate_margins(sys_data: SystemData, iqcs: IqcSet, cert) -> dict | None:
    if cert.P is None:
        return None
    rho_c = cert.rho_cert if cert.rho_cert is not None else cert.rho
    lambdas = (np.zeros(len(iqcs)) if cert.lambdas is None
               else np.asarray(cert.lambdas, dtype=float).reshape(-1))
    W = margin_matrix(sys_data, iqcs, rho_c, cert.P, lambdas)
    eig = float(np.linalg.eigvalsh(W)[-1]) if W.shape[0] else 0.0
    pmin = float(np.linalg.eigvalsh(np.asarray(cert.P))[0])
    return {"certificate_eig": eig, "p_min_eig": pmin}


def _witness_json(report: WitnessReport) -> dict:
    modes = report.modes
    groups = [{
        "theta": float(g.theta),
        "multiplicity": int(g.multiplicity),
        "W_re": _matrix_to_json(g.W.real),
        "W_im": _matrix_to_json(g.W.imag),
    } for g in modes.groups]
    return {
        "d": int(modes.d),
        "Q": _matrix_to_json(modes.Q),
        "X": _matrix_to_json(modes.X),
        "U": _matrix_to_json(modes.U),
        "F": _matrix_to_json(modes.F),
        "groups": groups,
        "v": [float(x) for x in np.asarray(modes.v).reshape(-1)],
        "gain": None if report.gain is None else _matrix_to_json(report.gain),
        "iqc_lower_bounds": [float(x) for x in report.iqc_lower_bounds],
        "hard_shift": None if report.hard_shift is None
        else int(report.hard_shift),
        "pointwise": bool(report.pointwise),
        "growth": float(report.growth),
        "notes": list(report.notes),
    }


def _witness_margins(wc) -> dict:
    return {
        "dynamics_residual": float(wc.dynamics_residual),
        "iqc_margins": [float(x) for x in wc.iqc_margins],
        "norm_drift": float(wc.norm_drift),
        "direction_norm": float(wc.direction_norm),
        "gain_residual": _num(wc.gain_residual),
        "steps": int(wc.steps),
    }


def _witness_from_json(blk: dict, iqcs: IqcSet) -> WitnessReport:
    for key in ("d", "Q", "X", "U", "F", "groups", "v", "gain",
                "iqc_lower_bounds", "hard_shift", "pointwise", "growth",
                "notes"):
        _require(key in blk, f"report witness: missing field '{key}'")
    d = _as_count(blk["d"], "witness.d")
    Q = _matrix_from_json(blk["Q"], "witness.Q")
    X = _matrix_from_json(blk["X"], "witness.X")
    U = _matrix_from_json(blk["U"], "witness.U")
    F = _matrix_from_json(blk["F"], "witness.F")
    v = _vector_from_json(blk["v"], "witness.v")
    groups = []
    for idx, g in enumerate(blk["groups"]):
        W_re = _matrix_from_json(g["W_re"], f"witness.groups[{idx}].W_re")
        W_im = _matrix_from_json(g["W_im"], f"witness.groups[{idx}].W_im")
        groups.append(EigenGroup(theta=float(g["theta"]),
                                 W=W_re + 1j * W_im))
    stacked = np.vstack([X, U])
    H = tuple(stacked.T @ M @ stacked for M in iqcs)
    modes = WorstCaseModes(Q=Q, d=d, X=X, U=U, F=F, groups=tuple(groups),
                           H=H, v=v)
    gain = None if blk["gain"] is None \
        else _matrix_from_json(blk["gain"], "witness.gain")
    return WitnessReport(
        modes=modes, trajectory=build_trajectory(modes, 1), gain=gain,
        iqc_lower_bounds=_vector_from_json(blk["iqc_lower_bounds"],
                                           "witness.iqc_lower_bounds"),
        hard_shift=None if blk["hard_shift"] is None
        else int(blk["hard_shift"]),
        pointwise=bool(blk["pointwise"]), growth=float(blk["growth"]),
        notes=tuple(blk["notes"]))


def _write_out(out_path: str | None, doc: dict) -> None:
    if out_path:
        Path(out_path).write_text(_dump(doc))


# ---------------------------------------------------------------------------
# subcommands


def cmd_radius(args) -> int:
    prob = load_problem(args.problem)
    sys_data, iqcs = _need_system(prob)
    tol = _resolve(args.tol, prob.options, "tol", "IQCRADIUS_TOL",
                   DEFAULT_TOL)
    rho_max = _resolve(args.rho_max, prob.options, "rho_max",
                       "IQCRADIUS_RHO_MAX", DEFAULT_RHO_MAX)
    strict_eps = _resolve(args.strict_eps, prob.options, "strict_eps",
                          "IQCRADIUS_STRICT_EPS", DEFAULT_STRICT_EPS)
    horizon = _resolve(None, prob.options, "horizon", "IQCRADIUS_HORIZON",
                       DEFAULT_HORIZON, cast=int)
    verdict = classify(sys_data, iqcs, bisect_tol=tol, rho_max=rho_max,
                       strict_eps=strict_eps, witness_horizon=horizon)
    cert = verdict.certificate
    report = {
        "kind": "radius",
        "problem": {"n": sys_data.n, "m": sys_data.m,
                    "iqc_count": len(iqcs)},
        "options": {"tol": float(tol), "rho_max": float(rho_max),
                    "strict_eps": float(strict_eps)},
        "rho": _num(cert.rho),
        "bracket": [_num(cert.bracket[0]), _num(cert.bracket[1])],
        "attained": bool(cert.attained),
        "status": cert.status,
        "message": cert.message,
        "verdict": verdict.classification,
        "reasons": list(verdict.reasons),
        "certificate": _certificate_json(cert),
        "margins": {"certificate": _certificate_margins(sys_data, iqcs, cert)},
        "witness": None,
    }
    _write_out(args.out, report)
    if np.isfinite(cert.rho):
        print(f"rho = {cert.rho:.9g}")
        print(f"bracket = [{cert.bracket[0]:.9g}, {cert.bracket[1]:.9g}]")
        print(f"attained = {'true' if cert.attained else 'false'}")
    else:
        print(f"rho = unbounded (no certified rate up to "
              f"rho_max = {rho_max:g})")
    print(f"verdict = {verdict.classification}")
    for reason in verdict.reasons:
        print(f"  - {reason}")
    if args.out:
        print(f"report written to {args.out}")
    return EXIT_OK if np.isfinite(cert.rho) else EXIT_NO_CERTIFICATE


def cmd_worst_case(args) -> int:
    prob = load_problem(args.problem)
    sys_data, iqcs = _need_system(prob)
    tol = _resolve(None, prob.options, "tol", "IQCRADIUS_TOL", DEFAULT_TOL)
    rho_max = _resolve(None, prob.options, "rho_max", "IQCRADIUS_RHO_MAX",
                       DEFAULT_RHO_MAX)
    strict_eps = _resolve(None, prob.options, "strict_eps",
                          "IQCRADIUS_STRICT_EPS", DEFAULT_STRICT_EPS)
    horizon = _resolve(args.horizon, prob.options, "horizon",
                       "IQCRADIUS_HORIZON", DEFAULT_HORIZON, cast=int)
    cert = spectral_radius(sys_data, iqcs, bisect_tol=tol, rho_max=rho_max,
                           strict_eps=strict_eps)
    if not np.isfinite(cert.rho):
        stage, reason = "radius-precheck", \
            f"no certified feasible rate up to rho_max = {rho_max:g}"
        outcome = None
    else:
        outcome = build_witness(sys_data, iqcs, rho=cert.rho,
                                horizon=horizon, bisect_tol=tol,
                                strict_eps=strict_eps, radius_cert=cert)
        stage, reason = outcome.stage, outcome.reason

    report = {
        "kind": "worst-case",
        "problem": {"n": sys_data.n, "m": sys_data.m,
                    "iqc_count": len(iqcs)},
        "options": {"tol": float(tol), "rho_max": float(rho_max),
                    "strict_eps": float(strict_eps),
                    "horizon": int(horizon)},
        "rho": _num(cert.rho),
        "bracket": [_num(cert.bracket[0]), _num(cert.bracket[1])],
        "attained": bool(cert.attained),
        "certificate": _certificate_json(cert),
        "margins": {"certificate": _certificate_margins(sys_data, iqcs,
                                                        cert)},
        "witness": None,
        "stage": stage,
        "reason": reason,
    }

    if outcome is not None and outcome.ok:
        wc = check_witness(sys_data, outcome.report, iqcs,
                           horizon=CHECK_HORIZON)
        report["witness"] = _witness_json(outcome.report)
        report["margins"]["witness"] = _witness_margins(wc)
        report["margins"]["check_horizon"] = CHECK_HORIZON
        _write_out(args.out, report)
        modes = outcome.report.modes
        print(f"witness found at rho = {cert.rho:.9g}")
        print(f"modes: d = {modes.d}, groups = {len(modes.groups)}, "
              f"growth = {outcome.report.growth:.9g}")
        print(f"checks: dynamics residual = {wc.dynamics_residual:.3e}, "
              f"norm drift = {wc.norm_drift:.3e}, "
              f"|Xv| = {wc.direction_norm:.6g}")
        if len(iqcs):
            margin = float(np.min(wc.iqc_margins))
            print(f"constraint sum margin over {wc.steps} steps = "
                  f"{margin:.3e}")
        if not wc.ok:
            print("re-verification failed; see the report margins")
            if args.out:
                print(f"report written to {args.out}")
            return EXIT_NO_WITNESS
        if args.out:
            print(f"report written to {args.out}")
        return EXIT_OK

    _write_out(args.out, report)
    print(f"no witness: stage = {stage}")
    print(f"reason: {reason}")
    if args.out:
        print(f"report written to {args.out}")
    return EXIT_NO_WITNESS


def _load_report(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(
            f"{path}: invalid document: {exc.msg} (line {exc.lineno}, "
            f"column {exc.colno})") from None
    _require(isinstance(doc, dict), f"{path}: top level must be an object")
    _require(doc.get("kind") in {"radius", "worst-case"},
             f"{path}: not a report file (kind = {doc.get('kind')!r})")
    return doc


def _close(recorded, recomputed) -> bool:
    if recorded is None or recomputed is None:
        return recorded is None and recomputed is None
    return abs(float(recorded) - float(recomputed)) \
        <= REPRODUCE_RTOL * (1.0 + abs(float(recomputed)))


def cmd_verify(args) -> int:
    report = _load_report(args.report)
    prob = load_problem(args.problem)
    sys_data, iqcs = _need_system(prob)
    recorded_dims = report.get("problem", {})
    if (recorded_dims.get("n") != sys_data.n
            or recorded_dims.get("m") != sys_data.m
            or recorded_dims.get("iqc_count") != len(iqcs)):
        raise ProblemFormatError(
            f"mismatched dimensions: report was made for "
            f"n={recorded_dims.get('n')}, m={recorded_dims.get('m')}, "
            f"iqcs={recorded_dims.get('iqc_count')} but the problem has "
            f"n={sys_data.n}, m={sys_data.m}, iqcs={len(iqcs)}")

    failures: list[str] = []

    def item(name: str, ok: bool, detail: str) -> None:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failures.append(name)

    cert_blk = report.get("certificate") or {}
    recorded_margins = (report.get("margins") or {}).get("certificate")
    if cert_blk.get("P") is not None:
        P = _matrix_from_json(cert_blk["P"], "report certificate.P")
        lambdas = (np.zeros(len(iqcs)) if cert_blk.get("lambdas") is None
                   else _vector_from_json(cert_blk["lambdas"],
                                          "report certificate.lambdas"))
        _require(lambdas.size == len(iqcs),
                 f"report certificate.lambdas: expected {len(iqcs)} "
                 f"entries, got {lambdas.size}")
        rho_c = cert_blk.get("rho_cert")
        rho_c = float(rho_c) if rho_c is not None else float(report["rho"])
        W = margin_matrix(sys_data, iqcs, rho_c, P, lambdas)
        eig = float(np.linalg.eigvalsh(W)[-1]) if W.shape[0] else 0.0
        pmin = float(np.linalg.eigvalsh(P)[0])
        _require(recorded_margins is not None,
                 "report: certificate present but no recorded margins")
        item("lyapunov-margin-reproduces",
             _close(recorded_margins.get("certificate_eig"), eig)
             and _close(recorded_margins.get("p_min_eig"), pmin),
             f"recorded eig {recorded_margins.get('certificate_eig'):.6e}, "
             f"recomputed {eig:.6e}")
        scale = sys_data.scale() + iqcs.scale()
        item("lyapunov-certificate",
             eig <= 1e-6 * scale and pmin >= 1.0 - 1e-6,
             f"inequality eig {eig:.3e} (tol {1e-6 * scale:.1e}), "
             f"min eig of P {pmin:.9g}")
    else:
        print("note: report carries no certificate matrix; "
              "nothing to re-check there")

    wit_blk = report.get("witness")
    if wit_blk is not None:
        wrep = _witness_from_json(wit_blk, iqcs)
        recorded = (report.get("margins") or {}).get("witness")
        _require(recorded is not None,
                 "report: witness present but no recorded margins")
        horizon = int((report.get("margins") or {})
                      .get("check_horizon", CHECK_HORIZON))
        wc = check_witness(sys_data, wrep, iqcs, horizon=horizon)
        rec_iqc = recorded.get("iqc_margins", [])
        iqc_repro = (len(rec_iqc) == wc.iqc_margins.size
                     and all(_close(a, b) for a, b
                             in zip(rec_iqc, wc.iqc_margins)))
        item("witness-margins-reproduce",
             _close(recorded.get("dynamics_residual"), wc.dynamics_residual)
             and _close(recorded.get("norm_drift"), wc.norm_drift)
             and _close(recorded.get("direction_norm"), wc.direction_norm)
             and _close(recorded.get("gain_residual"),
                        _num(wc.gain_residual))
             and iqc_repro,
             f"dynamics {wc.dynamics_residual:.3e}, "
             f"drift {wc.norm_drift:.3e}, |Xv| {wc.direction_norm:.6g}")
        item("witness-checks", wc.ok,
             f"dynamics ok {wc.dynamics_ok}, sums ok {wc.iqc_ok}, "
             f"norm ok {wc.norm_ok}, direction ok {wc.direction_ok}, "
             f"gain ok {wc.gain_ok}")
        defect = verify_direction(wrep.modes, wrep.modes.v)
        item("technical-condition", defect == "",
             defect if defect else "group-projected forms nonnegative")

    ok = not failures
    print(f"verification: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_augment(args) -> int:
    prob = load_problem(args.problem)
    _require(prob.plant is not None,
             "problem file has no plant block (required by augment)")
    _require(len(prob.filters) >= 1,
             "problem file has no filter blocks (required by augment)")
    sys_aug, iqcs_aug = augment_all(prob.plant, prob.filters)
    doc = {
        "dims": {"n": sys_aug.n, "m": sys_aug.m},
        "A": _matrix_to_json(sys_aug.A),
        "B": _matrix_to_json(sys_aug.B),
        "iqcs": [_matrix_to_json(M) for M in iqcs_aug],
    }
    if prob.options:
        doc["options"] = prob.options
    _write_out(args.out, doc)
    psi_total = sys_aug.n - prob.plant.n
    print(f"augmented system: n = {sys_aug.n} ({prob.plant.n} plant + "
          f"{psi_total} filter states), m = {sys_aug.m}, "
          f"constraints = {len(iqcs_aug)}")
    print(f"problem written to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="iqcradius",
        description="Certified spectral-radius analysis of discrete-time "
                    "LTI systems under integral quadratic constraints.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("radius",
                       help="compute the constrained spectral radius, "
                            "classify stability, and emit a certificate")
    p.add_argument("problem", help="problem file (JSON)")
    p.add_argument("--tol", type=float, default=None,
                   help="radius bracketing tolerance")
    p.add_argument("--rho-max", dest="rho_max", type=float, default=None,
                   help="largest rate searched for a certificate")
    p.add_argument("--strict-eps", dest="strict_eps", type=float,
                   default=None, help="strict-feasibility threshold")
    p.add_argument("--out", default=None, help="write the report here")
    p.set_defaults(func=cmd_radius)

    p = sub.add_parser("worst-case",
                       help="extract a non-convergent worst-case witness "
                            "at the stability boundary")
    p.add_argument("problem", help="problem file (JSON)")
    p.add_argument("--horizon", type=int, default=None,
                   help="witness trajectory length")
    p.add_argument("--out", default=None, help="write the report here")
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("verify",
                       help="re-check a report's margins against its "
                            "problem file")
    p.add_argument("report", help="report file produced by radius or "
                                  "worst-case")
    p.add_argument("problem", help="problem file the report was made from")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("augment",
                       help="rewrite filtered constraints as static ones "
                            "on an augmented state")
    p.add_argument("problem", help="problem file with plant and filter "
                                   "blocks")
    p.add_argument("--out", required=True,
                   help="write the augmented problem here")
    p.set_defaults(func=cmd_augment)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
