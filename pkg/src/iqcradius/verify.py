"""Independent re-checks of certificates, witnesses, and trajectories.

Everything the rest of the package produces can be re-verified here
without trusting the solver that produced it: Lyapunov descent along a
trajectory, constraint partial sums against their recorded lower
bounds, witness orbit properties, and growth diagnostics.  All checks
are plain linear algebra over the reported data.

The Lyapunov function along a trajectory is

    V_k = x_k' P x_k + sum_i lambda_i * S_i(k),

where ``S_i(k)`` is the running constraint sum over steps j < k, and
its one-step difference obeys the algebraic identity

    V_{k+1} - V_k = [x_k; u_k]' (L_1(P) + sum_i lambda_i M_i) [x_k; u_k].

``lyapunov_trace`` evaluates both sides and reports their agreement.

Boundedness diagnostics state horizon-bounded facts only (the maximum
norm, a half-versus-half growth ratio, and a fitted geometric rate); a
finite trajectory cannot certify a limit, so no field here claims one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (
    DimensionMismatchError,
    IqcSet,
    SystemData,
    Trajectory,
    iqc_partial_sums,
)
from .radius import RadiusCertificate, margin_matrix
from .worstcase import WitnessReport

__all__ = [
    "LyapunovTrace",
    "TrajectoryDiagnostics",
    "WitnessCheck",
    "lyapunov_trace",
    "strengthen_certificate",
    "trajectory_diagnostics",
    "check_witness",
]

# Agreement tolerance for the telescoped-versus-direct difference
# identity; it is exact algebra, so only rounding noise is allowed.
IDENTITY_RTOL = 1e-9
# One-step dynamics residual, relative to the current state norm.
DYNAMICS_RTOL = 1e-8
# Slack allowed below a recorded constraint lower bound.
IQC_SLACK = 1e-6
# Allowed drift of the orbit coefficient norm ||F^k v||.
NORM_DRIFT_TOL = 1e-9
# Relative residual allowed in the feedback relation u_k = K x_k.
GAIN_RTOL = 1e-6
# Half-versus-half norm ratio above which a trajectory counts as
# growing on the tested horizon.
GROWTH_RATIO_TOL = 1e-6


@dataclass(frozen=True)
class LyapunovTrace:
    """Lyapunov values along a trajectory and the difference identity.

    ``differences`` is exactly ``values[1:] - values[:-1]``;
    ``quadratic`` is the per-step direct evaluation of the same
    difference through the rate-one inequality matrix.
    """

    values: np.ndarray        # (N+1,)
    differences: np.ndarray   # (N,)
    quadratic: np.ndarray     # (N,)
    identity_error: float
    identity_ok: bool


@dataclass(frozen=True)
class TrajectoryDiagnostics:
    """Horizon-bounded facts about one trajectory.

    ``growth_ratio`` compares the largest state norm over the second
    half of the horizon with the first half; ``growth_rate`` is the
    fitted per-step geometric rate of the norms.  ``growing`` is the
    ratio test, which also catches sub-geometric growth.
    """

    steps: int
    dynamics_residual: float
    dynamics_ok: bool
    iqc_minima: np.ndarray    # min_N S_i(N), one per constraint
    max_norm: float
    growth_ratio: float
    growth_rate: float
    growing: bool


@dataclass(frozen=True)
class WitnessCheck:
    """Re-verification of a witness report over a fresh, longer orbit."""

    ok: bool
    steps: int
    dynamics_residual: float
    dynamics_ok: bool
    iqc_margins: np.ndarray   # min_N S_i(N) - beta_i, one per constraint
    iqc_ok: bool
    norm_drift: float         # max_k | ||F^k v|| - ||v|| |
    norm_ok: bool
    direction_norm: float     # ||X v||
    direction_ok: bool
    gain_residual: float      # nan when the report carries no gain
    gain_ok: bool
    max_norm: float
    growth_ratio: float
    growing: bool
    notes: tuple[str, ...]


def _as_lambdas(cert: RadiusCertificate, count: int) -> np.ndarray:
    lambdas = cert.lambdas
    if lambdas is None:
        lambdas = np.zeros(count)
    lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
    if lambdas.size != count:
        raise DimensionMismatchError(
            f"certificate carries {lambdas.size} multipliers but the "
            f"constraint set has {count}")
    return lambdas


def lyapunov_trace(sys: SystemData, traj: Trajectory,
                   cert: RadiusCertificate,
                   iqcs: IqcSet | None = None) -> LyapunovTrace:
    """Evaluate V_k along ``traj`` and check the difference identity.

    Both the telescoped differences ``V_{k+1} - V_k`` and the direct
    quadratic form of the rate-one inequality matrix are computed; they
    agree up to rounding for any symmetric ``P`` and multipliers, so a
    larger discrepancy flags corrupted data.
    """
    if iqcs is None:
        iqcs = IqcSet.empty(sys.n + sys.m)
    iqcs.check_matches(sys)
    if cert.P is None:
        raise ValueError("certificate carries no P matrix to evaluate")
    P = np.asarray(cert.P, dtype=float)
    if P.shape != (sys.n, sys.n):
        raise DimensionMismatchError(
            f"certificate P has shape {P.shape}, expected "
            f"({sys.n}, {sys.n})")
    if traj.n != sys.n or traj.m != sys.m:
        raise DimensionMismatchError(
            f"trajectory dimensions (n={traj.n}, m={traj.m}) do not "
            f"match the system (n={sys.n}, m={sys.m})")
    lambdas = _as_lambdas(cert, len(iqcs))

    X = traj.states
    state_part = np.einsum("ki,ij,kj->k", X, P, X)
    values = state_part.copy()
    if len(iqcs):
        for lam, sums in zip(lambdas, iqc_partial_sums(traj, iqcs)):
            values[1:] += lam * sums
    differences = values[1:] - values[:-1]

    W = margin_matrix(sys, iqcs, 1.0, P, lambdas)
    Z = traj.stacked()
    quadratic = np.einsum("ki,ij,kj->k", Z, W, Z) if len(traj) else np.zeros(0)

    if len(traj):
        err = float(np.max(np.abs(differences - quadratic)
                           / (1.0 + np.abs(quadratic))))
    else:
        err = 0.0
    return LyapunovTrace(values=values, differences=differences,
                         quadratic=quadratic, identity_error=err,
                         identity_ok=err <= IDENTITY_RTOL)


def strengthen_certificate(cert: RadiusCertificate) -> RadiusCertificate:
    """Rescale a below-one certificate to a unit-decrement one.

    The feasibility program is homogeneous in ``(P, lambda)``: if the
    pair certifies rate ``r < 1`` with ``P >= I``, then the rate-one
    inequality matrix of ``(P, lambda) / (1 - r^2)`` is at most
    ``-blkdiag(I, 0)``, so the Lyapunov difference along any
    constraint-satisfying trajectory is at most ``-||x_k||^2``.
    """
    rate = cert.rho_cert if cert.rho_cert is not None else cert.rho
    if not np.isfinite(rate) or rate >= 1.0:
        raise ValueError(
            f"strengthening needs a certified rate below one, got {rate}")
    if cert.P is None:
        raise ValueError("certificate carries no P matrix to rescale")
    scale = 1.0 / (1.0 - rate * rate)
    lambdas = cert.lambdas
    return replace(cert, P=scale * np.asarray(cert.P, dtype=float),
                   lambdas=None if lambdas is None
                   else scale * np.asarray(lambdas, dtype=float))


def _growth_facts(norms: np.ndarray) -> tuple[float, float, float, bool]:
    max_norm = float(norms.max()) if norms.size else 0.0
    half = (norms.size + 1) // 2
    first, second = norms[:half], norms[half:]
    peak_first = float(first.max()) if first.size else 0.0
    peak_second = float(second.max()) if second.size else 0.0
    if peak_first > 0.0:
        ratio = peak_second / peak_first if second.size else 1.0
    else:
        ratio = np.inf if peak_second > 0.0 else 1.0
    positive = norms > 0.0
    if int(positive.sum()) >= 2:
        k = np.flatnonzero(positive)
        slope = np.polyfit(k.astype(float), np.log(norms[k]), 1)[0]
        rate = float(np.exp(slope))
    else:
        rate = 1.0
    return max_norm, float(ratio), rate, bool(ratio > 1.0 + GROWTH_RATIO_TOL)


def trajectory_diagnostics(sys: SystemData, traj: Trajectory,
                           iqcs: IqcSet | None = None) -> TrajectoryDiagnostics:
    """Dynamics residual, constraint sums, and growth facts for a trajectory."""
    if traj.n != sys.n or traj.m != sys.m:
        raise DimensionMismatchError(
            f"trajectory dimensions (n={traj.n}, m={traj.m}) do not "
            f"match the system (n={sys.n}, m={sys.m})")
    X, U = traj.states, traj.inputs
    if len(traj):
        pred = X[:-1] @ sys.A.T + U @ sys.B.T
        step_err = np.linalg.norm(X[1:] - pred, axis=1)
        state_norm = np.linalg.norm(X[:-1], axis=1)
        residual = float(np.max(step_err / (1.0 + state_norm)))
    else:
        residual = 0.0
    if iqcs is not None and len(iqcs):
        minima = np.array([float(s.min()) for s in iqc_partial_sums(traj, iqcs)])
    else:
        minima = np.zeros(0)
    norms = np.linalg.norm(X, axis=1)
    max_norm, ratio, rate, growing = _growth_facts(norms)
    return TrajectoryDiagnostics(
        steps=len(traj), dynamics_residual=residual,
        dynamics_ok=residual <= DYNAMICS_RTOL, iqc_minima=minima,
        max_norm=max_norm, growth_ratio=ratio, growth_rate=rate,
        growing=growing)


def _witness_orbit(report: WitnessReport, horizon: int):
    """Regenerate the mode orbit: coefficients z_k and weighted (x_k, u_k)."""
    modes = report.modes
    v = np.asarray(modes.v, dtype=float)
    growth = float(report.growth)
    if growth > 1.0:
        # Keep the weighted states, and their squared norms, inside the
        # floating-point range.
        cap = int(np.floor(300.0 / np.log(growth)))
        horizon = min(horizon, max(cap, 1))
    Z = np.empty((horizon + 1, modes.d))
    z = v.copy()
    for k in range(horizon + 1):
        Z[k] = z
        z = modes.F @ z
    weights = growth ** np.arange(horizon + 1) if growth != 1.0 else None
    states = Z @ modes.X.T
    inputs = Z[:-1] @ modes.U.T
    if weights is not None:
        states = states * weights[:, None]
        inputs = inputs * weights[:-1, None]
    return Z, Trajectory(states=states, inputs=inputs,
                         provenance="regenerated worst-case mode orbit")


def check_witness(sys: SystemData, report: WitnessReport,
                  iqcs: IqcSet | None = None, *,
                  horizon: int = 10_000) -> WitnessCheck:
    """Re-verify a witness report over a freshly generated orbit.

    Checks, each with its margin: the orbit satisfies the dynamics; all
    constraint partial sums stay above their recorded lower bounds for
    every horizon up to ``horizon``; the orbit coefficient norm
    ``||F^k v||`` is constant; the direction is not in the null space
    of ``X``; and, when the report carries a feedback gain, the inputs
    follow it.  Failures are recorded in the result, not raised.
    """
    if iqcs is None:
        iqcs = IqcSet.empty(sys.n + sys.m)
    iqcs.check_matches(sys)
    bounds = np.asarray(report.iqc_lower_bounds, dtype=float).reshape(-1)
    if bounds.size != len(iqcs):
        raise DimensionMismatchError(
            f"report records {bounds.size} constraint bounds but the "
            f"problem supplies {len(iqcs)} constraints")
    notes: list[str] = []
    horizon = int(horizon)
    Z, traj = _witness_orbit(report, horizon)
    if len(traj) < horizon:
        notes.append(
            f"horizon shortened to {len(traj)} steps to keep the "
            f"growth-weighted orbit finite")

    diag = trajectory_diagnostics(sys, traj, iqcs)

    if len(iqcs):
        margins = diag.iqc_minima - bounds
        iqc_ok = bool(np.all(margins >= -IQC_SLACK))
    else:
        margins = np.zeros(0)
        iqc_ok = True

    coeff_norms = np.linalg.norm(Z, axis=1)
    v_norm = float(np.linalg.norm(report.modes.v))
    drift = float(np.max(np.abs(coeff_norms - v_norm)))
    norm_ok = drift <= NORM_DRIFT_TOL * (1.0 + v_norm)

    direction_norm = float(np.linalg.norm(report.modes.X @ report.modes.v))
    direction_ok = direction_norm > 0.0

    if report.gain is not None:
        K = np.asarray(report.gain, dtype=float)
        U, X = traj.inputs, traj.states[:-1]
        if U.shape[1]:
            gain_err = np.linalg.norm(U - X @ K.T, axis=1)
            gain_residual = float(np.max(
                gain_err / (1.0 + np.linalg.norm(U, axis=1))))
        else:
            gain_residual = 0.0
        gain_ok = gain_residual <= GAIN_RTOL
    else:
        gain_residual = float("nan")
        gain_ok = True
        notes.append("report carries no feedback gain; relation not checked")

    ok = bool(diag.dynamics_ok and iqc_ok and norm_ok and direction_ok
              and gain_ok)
    return WitnessCheck(
        ok=ok, steps=diag.steps,
        dynamics_residual=diag.dynamics_residual,
        dynamics_ok=diag.dynamics_ok,
        iqc_margins=margins, iqc_ok=iqc_ok,
        norm_drift=drift, norm_ok=norm_ok,
        direction_norm=direction_norm, direction_ok=direction_ok,
        gain_residual=gain_residual, gain_ok=gain_ok,
        max_norm=diag.max_norm, growth_ratio=diag.growth_ratio,
        growing=diag.growing, notes=tuple(notes))
