"""Worst-case witness construction at the stability boundary.

When the feasibility radius equals one and the margin optimum is
attained, the stationary dual matrix Q (positive semidefinite, trace
one, annihilated by the adjoint Lyapunov map, with nonnegative pairing
against every constraint matrix) factors as Q = [X; U][X; U]' with an
orthogonal transition F satisfying AX + BU = XF.  The orbit
[x_k; u_k] = [X; U] F^k v then solves the dynamics exactly, never
converges to zero, and keeps every constraint partial sum bounded
below, provided the direction v passes a group-wise sign condition.

``build_witness`` runs the pipeline end to end and stops with a reason
at the first stage that cannot be certified: radius precheck, dual
extraction, rank factorization, orthogonal factor, eigen grouping,
technical condition, trajectory assembly.  Every certificate the
pipeline emits is re-verified by direct numerical checks; a failed
check downgrades the outcome rather than weakening the claim.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    IqcSet,
    SystemData,
    Trajectory,
    lyapunov_adjoint,
    symmetrize,
)
from .sdp_engine import SdpProblem, SdpSolution, SolverConfig, solve

__all__ = [
    "DualWitnessResult",
    "EigenGroup",
    "TechnicalConditionResult",
    "WitnessOutcome",
    "WitnessReport",
    "WorstCaseModes",
    "build_trajectory",
    "build_witness",
    "eigen_group",
    "extract_dual_witness",
    "feedback_gain",
    "hard_iqc_shift",
    "iqc_sum_lower_bound",
    "pointwise_check",
    "rank_factor",
    "recover_orthogonal_factor",
    "technical_condition",
    "verify_direction",
]

_TWO_PI = 2.0 * np.pi

# Direct acceptance checks on an extracted stationary dual matrix.
_PSD_TOL = 1e-8
_TRACE_TOL = 1e-8
_ADJOINT_TOL = 1e-6
_PAIRING_TOL = 1e-6


def _extraction_config(config: SolverConfig | None) -> SolverConfig:
    if config is not None:
        return config
    return SolverConfig(feas_tol=1e-10, gap_tol=1e-10, max_iter=300)


# ---------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class EigenGroup:
    """One eigenvalue cluster of the orthogonal factor.

    ``theta`` is the common angle in [0, 2*pi); the columns of ``W``
    form an orthonormal basis (complex) of the clustered eigenspace.
    """

    theta: float
    W: np.ndarray

    @property
    def multiplicity(self) -> int:
        return self.W.shape[1]

    def projector(self) -> np.ndarray:
        """Hermitian projector onto the group eigenspace."""
        return self.W @ self.W.conj().T


@dataclass(frozen=True)
class WorstCaseModes:
    """Factorized dual witness: Q = [X; U][X; U]' with AX + BU = XF."""

    Q: np.ndarray
    d: int
    X: np.ndarray
    U: np.ndarray
    F: np.ndarray
    groups: tuple[EigenGroup, ...]
    H: tuple[np.ndarray, ...]
    v: np.ndarray | None = None

    @property
    def stacked(self) -> np.ndarray:
        """The (n+m) x d factor [X; U]."""
        return np.vstack([self.X, self.U])


@dataclass(frozen=True)
class DualWitnessResult:
    """Stationary dual matrix and the direct checks that accept it."""

    ok: bool
    Q: np.ndarray | None
    t_star: float
    status: str
    reason: str
    solution: SdpSolution | None


@dataclass(frozen=True)
class TechnicalConditionResult:
    """Direction certificate for the group-wise sign condition."""

    v: np.ndarray | None
    method: str
    reason: str


@dataclass(frozen=True)
class WitnessReport:
    """Fully assembled witness: modes, orbit and derived quantities."""

    modes: WorstCaseModes
    trajectory: Trajectory
    gain: np.ndarray | None
    iqc_lower_bounds: np.ndarray
    hard_shift: int | None
    pointwise: bool
    growth: float
    notes: tuple[str, ...]


@dataclass(frozen=True)
class WitnessOutcome:
    """Result of ``build_witness``; ``reason`` names the failing stage."""

    ok: bool
    stage: str
    reason: str
    report: WitnessReport | None = None
    trajectory: Trajectory | None = None
    modes: WorstCaseModes | None = None


# ---------------------------------------------------------------------------
# stage 1: stationary dual matrix


def extract_dual_witness(sys: SystemData, iqcs: IqcSet | None = None,
                         config: SolverConfig | None = None, *,
                         solver=None) -> DualWitnessResult:
    """Most interior trace-one stationary dual matrix at rate one.

    Maximizes min(lambda_min(Q), min_i trace(Q M_i)) subject to the
    stationarity equalities [A B] Q [A B]' = Q_xx and trace(Q) = 1.
    The program is always strictly feasible in (Q, t), so a negative
    optimal value certifies that no witness matrix exists, while the
    returned Q is accepted only after direct eigenvalue and pairing
    checks (callers never need to trust the solver's word alone).
    """
    iqcs = iqcs if iqcs is not None else IqcSet.empty(sys.n + sys.m)
    iqcs.check_matches(sys)
    config = _extraction_config(config)
    run = solver or solve
    n, m = sys.n, sys.m
    dim = n + m

    pb = SdpProblem()
    pb.add_sym_var("Q", dim)
    pb.add_scalar_var("t")
    pb.minimize([("t", lambda v: -v)])
    pb.add_psd(dim, None,
               [("Q", lambda Qm: Qm), ("t", lambda v: -v * np.eye(dim))],
               label="Q_minus_tI")
    for i, M in enumerate(iqcs):
        pb.add_scalar_ineq(
            0.0, [("Q", (lambda Mi: (lambda Qm: float(np.tensordot(Qm, Mi))))(M)),
                  ("t", lambda v: -v)],
            label=f"iqc{i}")
    pb.add_matrix_eq(n, None, [("Q", lambda Qm: lyapunov_adjoint(Qm, sys, 1.0))])
    pb.add_scalar_eq(-1.0, [("Q", lambda Qm: float(np.trace(Qm)))])

    sol = run(pb, config)
    if sol.status == "infeasible" or "Q" not in sol.values:
        return DualWitnessResult(
            ok=False, Q=None, t_star=-np.inf, status=sol.status,
            reason="no trace-one stationary dual matrix exists at rate one "
                   "(the linear stationarity system is inconsistent)",
            solution=sol)

    Q = symmetrize(np.asarray(sol.values["Q"]), name="Q")
    t_star = float(sol.values.get("t", np.nan))
    if not np.all(np.isfinite(Q)):
        return DualWitnessResult(ok=False, Q=None, t_star=t_star,
                                 status=sol.status,
                                 reason="solver returned non-finite values",
                                 solution=sol)

    checks = []
    lam_min = float(np.linalg.eigvalsh(Q)[0])
    if lam_min < -_PSD_TOL:
        checks.append(f"lambda_min(Q) = {lam_min:.3e}")
    tr_err = abs(float(np.trace(Q)) - 1.0)
    if tr_err > _TRACE_TOL:
        checks.append(f"|trace(Q) - 1| = {tr_err:.3e}")
    adj = float(np.linalg.norm(lyapunov_adjoint(Q, sys, 1.0), 2))
    if adj > _ADJOINT_TOL:
        checks.append(f"stationarity residual {adj:.3e}")
    for i, M in enumerate(iqcs):
        pair = float(np.tensordot(Q, M))
        if pair < -_PAIRING_TOL:
            checks.append(f"trace(Q M_{i}) = {pair:.3e}")

    if checks:
        return DualWitnessResult(
            ok=False, Q=Q, t_star=t_star, status=sol.status,
            reason="no constraint-compatible stationary dual matrix: "
                   + "; ".join(checks),
            solution=sol)
    return DualWitnessResult(ok=True, Q=Q, t_star=t_star, status=sol.status,
                             reason="", solution=sol)


# ---------------------------------------------------------------------------
# stage 2: rank factorization


def rank_factor(Q: np.ndarray, n: int, rank_tol: float = 1e-7):
    """Factor Q = [X; U][X; U]' by thresholded eigendecomposition.

    Returns (X, U, d) with d the number of eigenvalues above
    ``rank_tol`` times the largest one; ``n`` splits the stacked factor
    into state rows X and input rows U.  Raises ``ValueError`` when Q
    is numerically zero or indefinite beyond the tolerance.
    """
    Q = symmetrize(np.asarray(Q, dtype=float), name="Q")
    if n < 0 or n > Q.shape[0]:
        raise ValueError(f"state dimension {n} does not fit a "
                         f"{Q.shape[0]}x{Q.shape[0]} matrix")
    w, V = np.linalg.eigh(Q)
    lam_max = float(w[-1]) if w.size else 0.0
    if lam_max <= rank_tol:
        raise ValueError("dual witness matrix is numerically zero")
    if float(w[0]) < -rank_tol * max(1.0, lam_max):
        raise ValueError(
            f"matrix is not positive semidefinite within the rank "
            f"tolerance (lambda_min = {float(w[0]):.3e})")
    keep = np.flatnonzero(w > rank_tol * lam_max)[::-1]  # descending
    Z = V[:, keep] * np.sqrt(w[keep])
    # Deterministic column signs: largest-magnitude entry positive.
    for k in range(Z.shape[1]):
        j = int(np.argmax(np.abs(Z[:, k])))
        if Z[j, k] < 0:
            Z[:, k] = -Z[:, k]
    return Z[:n], Z[n:], int(keep.size)


# ---------------------------------------------------------------------------
# stage 3: orthogonal factor


def recover_orthogonal_factor(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Orthogonal F minimizing ||XF - G|| in the Frobenius norm.

    Computed from the singular value decomposition of X'G; on the
    subspace where X'G vanishes (the null space of X) the remaining
    rotational freedom is spent making F as close to the identity as
    orthogonality allows, which keeps the factor deterministic.
    """
    X = np.asarray(X, dtype=float)
    G = np.asarray(G, dtype=float)
    if X.shape != G.shape:
        raise ValueError(f"shape mismatch: X is {X.shape}, G is {G.shape}")
    d = X.shape[1]
    if d == 0:
        return np.zeros((0, 0))
    Us, s, Vt = np.linalg.svd(X.T @ G)
    smax = float(s[0]) if s.size else 0.0
    r = int(np.count_nonzero(s > 1e-12 * max(smax, 1e-300)))
    F = Us[:, :r] @ Vt[:r]
    if r < d:
        # Free block: maximize trace(U2 C V2') over orthogonal C.
        N = Vt[r:] @ Us[:, r:]
        Un, _, Vnt = np.linalg.svd(N)
        F = F + Us[:, r:] @ (Vnt.T @ Un.T) @ Vt[r:]
    return F


def _repair_factor(sys: SystemData, X: np.ndarray, U: np.ndarray,
                   F: np.ndarray):
    """Least-norm correction of (X, U) so AX + BU = XF holds exactly.

    The linear system may be singular (A and F share the boundary
    eigenvalues), so the least-squares correction removes only the
    reachable part of the residual; the original pair is kept whenever
    the correction does not actually improve it.
    """
    n, d = X.shape
    m = U.shape[0]
    resid = sys.A @ X + sys.B @ U - X @ F
    before = float(np.linalg.norm(resid))
    if before == 0.0:
        return X, U
    L = np.kron(sys.A, np.eye(d)) - np.kron(np.eye(n), F.T)
    blocks = [L] + ([np.kron(sys.B, np.eye(d))] if m else [])
    coef = np.hstack(blocks)
    delta, *_ = np.linalg.lstsq(coef, -resid.reshape(-1), rcond=None)
    Xn = X + delta[:n * d].reshape(n, d)
    Un = U + delta[n * d:].reshape(m, d) if m else U
    after = float(np.linalg.norm(sys.A @ Xn + sys.B @ Un - Xn @ F))
    if after < before:
        return Xn, Un
    return X, U


# ---------------------------------------------------------------------------
# stage 4: eigen grouping


def _orthonormal_basis(cols: np.ndarray, real: bool) -> np.ndarray:
    """Orthonormal basis of span(cols); real basis for real eigenspaces."""
    mult = cols.shape[1]
    if real:
        stacked = np.hstack([cols.real, cols.imag])
        u, s, _ = np.linalg.svd(stacked, full_matrices=False)
        return u[:, :mult].astype(complex)
    u, _, _ = np.linalg.svd(cols, full_matrices=False)
    return u[:, :mult]


def _normalize_phase(W: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    W = W.copy()
    for k in range(W.shape[1]):
        j = int(np.argmax(np.abs(W[:, k])))
        pivot = W[j, k]
        if abs(pivot) > 0:
            W[:, k] = W[:, k] * (pivot.conjugate() / abs(pivot))
    return W


def eigen_group(F: np.ndarray, angle_tol: float = 1e-6) -> list[EigenGroup]:
    """Cluster the unitary eigendecomposition of an orthogonal F by angle.

    Groups are ordered by increasing angle in [0, 2*pi); angles within
    ``angle_tol`` of each other are merged (including across the wrap
    at 2*pi).  Conjugate groups share exactly conjugated bases, and
    eigenspaces at angles 0 and pi get real bases.  A between-group gap
    within ten times the tolerance triggers a warning but keeps the
    finer grouping.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[0]
    if d == 0:
        return []
    if float(np.linalg.norm(F.T @ F - np.eye(d), 2)) > 1e-6:
        raise ValueError("transition factor is not orthogonal")
    w, V = np.linalg.eig(F)
    V = V.astype(complex)
    ang = np.mod(np.angle(w), _TWO_PI)
    order = np.argsort(ang, kind="stable")
    ang = ang[order]
    V = V[:, order]

    clusters: list[list[int]] = [[0]]
    for k in range(1, d):
        if ang[k] - ang[clusters[-1][-1]] <= angle_tol:
            clusters[-1].append(k)
        else:
            clusters.append([k])
    shift = np.zeros(d)
    if len(clusters) > 1 and (_TWO_PI - ang[clusters[-1][0]]) + ang[0] <= angle_tol:
        tail = clusters.pop()
        shift[tail] = -_TWO_PI
        clusters[0] = tail + clusters[0]

    if len(clusters) > 1:
        centers = sorted(float(np.mean(ang[c] + shift[c])) % _TWO_PI
                         for c in clusters)
        gaps = [b - a for a, b in zip(centers, centers[1:])]
        gaps.append(_TWO_PI - centers[-1] + centers[0])
        tight = [g for g in gaps if angle_tol < g <= 10 * angle_tol]
        if tight:
            warnings.warn(
                "eigenvalue clustering gap "
                f"{min(tight):.2e} is close to the tolerance "
                f"{angle_tol:.2e}; keeping the finer grouping",
                RuntimeWarning, stacklevel=2)

    raw: list[tuple[float, np.ndarray]] = []
    for c in clusters:
        theta = float(np.mean(ang[c] + shift[c])) % _TWO_PI
        self_conj = min(theta, _TWO_PI - theta) <= angle_tol or \
            abs(theta - np.pi) <= angle_tol
        if self_conj:
            theta = 0.0 if min(theta, _TWO_PI - theta) <= angle_tol else float(np.pi)
        W = _normalize_phase(_orthonormal_basis(V[:, c], real=self_conj))
        raw.append((theta, W))
    raw.sort(key=lambda item: item[0])

    # Enforce exact conjugate pairing: bases above pi mirror their partner.
    groups: list[EigenGroup] = []
    for theta, W in raw:
        if theta > np.pi + angle_tol:
            partner = _TWO_PI - theta
            near = [g for g in groups
                    if abs(g.theta - partner) <= 10 * angle_tol]
            if near:
                best = min(near, key=lambda g: abs(g.theta - partner))
                W = best.W.conj()
                theta = _TWO_PI - best.theta
        groups.append(EigenGroup(theta=theta, W=W))

    basis = np.hstack([g.W for g in groups])
    if float(np.linalg.norm(basis.conj().T @ basis - np.eye(d), 2)) > 1e-6:
        raise ValueError("eigenvector groups failed to form a unitary basis")
    groups.sort(key=lambda g: g.theta)
    return groups


# ---------------------------------------------------------------------------
# stage 5: technical condition


def _group_sum_matrices(modes: WorstCaseModes) -> list[np.ndarray]:
    """Hermitian matrices sum_j P_j H_i P_j, one per constraint."""
    projectors = [g.projector() for g in modes.groups]
    out = []
    for Hi in modes.H:
        S = np.zeros_like(projectors[0]) if projectors else np.zeros((modes.d, modes.d))
        S = S.astype(complex)
        for P in projectors:
            S = S + P @ Hi @ P
        out.append(S)
    return out


def _condition_slacks(modes: WorstCaseModes, v: np.ndarray) -> np.ndarray:
    """Group-projected quadratic forms v' (sum_j P_j H_i P_j) v."""
    return np.array([float((v @ S @ v).real) for S in _group_sum_matrices(modes)])


def _verify_direction(modes: WorstCaseModes, v: np.ndarray) -> str:
    """Empty string when v certifies the sign condition, else the defect."""
    if v is None or not np.all(np.isfinite(v)):
        return "direction is not finite"
    xnorm = float(np.linalg.norm(modes.X @ v))
    if xnorm < 1e-8:
        return f"direction lies in the null space of X (|Xv| = {xnorm:.1e})"
    slacks = _condition_slacks(modes, v)
    if slacks.size and float(slacks.min()) < -1e-8:
        return f"projected constraint form is negative ({float(slacks.min()):.3e})"
    return ""


def verify_direction(modes: WorstCaseModes, v: np.ndarray) -> str:
    """Re-check a direction against the group-wise sign condition.

    Returns an empty string when ``v`` is finite, has ``Xv`` outside the
    null space of ``X``, and every group-projected constraint form is
    nonnegative within tolerance; otherwise a description of the defect.
    Used to re-verify recorded witnesses without re-solving anything.
    """
    return _verify_direction(modes, v)


def technical_condition(modes: WorstCaseModes, iqcs: IqcSet | None = None,
                        config: SolverConfig | None = None, *,
                        solver=None) -> TechnicalConditionResult:
    """Find a real direction v with Xv != 0 passing the sign condition.

    Tried in order: the rank-one case (v = 1); all transition
    eigenvalues distinct (v = sum of the group basis columns, made real
    by conjugate pairing); no constraints at all (any direction outside
    the null space of X works, the leading right singular vector is
    used); and finally a trace-minimization relaxation over PSD V with
    trace(V X'X) = 1, accepted only when its optimum is rank one.
    Every candidate is re-verified directly before being returned.
    """
    n_iqc = len(modes.H)
    failures: list[str] = []

    def accept(v, method):
        defect = _verify_direction(modes, v)
        if not defect:
            return TechnicalConditionResult(v=v, method=method, reason="")
        failures.append(f"{method}: {defect}")
        return None

    if modes.d == 1:
        got = accept(np.ones(1), "rank-one")
        if got:
            return got

    if all(g.multiplicity == 1 for g in modes.groups) and \
            len(modes.groups) == modes.d and modes.d >= 1:
        v = np.zeros(modes.d, dtype=complex)
        for g in modes.groups:
            v = v + g.W[:, 0]
        if float(np.linalg.norm(v.imag)) <= 1e-10 * max(1.0, float(np.linalg.norm(v.real))):
            got = accept(v.real.copy(), "distinct-eigenvalues")
            if got:
                return got
        else:
            failures.append("distinct-eigenvalues: basis sum is not real")

    if n_iqc == 0 and modes.d >= 1:
        # The sign condition is vacuous; only Xv != 0 is needed.
        _, _, vt = np.linalg.svd(modes.X, full_matrices=False)
        if vt.shape[0]:
            got = accept(vt[0], "unconstrained")
            if got:
                return got

    relax = _relaxed_direction(modes, config, solver)
    if relax.v is not None:
        got = accept(relax.v, "relaxation")
        if got:
            return got
    elif relax.reason:
        failures.append(f"relaxation: {relax.reason}")

    detail = "; ".join(failures) if failures else "no candidate available"
    return TechnicalConditionResult(v=None, method="", reason=detail)


def _relaxed_direction(modes: WorstCaseModes, config: SolverConfig | None,
                       solver) -> TechnicalConditionResult:
    """Trace-minimizing PSD relaxation of the sign condition.

    Minimizes trace(V) over V >= 0 with trace(V X'X) = 1 and
    trace(V K_i) >= 0, where K_i is the real symmetric part of the
    group-projected constraint matrix (exact for quadratic forms in a
    real direction).  Only a rank-one optimum is converted back into a
    direction; anything else is reported absent.
    """
    d = modes.d
    XtX = modes.X.T @ modes.X
    mats = [0.5 * (S.real + S.real.T) for S in _group_sum_matrices(modes)]
    run = solver or solve
    pb = SdpProblem()
    pb.add_sym_var("V", d)
    pb.minimize([("V", lambda Vm: float(np.trace(Vm)))])
    pb.add_psd(d, None, [("V", lambda Vm: Vm)], label="V_psd")
    for i, K in enumerate(mats):
        pb.add_scalar_ineq(
            0.0, [("V", (lambda Ki: (lambda Vm: float(np.tensordot(Vm, Ki))))(K))],
            label=f"group{i}")
    pb.add_scalar_eq(-1.0, [("V", lambda Vm: float(np.tensordot(Vm, XtX)))])
    sol = run(pb, _extraction_config(config))
    if sol.status == "infeasible" or "V" not in sol.values:
        return TechnicalConditionResult(
            v=None, method="relaxation",
            reason="the relaxed sign-condition program is infeasible")
    V = symmetrize(np.asarray(sol.values["V"]), name="V")
    if not np.all(np.isfinite(V)):
        return TechnicalConditionResult(v=None, method="relaxation",
                                        reason="solver returned non-finite values")
    w, vecs = np.linalg.eigh(V)
    top = float(w[-1])
    total = float(np.trace(V))
    if total <= 0 or top < (1.0 - 1e-6) * total:
        return TechnicalConditionResult(
            v=None, method="relaxation",
            reason=f"relaxation optimum is not rank one "
                   f"(top eigenvalue carries {top / max(total, 1e-300):.6f} of the trace)")
    v = vecs[:, -1] * np.sqrt(max(top, 0.0))
    xnorm = float(np.linalg.norm(modes.X @ v))
    if xnorm > 0:
        v = v / xnorm
    return TechnicalConditionResult(v=v, method="relaxation", reason="")


# ---------------------------------------------------------------------------
# stage 6: trajectory and derived quantities


def _orbit(modes: WorstCaseModes, count: int) -> np.ndarray:
    """Rows z_k = F^k v for k = 0..count-1."""
    if modes.v is None:
        raise ValueError("modes carry no direction v")
    Z = np.empty((count, modes.d))
    z = np.asarray(modes.v, dtype=float).copy()
    for k in range(count):
        Z[k] = z
        z = modes.F @ z
    return Z


def build_trajectory(modes: WorstCaseModes, horizon: int) -> Trajectory:
    """The mode orbit [x_k; u_k] = [X; U] F^k v over ``horizon`` steps."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    Z = _orbit(modes, horizon + 1)
    states = Z @ modes.X.T
    inputs = Z[:horizon] @ modes.U.T
    return Trajectory(states=states, inputs=inputs,
                      provenance="worst-case mode orbit")


def iqc_sum_lower_bound(modes: WorstCaseModes, iqcs: IqcSet | None = None) -> np.ndarray:
    """Uniform lower bound on every constraint partial sum of the orbit.

    Cross-frequency terms are geometric sums, bounded by
    2 / |1 - e^{i(theta_l - theta_j)}| each; the same-frequency part is
    nonnegative by the sign condition, so the bound holds for every
    horizon.  A single eigen-group has no cross terms and the bound
    degenerates to zero.
    """
    if modes.v is None:
        raise ValueError("modes carry no direction v")
    n_iqc = len(modes.H)
    if n_iqc == 0:
        return np.zeros(0)
    v = np.asarray(modes.v, dtype=float)
    projectors = [g.projector() for g in modes.groups]
    right = [P @ v for P in projectors]        # P_l v
    left = [v @ P for P in projectors]         # v' P_j, plain transpose
    thetas = [g.theta for g in modes.groups]
    out = np.zeros(n_iqc)
    for i, Hi in enumerate(modes.H):
        bound = 0.0
        for j in range(len(modes.groups)):
            for l in range(len(modes.groups)):
                if j == l:
                    continue
                term = complex(left[j] @ (Hi @ right[l]))
                denom = abs(1.0 - np.exp(1j * (thetas[l] - thetas[j])))
                if denom > 0:
                    bound -= abs(term) * 2.0 / denom
        out[i] = bound
    return out


def feedback_gain(modes: WorstCaseModes) -> np.ndarray | None:
    """Static gain K with u_k = K x_k along the orbit, when X allows it.

    Present when X has full column rank (then K = U X^+ reproduces U
    exactly); absent otherwise.  With no inputs the gain is the empty
    0 x n matrix, which is trivially consistent.
    """
    n = modes.X.shape[0]
    m = modes.U.shape[0]
    if m == 0:
        return np.zeros((0, n))
    sv = np.linalg.svd(modes.X, compute_uv=False)
    if sv.size == 0 or sv[0] <= 0 or sv[-1] <= 1e-8 * sv[0]:
        return None
    K = modes.U @ np.linalg.pinv(modes.X)
    if float(np.linalg.norm(modes.U - K @ modes.X)) > 1e-6 * (1.0 + float(np.linalg.norm(modes.U))):
        return None
    return K


def hard_iqc_shift(modes: WorstCaseModes, iqcs: IqcSet | None = None,
                   n_max: int = 10000) -> int | None:
    """Start offset making the single constraint's partial sums nonnegative.

    Scans the partial sums over horizons 1..n_max and returns the first
    argmin, provided it lies outside the trailing tenth of the window
    (a minimum at the edge cannot be certified: the sums may keep
    decreasing).  Requires exactly one constraint matrix.
    """
    if len(modes.H) != 1:
        raise ValueError("the shift argument applies to exactly one constraint")
    if modes.v is None:
        raise ValueError("modes carry no direction v")
    Z = _orbit(modes, n_max)
    per_step = np.einsum("ki,ij,kj->k", Z, modes.H[0], Z)
    sums = np.cumsum(per_step)
    n_star = int(np.argmin(sums)) + 1
    tail = max(1, n_max // 10)
    if n_star > n_max - tail:
        return None
    return n_star


def pointwise_check(modes: WorstCaseModes, iqcs: IqcSet | None = None,
                    horizon: int = 1000) -> bool:
    """Whether every constraint holds at each step, not just in sums.

    True exactly for rank-one witnesses (the factor columns are vectors,
    so the trace inequality is already the pointwise one); re-verified
    numerically along the orbit.
    """
    if modes.d != 1:
        return False
    if modes.v is None or not modes.H:
        return modes.v is not None
    Z = _orbit(modes, horizon)
    for Hi in modes.H:
        per_step = np.einsum("ki,ij,kj->k", Z, Hi, Z)
        tol = 1e-8 * (1.0 + float(np.max(np.abs(per_step), initial=0.0)))
        if float(per_step.min(initial=0.0)) < -tol:
            return False
    return True


# ---------------------------------------------------------------------------
# the full pipeline


def build_witness(sys: SystemData, iqcs: IqcSet | None = None, *,
                  rho: float = 1.0, horizon: int = 300,
                  bisect_tol: float = 1e-6, strict_eps: float = 1e-8,
                  config: SolverConfig | None = None, solver=None,
                  radius_cert=None, rank_tol: float = 1e-7,
                  angle_tol: float = 1e-6,
                  shift_window: int = 10000) -> WitnessOutcome:
    """Run the witness pipeline and return the orbit or the failing stage.

    ``rho`` is the radius the caller established (1 for the stability
    boundary).  Above one the system is rescaled by 1/rho and the orbit
    re-inflated geometrically, which preserves the dynamics exactly but
    is only offered without constraint matrices (their partial sums do
    not survive the growth weighting).  ``radius_cert`` skips the
    radius precheck when the caller already bisected; otherwise the
    radius is recomputed and must match ``rho`` with attainment.
    """
    iqcs = iqcs if iqcs is not None else IqcSet.empty(sys.n + sys.m)
    iqcs.check_matches(sys)

    def fail(stage, reason, modes=None):
        return WitnessOutcome(ok=False, stage=stage, reason=reason, modes=modes)

    if not np.isfinite(rho) or rho <= 0:
        return fail("radius-precheck", f"radius {rho} is not a positive number")

    if sys.m > 0:
        sv = np.linalg.svd(sys.B, compute_uv=False)
        if sv[0] <= 0 or sv[-1] <= 1e-10 * sv[0]:
            return fail("radius-precheck",
                        "input matrix is not full column rank, which the "
                        "factorization argument requires")

    at_boundary = abs(rho - 1.0) <= max(100.0 * bisect_tol, 1e-9)
    if not at_boundary and rho < 1.0:
        return fail("radius-precheck",
                    f"radius {rho:.6g} is below one; no non-vanishing witness exists")
    if not at_boundary and len(iqcs) > 0:
        return fail("radius-precheck",
                    "witness construction needs radius one: constraint "
                    "partial sums do not transfer across the geometric "
                    "growth weighting")

    if radius_cert is not None:
        if not np.isfinite(radius_cert.rho) or \
                abs(radius_cert.rho - rho) > max(10.0 * bisect_tol * max(1.0, rho), 1e-9):
            return fail("radius-precheck",
                        f"certificate radius {radius_cert.rho:.6g} does not "
                        f"match the requested {rho:.6g}")
        if not radius_cert.attained:
            return fail("radius-precheck",
                        "margin optimum is not attained at the radius; the "
                        "factorization argument needs attainment")
    else:
        from .radius import spectral_radius
        cert = spectral_radius(sys, iqcs, bisect_tol=bisect_tol,
                               rho_max=max(1e3, 2.0 * rho),
                               strict_eps=strict_eps, config=config,
                               solver=solver)
        if not np.isfinite(cert.rho) or \
                abs(cert.rho - rho) > max(10.0 * bisect_tol * max(1.0, rho), 1e-9):
            got = f"{cert.rho:.6g}" if np.isfinite(cert.rho) else "no certificate"
            return fail("radius-precheck",
                        f"computed radius ({got}) does not match the "
                        f"requested {rho:.6g}")
        if not cert.attained:
            return fail("radius-precheck",
                        "margin optimum is not attained at the radius; the "
                        "factorization argument needs attainment")

    growth = 1.0 if at_boundary else float(rho)
    wsys = sys if at_boundary else SystemData(A=sys.A / growth, B=sys.B / growth)

    dual = extract_dual_witness(wsys, iqcs, config, solver=solver)
    if not dual.ok:
        return fail("dual-extraction", dual.reason)

    try:
        X, U, d = rank_factor(dual.Q, sys.n, rank_tol)
    except ValueError as err:
        return fail("rank-factorization", str(err))

    G = wsys.A @ X + wsys.B @ U
    F = recover_orthogonal_factor(X, G)
    residual = float(np.linalg.norm(X @ F - G))
    if residual > 1e-4 * (1.0 + float(np.linalg.norm(G))):
        return fail("orthogonal-factor",
                    f"dual witness inconsistent: the stationary factor "
                    f"misses an orthogonal transition by {residual:.3e}")
    X, U = _repair_factor(wsys, X, U, F)

    Z = np.vstack([X, U])
    H = tuple(symmetrize(Z.T @ M @ Z, name="H") for M in iqcs)

    try:
        groups = tuple(eigen_group(F, angle_tol))
    except ValueError as err:
        return fail("eigen-grouping", str(err))

    modes = WorstCaseModes(Q=dual.Q, d=d, X=X, U=U, F=F, groups=groups, H=H)

    cond = technical_condition(modes, iqcs, config, solver=solver)
    if cond.v is None:
        return fail("technical-condition",
                    f"sign condition not certified ({cond.reason})", modes)
    modes = replace(modes, v=cond.v)

    base = build_trajectory(modes, horizon)
    if growth != 1.0:
        weights = growth ** np.arange(horizon + 1)
        traj = Trajectory(states=base.states * weights[:, None],
                          inputs=base.inputs * weights[:horizon, None],
                          provenance=f"worst-case mode orbit, geometric growth {growth:.6g}")
    else:
        traj = base

    step_err = traj.states[1:] - traj.states[:-1] @ sys.A.T
    if sys.m:
        step_err = step_err - traj.inputs @ sys.B.T
    norms = np.linalg.norm(traj.states[:-1], axis=1)
    worst = float(np.max(np.linalg.norm(step_err, axis=1) / (1.0 + norms)))
    if worst > 1e-8:
        return fail("trajectory-assembly",
                    f"dynamics residual {worst:.3e} exceeds tolerance", modes)

    notes: list[str] = []
    gain = feedback_gain(modes)
    if gain is None:
        notes.append("no static gain: the state factor is column rank deficient")
    bounds = iqc_sum_lower_bound(modes, iqcs)
    shift = None
    if len(iqcs) == 1:
        shift = hard_iqc_shift(modes, iqcs, n_max=shift_window)
        if shift is None:
            notes.append("no certified shift: the constraint partial sums "
                         "keep decreasing through the scan window")
    pointwise = pointwise_check(modes, iqcs)

    report = WitnessReport(modes=modes, trajectory=traj, gain=gain,
                           iqc_lower_bounds=bounds, hard_shift=shift,
                           pointwise=pointwise, growth=growth,
                           notes=tuple(notes))
    return WitnessOutcome(ok=True, stage="complete", reason="",
                          report=report, trajectory=traj, modes=modes)
