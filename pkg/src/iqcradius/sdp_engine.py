"""Small dense semidefinite-program engine and the margin programs.

The analysis needs a handful of small dense SDPs: the feasibility-margin
program over (s, P, lambda), its trace-normalized dual over Q, a
feasibility probe used by the bisection, and later a nuclear-norm
relaxation.  All of them are affine in their matrix variables, so this
module provides

  * :class:`SdpProblem` -- a tiny builder for block-structured affine
    SDPs (symmetric matrix and scalar variables, PSD constraints, scalar
    inequalities, equality constraints),
  * :func:`solve` -- a dense primal-dual interior-point method
    (Mehrotra predictor-corrector with the classic HKM direction) for
    the compiled standard form  min c'y  s.t.  F0 + sum_i y_i F_i >= 0,
  * the domain-level wrappers ``solve_margin_primal``,
    ``solve_margin_dual`` and ``dual_feasibility_margin``.

The engine is deliberately self-contained (dense numpy only) and is
meant for desk-scale problems, at most a few thousand scalar unknowns.
An external solver can be substituted anywhere a ``solver=`` callable is
accepted; it must map ``(SdpProblem, SolverConfig) -> SdpSolution``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import IqcSet, SystemData, lyapunov_adjoint, lyapunov_operator

__all__ = [
    "SolverConfig",
    "SdpProblem",
    "SdpSolution",
    "solve",
    "MarginPrimalResult",
    "MarginDualResult",
    "DualFeasibilityResult",
    "solve_margin_primal",
    "solve_margin_dual",
    "dual_feasibility_margin",
    "MARGIN_FLOOR",
    "TRACE_CAP",
]

# Lower bound on the margin objective and cap on trace(P) + sum(lambda).
# The margin program of the certificate search is homogeneous in (P,
# lambda): once it is strictly feasible its value runs to -infinity, and
# near non-attained optima the minimizing P runs off to infinity.  The
# floor and cap keep every solve bounded with a compact optimal face;
# both are reported back when active so callers can tell.
MARGIN_FLOOR = -1.0
TRACE_CAP = 1e6


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances for the interior-point engine."""

    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98
    verbose: bool = False

    def __post_init__(self):
        if self.feas_tol <= 0 or self.gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (0 < self.step_fraction < 1):
            raise ValueError("step_fraction must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def _sym_coords(d: int):
    for i in range(d):
        for j in range(i, d):
            yield i, j


def _sym_basis(d: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((d, d))
    E[i, j] = 1.0
    E[j, i] = 1.0
    return E


class SdpProblem:
    """Builder for a block-structured affine SDP.

    Variables are symmetric matrix blocks or scalars.  Constraints are
    affine:  ``constant + sum_v op_v(value_v)``  must be PSD, zero, or a
    nonnegative scalar.  Each ``op_v`` must be a *linear* map of its
    variable (any constant part belongs in ``constant``); it is sampled
    on basis elements during compilation.
    """

    def __init__(self):
        self._vars: dict[str, tuple] = {}
        self._order: list[str] = []
        self._obj_terms: list[tuple[str, Callable]] = []
        self._obj_const: float = 0.0
        self._psd: list[tuple[int, np.ndarray, list, str]] = []
        self._ineq: list[tuple[float, list, str]] = []
        self._eq_rows: list[tuple[float, list]] = []

    # -- variables ---------------------------------------------------
    def add_sym_var(self, name: str, dim: int) -> str:
        if name in self._vars:
            raise ValueError(f"variable {name!r} already declared")
        if dim < 0:
            raise ValueError("dimension must be nonnegative")
        self._vars[name] = ("sym", int(dim))
        self._order.append(name)
        return name

    def add_scalar_var(self, name: str) -> str:
        if name in self._vars:
            raise ValueError(f"variable {name!r} already declared")
        self._vars[name] = ("scalar",)
        self._order.append(name)
        return name

    # -- objective and constraints ------------------------------------
    def minimize(self, terms: Sequence[tuple[str, Callable]], constant: float = 0.0):
        self._check_terms(terms)
        self._obj_terms = list(terms)
        self._obj_const = float(constant)

    def add_psd(self, dim: int, constant, terms: Sequence[tuple[str, Callable]],
                label: str = ""):
        self._check_terms(terms)
        C = np.zeros((dim, dim)) if constant is None else np.asarray(constant, dtype=float)
        if C.shape != (dim, dim):
            raise ValueError(f"constant block has shape {C.shape}, expected {(dim, dim)}")
        self._psd.append((int(dim), 0.5 * (C + C.T), list(terms), label))

    def add_scalar_ineq(self, constant: float, terms: Sequence[tuple[str, Callable]],
                        label: str = ""):
        self._check_terms(terms)
        self._ineq.append((float(constant), list(terms), label))

    def add_scalar_eq(self, constant: float, terms: Sequence[tuple[str, Callable]]):
        self._check_terms(terms)
        self._eq_rows.append((float(constant), list(terms)))

    def add_matrix_eq(self, dim: int, constant, terms: Sequence[tuple[str, Callable]]):
        """Entrywise equality  constant + sum op_v(value_v) == 0  (symmetric)."""
        self._check_terms(terms)
        C = np.zeros((dim, dim)) if constant is None else np.asarray(constant, dtype=float)
        for i, j in _sym_coords(dim):
            picked = [(name, (lambda fn, a=i, b=j: (lambda v: float(np.asarray(fn(v))[a, b])))(fn))
                      for name, fn in terms]
            self._eq_rows.append((float(C[i, j]), picked))

    def _check_terms(self, terms):
        for name, fn in terms:
            if name not in self._vars:
                raise ValueError(f"constraint references undeclared variable {name!r}")
            if not callable(fn):
                raise ValueError(f"term for {name!r} must be callable")

    # -- compilation ---------------------------------------------------
    def _var_basis(self, name: str):
        kind = self._vars[name]
        if kind[0] == "scalar":
            yield 1.0
        else:
            d = kind[1]
            for i, j in _sym_coords(d):
                yield _sym_basis(d, i, j)

    def _var_span(self):
        spans = {}
        p = 0
        for name in self._order:
            kind = self._vars[name]
            size = 1 if kind[0] == "scalar" else kind[1] * (kind[1] + 1) // 2
            spans[name] = (p, p + size)
            p += size
        return spans, p

    def compile(self):
        spans, p = self._var_span()
        blocks: list[int] = []
        F0: list[np.ndarray] = []
        cols: list[list[np.ndarray]] = [[] for _ in range(p)]
        labels: list[str] = []

        def add_block(dim, const, terms, label):
            if dim == 0:
                return
            blocks.append(dim)
            labels.append(label)
            F0.append(np.asarray(const, dtype=float).reshape(dim, dim))
            coeff = {k: np.zeros((dim, dim)) for k in range(p)}
            for name, fn in terms:
                lo, _hi = spans[name]
                for off, basis in enumerate(self._var_basis(name)):
                    out = np.asarray(fn(basis), dtype=float).reshape(dim, dim)
                    coeff[lo + off] += 0.5 * (out + out.T)
                    # fmt: keep symmetric exactly
            for k in range(p):
                cols[k].append(coeff[k])

        for dim, C, terms, label in self._psd:
            add_block(dim, C, terms, label)
        for const, terms, label in self._ineq:
            add_block(1, np.array([[const]]), terms, label)

        c = np.zeros(p)
        for name, fn in self._obj_terms:
            lo, _hi = spans[name]
            for off, basis in enumerate(self._var_basis(name)):
                c[lo + off] += float(fn(basis))

        A_eq = np.zeros((len(self._eq_rows), p))
        b_eq = np.zeros(len(self._eq_rows))
        for r, (const, terms) in enumerate(self._eq_rows):
            b_eq[r] = -const
            for name, fn in terms:
                lo, _hi = spans[name]
                for off, basis in enumerate(self._var_basis(name)):
                    A_eq[r, lo + off] += float(fn(basis))

        return _Compiled(self, spans, p, blocks, labels, F0, cols, c,
                         self._obj_const, A_eq, b_eq)

    def extract(self, name: str, y: np.ndarray, spans) -> np.ndarray | float:
        lo, hi = spans[name]
        kind = self._vars[name]
        if kind[0] == "scalar":
            return float(y[lo])
        d = kind[1]
        X = np.zeros((d, d))
        for off, (i, j) in enumerate(_sym_coords(d)):
            X[i, j] = y[lo + off]
            X[j, i] = y[lo + off]
        return X


@dataclass
class _Compiled:
    problem: SdpProblem
    spans: dict
    p: int
    blocks: list
    labels: list
    F0: list
    cols: list
    c: np.ndarray
    obj_const: float
    A_eq: np.ndarray
    b_eq: np.ndarray


@dataclass
class SdpSolution:
    status: str                    # optimal | infeasible | numerical-failure | iteration-limit
    objective: float
    values: dict
    residuals: dict
    iterations: int
    message: str = ""
    cone_duals: dict = field(default_factory=dict)
    y: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _min_eig(M: np.ndarray) -> float:
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(M)[0])


def _step_to_boundary(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX >= 0, for X > 0 (per block)."""
    L = np.linalg.cholesky(X)
    Linv = np.linalg.solve(L, np.eye(X.shape[0]))
    W = Linv @ dX @ Linv.T
    lam = float(np.linalg.eigvalsh(0.5 * (W + W.T))[0])
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def solve(problem: SdpProblem, config: SolverConfig | None = None) -> SdpSolution:
    """Solve an :class:`SdpProblem` with the built-in interior-point method."""
    config = config or SolverConfig()
    comp = problem.compile()

    # Eliminate equality constraints by restricting to their affine set.
    p = comp.p
    if comp.A_eq.shape[0]:
        y0, *_ = np.linalg.lstsq(comp.A_eq, comp.b_eq, rcond=None)
        resid = np.linalg.norm(comp.A_eq @ y0 - comp.b_eq)
        if resid > 1e-9 * (1.0 + np.linalg.norm(comp.b_eq)):
            return SdpSolution(
                status="infeasible", objective=np.nan, values={},
                residuals={"eq_residual": float(resid)}, iterations=0,
                message="equality constraints are inconsistent")
        U, sv, Vt = np.linalg.svd(comp.A_eq)
        tol = max(comp.A_eq.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
        rank = int(np.sum(sv > tol))
        N = Vt[rank:].T    # (p, p - rank)
    else:
        y0 = np.zeros(p)
        N = np.eye(p)

    pz = N.shape[1]
    nblocks = len(comp.blocks)

    # Constant part and reduced coefficient columns.
    G0 = [comp.F0[b].copy() for b in range(nblocks)]
    for k in range(p):
        if y0[k] != 0.0:
            for b in range(nblocks):
                G0[b] += y0[k] * comp.cols[k][b]
    Gcols = []
    for z in range(pz):
        colz = []
        for b in range(nblocks):
            acc = np.zeros_like(comp.F0[b])
            for k in range(p):
                if N[k, z] != 0.0:
                    acc += N[k, z] * comp.cols[k][b]
            colz.append(acc)
        Gcols.append(colz)
    cz = N.T @ comp.c
    const_obj = comp.obj_const + float(comp.c @ y0)

    # Column scaling for a better-conditioned Schur complement.
    scale = np.ones(pz)
    for z in range(pz):
        nrm = max([np.linalg.norm(Gcols[z][b]) for b in range(nblocks)] or [0.0])
        scale[z] = 1.0 / max(1.0, nrm)
        for b in range(nblocks):
            Gcols[z][b] = Gcols[z][b] * scale[z]
    cz = cz * scale

    def full_y(zvec: np.ndarray) -> np.ndarray:
        return y0 + N @ (zvec * scale)

    def violation(zvec: np.ndarray) -> float:
        worst = 0.0
        for b in range(nblocks):
            S = G0[b].copy()
            for z in range(pz):
                S += zvec[z] * Gcols[z][b]
            worst = max(worst, max(0.0, -_min_eig(S)) / (1.0 + np.linalg.norm(G0[b])))
        return worst

    def finish(status, zvec, Zb, iters, message=""):
        yfull = full_y(zvec)
        values = {name: problem.extract(name, yfull, comp.spans)
                  for name in problem._order}
        cone = {}
        for b, label in enumerate(comp.labels):
            if label:
                cone[label] = Zb[b]
        res = {"constraint_violation": violation(zvec)}
        res.update(last_res)
        return SdpSolution(status=status, objective=float(cz @ zvec) + const_obj,
                           values=values, residuals=res, iterations=iters,
                           message=message, cone_duals=cone, y=yfull)

    last_res: dict = {}

    if pz == 0:
        # Fully determined by the equality constraints.
        viol = violation(np.zeros(0))
        status = "optimal" if viol <= 1e3 * config.feas_tol else "infeasible"
        Zb = [np.zeros_like(comp.F0[b]) for b in range(nblocks)]
        return finish(status, np.zeros(0), Zb, 0,
                      "" if status == "optimal" else
                      f"fixed point violates PSD constraints by {viol:.2e}")

    total_dim = sum(comp.blocks)
    f0_norm = max([np.linalg.norm(G0[b]) for b in range(nblocks)] or [1.0])

    z = np.zeros(pz)
    # Per-block initialization: a shared scale would let one block with a
    # large constant (for example a trace cap) wreck the centering of the
    # small well-scaled blocks.
    zscale = 1.0 + float(np.linalg.norm(cz, np.inf)) if pz else 1.0
    S = [np.eye(comp.blocks[b]) * (1.0 + np.linalg.norm(G0[b]))
         for b in range(nblocks)]
    Z = [np.eye(d) * zscale for d in comp.blocks]

    best = None
    status = "iteration-limit"
    message = ""
    it = 0

    for it in range(1, config.max_iter + 1):
        # Residuals.
        Fz = []
        for b in range(nblocks):
            M = G0[b].copy()
            for k in range(pz):
                M += z[k] * Gcols[k][b]
            Fz.append(M)
        Rd = [Fz[b] - S[b] for b in range(nblocks)]
        rp = cz - np.array([sum(float(np.tensordot(Gcols[k][b], Z[b]))
                                for b in range(nblocks)) for k in range(pz)])
        gap = sum(float(np.tensordot(S[b], Z[b])) for b in range(nblocks))
        mu = gap / max(1, total_dim)
        obj_p = float(cz @ z)
        obj_d = -sum(float(np.tensordot(G0[b], Z[b])) for b in range(nblocks))
        pres = max(np.linalg.norm(Rd[b]) for b in range(nblocks)) / (1.0 + f0_norm)
        dres = float(np.linalg.norm(rp, np.inf)) / (1.0 + float(np.linalg.norm(cz, np.inf)))
        gap_rel = abs(obj_p - obj_d) / (1.0 + abs(obj_p) + abs(obj_d))
        mu_rel = mu / (1.0 + abs(obj_p) + abs(obj_d))

        last_res = {"primal_residual": pres, "dual_residual": dres,
                    "gap": gap_rel, "mu": mu}
        merit = max(pres, dres, gap_rel, mu_rel)
        if config.verbose:
            print(f"  it={it:3d} obj={obj_p: .6e} dual={obj_d: .6e} "
                  f"pres={pres:.2e} dres={dres:.2e} mu={mu:.2e} merit={merit:.2e}")
        if best is None or merit < best[0]:
            best = (merit, z.copy(), [zb.copy() for zb in Z])

        if pres <= config.feas_tol and dres <= config.feas_tol and (
                gap_rel <= config.gap_tol or mu_rel <= config.gap_tol):
            status = "optimal"
            break

        try:
            Sinv = [np.linalg.solve(S[b], np.eye(comp.blocks[b])) for b in range(nblocks)]
            for b in range(nblocks):
                Sinv[b] = 0.5 * (Sinv[b] + Sinv[b].T)
            # Schur complement M[i,j] = sum_b tr(F_i Z F_j Sinv); the order
            # Z F_j Sinv matters, Z does not commute with the F's.
            Msc = np.zeros((pz, pz))
            ZFSi = [[Z[b] @ Gcols[k][b] @ Sinv[b] for b in range(nblocks)]
                    for k in range(pz)]
            for i in range(pz):
                for j in range(pz):
                    Msc[i, j] = sum(float(np.tensordot(Gcols[i][b], ZFSi[j][b]))
                                    for b in range(nblocks))
            Msc = 0.5 * (Msc + Msc.T)

            def direction(Rcomp):
                rhs = np.empty(pz)
                T = [(Rcomp[b] - Z[b] @ Rd[b]) @ Sinv[b] for b in range(nblocks)]
                for i in range(pz):
                    rhs[i] = sum(float(np.tensordot(Gcols[i][b], T[b]))
                                 for b in range(nblocks)) - rp[i]
                try:
                    dz = np.linalg.solve(Msc, rhs)
                    dz += np.linalg.solve(Msc, rhs - Msc @ dz)
                except np.linalg.LinAlgError:
                    dz, *_ = np.linalg.lstsq(Msc, rhs, rcond=None)
                dS = [Rd[b] + sum(dz[k] * Gcols[k][b] for k in range(pz))
                      for b in range(nblocks)]
                dZ = []
                for b in range(nblocks):
                    M = (Rcomp[b] - Z[b] @ dS[b]) @ Sinv[b]
                    dZ.append(0.5 * (M + M.T))
                return dz, dS, dZ

            # Predictor.
            Rc_aff = [-(Z[b] @ S[b]) for b in range(nblocks)]
            dz_a, dS_a, dZ_a = direction(Rc_aff)
            a_p = min([_step_to_boundary(S[b], dS_a[b]) for b in range(nblocks)] + [np.inf])
            a_d = min([_step_to_boundary(Z[b], dZ_a[b]) for b in range(nblocks)] + [np.inf])
            a_p = min(1.0, config.step_fraction * a_p)
            a_d = min(1.0, config.step_fraction * a_d)
            gap_aff = sum(float(np.tensordot(S[b] + a_p * dS_a[b], Z[b] + a_d * dZ_a[b]))
                          for b in range(nblocks))
            sigma = min(1.0, max(1e-10, (gap_aff / gap) ** 3)) if gap > 0 else 0.0

            # Corrector.
            Rc = [sigma * mu * np.eye(comp.blocks[b]) - Z[b] @ S[b] - dZ_a[b] @ dS_a[b]
                  for b in range(nblocks)]
            dz, dS, dZ = direction(Rc)
            a_p = min([_step_to_boundary(S[b], dS[b]) for b in range(nblocks)] + [np.inf])
            a_d = min([_step_to_boundary(Z[b], dZ[b]) for b in range(nblocks)] + [np.inf])
        except np.linalg.LinAlgError:
            status = "numerical-failure"
            message = "factorization failed (loss of positive definiteness)"
            break

        a_p = min(1.0, config.step_fraction * a_p)
        a_d = min(1.0, config.step_fraction * a_d)
        if not np.isfinite(a_p) or not np.isfinite(a_d):
            status = "numerical-failure"
            message = "non-finite step length"
            break
        if max(a_p, a_d) < 1e-10:
            status = "numerical-failure"
            message = "step lengths collapsed"
            break

        z = z + a_p * dz
        for b in range(nblocks):
            S[b] = S[b] + a_p * dS[b]
            Z[b] = Z[b] + a_d * dZ[b]

    else:
        it = config.max_iter

    if status != "optimal" and best is not None:
        _, z, Z = best

    return finish(status, z, Z, it, message)


# ---------------------------------------------------------------------------
# Domain-level programs.
# ---------------------------------------------------------------------------

SolverFn = Callable[[SdpProblem, SolverConfig], SdpSolution]


@dataclass
class MarginPrimalResult:
    """Outcome of the margin program  min s : sI >= L_rho(P) + sum l_i M_i."""

    s_star: float
    P: np.ndarray
    lambdas: np.ndarray
    status: str
    floor_active: bool
    cap_active: bool
    margin_check: float          # independent eigenvalue re-check of the margin
    solution: SdpSolution


@dataclass
class MarginDualResult:
    d_star: float
    Q: np.ndarray | None
    status: str                  # optimal | infeasible | ...
    infeasibility_margin: float  # phase-I value t*; negative certifies infeasibility
    solution: SdpSolution | None


@dataclass
class DualFeasibilityResult:
    """Phase-I value of the trace-normalized dual feasibility system.

    t_star >= 0 (up to tolerance) iff there is a unit-trace PSD Q with
    L_rho*(Q) >= 0 and trace(Q M_i) >= 0 for all i; t_star < 0 certifies
    that no such Q exists, i.e. the margin program is unbounded below.
    """

    t_star: float
    Q: np.ndarray | None
    status: str
    solution: SdpSolution


def _margin_problem(sys: SystemData, iqcs: IqcSet, rho: float,
                    margin_floor: float, trace_cap: float) -> SdpProblem:
    n, m = sys.n, sys.m
    d = n + m
    pb = SdpProblem()
    pb.add_scalar_var("s")
    pb.add_sym_var("P", n)
    for i in range(len(iqcs)):
        pb.add_scalar_var(f"lam{i}")
    pb.minimize([("s", lambda v: v)])

    terms = [("s", lambda v: v * np.eye(d)),
             ("P", lambda Pm: -lyapunov_operator(Pm, sys, rho))]
    for i, M in enumerate(iqcs):
        terms.append((f"lam{i}", (lambda Mi: (lambda v: -v * Mi))(M)))
    pb.add_psd(d, None, terms, label="margin")
    pb.add_psd(n, -np.eye(n), [("P", lambda Pm: Pm)], label="P_minus_I")
    for i in range(len(iqcs)):
        pb.add_scalar_ineq(0.0, [(f"lam{i}", lambda v: v)], label=f"lam{i}_nonneg")
    pb.add_scalar_ineq(-margin_floor, [("s", lambda v: v)], label="floor")
    cap_terms = [("P", lambda Pm: -float(np.trace(Pm)))]
    for i in range(len(iqcs)):
        cap_terms.append((f"lam{i}", lambda v: -v))
    pb.add_scalar_ineq(trace_cap, cap_terms, label="cap")
    return pb


def solve_margin_primal(sys: SystemData, iqcs: IqcSet, rho: float,
                        config: SolverConfig | None = None, *,
                        margin_floor: float = MARGIN_FLOOR,
                        trace_cap: float = TRACE_CAP,
                        solver: SolverFn | None = None) -> MarginPrimalResult:
    """Minimal margin s with sI >= L_rho(P) + sum l_i M_i, P >= I, l >= 0.

    The raw program is unbounded below whenever it is strictly feasible
    (scale (s, P, lambda) up), so the search is run with a floor on s
    and a cap on trace(P) + sum lambda; ``floor_active``/``cap_active``
    report when either bound binds.  Strict feasibility of the
    rate-``rho`` inequality is equivalent to ``s_star < 0``.
    """
    iqcs.check_matches(sys)
    if rho <= 0:
        raise ValueError("rho must be positive")
    config = config or SolverConfig()
    run = solver or solve
    pb = _margin_problem(sys, iqcs, rho, margin_floor, trace_cap)
    sol = run(pb, config)
    s = float(sol.values.get("s", np.nan))
    P = np.asarray(sol.values.get("P", np.eye(sys.n)))
    lams = np.array([float(sol.values.get(f"lam{i}", 0.0)) for i in range(len(iqcs))])
    lams = np.maximum(lams, 0.0)
    H = lyapunov_operator(P, sys, rho)
    for lam, M in zip(lams, iqcs):
        H = H + lam * M
    margin_check = float(np.linalg.eigvalsh(H)[-1]) if H.size else 0.0
    floor_active = s <= margin_floor + 1e-6 * (1 + abs(margin_floor))
    cap_active = (float(np.trace(P)) + float(np.sum(lams))) >= trace_cap * (1 - 1e-6)
    return MarginPrimalResult(s_star=s, P=P, lambdas=lams, status=sol.status,
                              floor_active=floor_active, cap_active=cap_active,
                              margin_check=margin_check, solution=sol)


def dual_feasibility_margin(sys: SystemData, iqcs: IqcSet, rho: float,
                            config: SolverConfig | None = None, *,
                            solver: SolverFn | None = None) -> DualFeasibilityResult:
    """Phase-I slack of the dual constraint system at rate ``rho``.

    Maximizes t subject to L_rho*(Q) >= tI, trace(Q M_i) >= t, Q >= 0,
    trace(Q) = 1.  The feasible set is compact and always has interior,
    which makes this the numerically robust probe for the bisection.
    """
    iqcs.check_matches(sys)
    if rho <= 0:
        raise ValueError("rho must be positive")
    config = config or SolverConfig()
    run = solver or solve
    n, m = sys.n, sys.m
    d = n + m
    pb = SdpProblem()
    pb.add_sym_var("Q", d)
    pb.add_scalar_var("t")
    pb.minimize([("t", lambda v: -v)])
    if n:
        pb.add_psd(n, None,
                   [("Q", lambda Qm: lyapunov_adjoint(Qm, sys, rho)),
                    ("t", lambda v: -v * np.eye(n))],
                   label="adjoint")
    pb.add_psd(d, None, [("Q", lambda Qm: Qm)], label="Q_psd")
    for i, M in enumerate(iqcs):
        pb.add_scalar_ineq(
            0.0, [("Q", (lambda Mi: (lambda Qm: float(np.tensordot(Qm, Mi))))(M)),
                  ("t", lambda v: -v)],
            label=f"iqc{i}")
    # Keeps the objective bounded even with n = 0 and no constraints.
    tcap = 10.0 * (sys.scale() + iqcs.scale())
    pb.add_scalar_ineq(tcap, [("t", lambda v: -v)], label="tcap")
    pb.add_scalar_eq(-1.0, [("Q", lambda Qm: float(np.trace(Qm)))])
    sol = run(pb, config)
    t = float(sol.values.get("t", np.nan))
    Q = sol.values.get("Q")
    if Q is not None:
        Q = np.asarray(Q)
    return DualFeasibilityResult(t_star=t, Q=Q, status=sol.status, solution=sol)


def solve_margin_dual(sys: SystemData, iqcs: IqcSet, rho: float,
                      config: SolverConfig | None = None, *,
                      solver: SolverFn | None = None) -> MarginDualResult:
    """Maximize trace(L_rho*(Q)) over the trace-normalized dual set.

    Reports status ``infeasible`` (with the certifying phase-I margin)
    when the constraint set is empty, which happens exactly when the
    margin program is strictly feasible at this rate.
    """
    iqcs.check_matches(sys)
    if rho <= 0:
        raise ValueError("rho must be positive")
    config = config or SolverConfig()
    run = solver or solve
    phase1 = dual_feasibility_margin(sys, iqcs, rho, config, solver=solver)
    scale = sys.scale() + iqcs.scale()
    if phase1.t_star < -1e-7 * scale:
        return MarginDualResult(d_star=-np.inf, Q=None, status="infeasible",
                                infeasibility_margin=phase1.t_star, solution=None)
    n, m = sys.n, sys.m
    d = n + m
    pb = SdpProblem()
    pb.add_sym_var("Q", d)
    pb.minimize([("Q", lambda Qm: -float(np.trace(lyapunov_adjoint(Qm, sys, rho))))])
    if n:
        pb.add_psd(n, None, [("Q", lambda Qm: lyapunov_adjoint(Qm, sys, rho))],
                   label="adjoint")
    pb.add_psd(d, None, [("Q", lambda Qm: Qm)], label="Q_psd")
    for i, M in enumerate(iqcs):
        pb.add_scalar_ineq(
            0.0, [("Q", (lambda Mi: (lambda Qm: float(np.tensordot(Qm, Mi))))(M))],
            label=f"iqc{i}")
    pb.add_scalar_eq(-1.0, [("Q", lambda Qm: float(np.trace(Qm)))])
    sol = run(pb, config)
    Q = np.asarray(sol.values["Q"])
    return MarginDualResult(d_star=-sol.objective, Q=Q, status=sol.status,
                            infeasibility_margin=phase1.t_star, solution=sol)
