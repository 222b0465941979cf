"""Rewrite filtered quadratic constraints as static ones on a larger state.

A constraint that weighs a *filtered* signal, ``sum_k z_k' M z_k >= beta``
where ``z`` is the output of a linear filter driven by the plant output
``y_k = C x_k + D u_k`` and the input ``u_k``, is not in the static form
``sum_k [x_k; u_k]' M [x_k; u_k] >= beta`` that the rest of this package
consumes.  Absorbing the filter state ``psi`` into the plant state fixes
that: with the combined state ``[x; psi]`` the dynamics become

    [x; psi]_{k+1} = [[A, 0], [B1 C, A_psi]] [x; psi]_k
                     + [B; B2 + B1 D] u_k

and ``z_k = T [x_k; psi_k; u_k]`` with ``T = [D1 C, C_psi, D2 + D1 D]``,
so the filtered constraint is the static constraint with matrix
``T' M T``.  This module builds exactly those block matrices.

Several filters stack by appending their states in order, giving the
combined state ``[x; psi(1); psi(2); ...]``; each filter's static matrix
has zero blocks over the other filters' states.

The filter state always starts at zero.  With ``psi_0 = 0`` the static
sums on the augmented system equal the filtered-signal sums exactly;
any other start would make them agree only up to a transient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    DimensionMismatchError,
    IqcSet,
    SystemData,
    _as_matrix,
    _freeze,
    simulate,
    symmetrize,
)

__all__ = [
    "PlantData",
    "IqcFilter",
    "augment",
    "augment_all",
    "filtered_signal",
]


@dataclass(frozen=True)
class PlantData:
    """Discrete-time LTI plant with a measured output.

    ``x_{k+1} = A x_k + B u_k`` and ``y_k = C x_k + D u_k``.  ``B`` may
    be omitted for autonomous plants (then ``m = 0``) and ``D`` defaults
    to zero.
    """

    A: np.ndarray
    B: np.ndarray = None  # type: ignore[assignment]
    C: np.ndarray = None  # type: ignore[assignment]
    D: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError(f"A: must be square, got {A.shape}")
        n = A.shape[0]
        B = self.B
        if B is None:
            B = np.zeros((n, 0))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(n, -1) if B.size else B.reshape(n, 0)
        B = _as_matrix(B, rows=n, name="B")
        C = self.C
        if C is None:
            raise DimensionMismatchError("C: an output matrix is required")
        C = _as_matrix(C, cols=n, name="C")
        p = C.shape[0]
        D = self.D
        if D is None:
            D = np.zeros((p, B.shape[1]))
        D = _as_matrix(D, rows=p, cols=B.shape[1], name="D")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "B", _freeze(B))
        object.__setattr__(self, "C", _freeze(C))
        object.__setattr__(self, "D", _freeze(D))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def system(self) -> SystemData:
        """The plant dynamics alone, without the output map."""
        return SystemData(A=self.A, B=self.B)


@dataclass(frozen=True)
class IqcFilter:
    """Linear filter and weight defining a filtered quadratic constraint.

    The filter maps the plant output ``y`` and input ``u`` to the signal

        psi_{k+1} = A_psi psi_k + B_psi1 y_k + B_psi2 u_k
        z_k       = C_psi psi_k + D_psi1 y_k + D_psi2 u_k

    and the constraint is ``sum_k z_k' M z_k >= beta`` with symmetric
    ``M``.  A filter with no state (``n_psi = 0``) is a static weighting
    of ``(y, u)``; use :meth:`static` to build one without spelling out
    the empty blocks.
    """

    A_psi: np.ndarray
    B_psi1: np.ndarray
    B_psi2: np.ndarray
    C_psi: np.ndarray
    D_psi1: np.ndarray
    D_psi2: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        A_psi = _as_matrix(self.A_psi, name="A_psi")
        if A_psi.shape[0] != A_psi.shape[1]:
            raise DimensionMismatchError(
                f"A_psi: must be square, got {A_psi.shape}")
        n_psi = A_psi.shape[0]
        M = symmetrize(self.M, name="filter M")
        q = M.shape[0]
        C_psi = _as_matrix(self.C_psi, rows=q, cols=n_psi, name="C_psi")
        D_psi1 = _as_matrix(self.D_psi1, rows=q, name="D_psi1")
        p = D_psi1.shape[1]
        B_psi1 = _as_matrix(self.B_psi1, rows=n_psi, cols=p, name="B_psi1")
        D_psi2 = _as_matrix(self.D_psi2, rows=q, name="D_psi2")
        m = D_psi2.shape[1]
        B_psi2 = _as_matrix(self.B_psi2, rows=n_psi, cols=m, name="B_psi2")
        object.__setattr__(self, "A_psi", _freeze(A_psi))
        object.__setattr__(self, "B_psi1", _freeze(B_psi1))
        object.__setattr__(self, "B_psi2", _freeze(B_psi2))
        object.__setattr__(self, "C_psi", _freeze(C_psi))
        object.__setattr__(self, "D_psi1", _freeze(D_psi1))
        object.__setattr__(self, "D_psi2", _freeze(D_psi2))
        object.__setattr__(self, "M", _freeze(M))

    @classmethod
    def static(cls, D_psi1, D_psi2, M) -> "IqcFilter":
        """A stateless filter: ``z_k = D_psi1 y_k + D_psi2 u_k``."""
        M = symmetrize(M, name="filter M")
        q = M.shape[0]
        D_psi1 = _as_matrix(D_psi1, rows=q, name="D_psi1")
        D_psi2 = _as_matrix(D_psi2, rows=q, name="D_psi2")
        p = D_psi1.shape[1]
        m = D_psi2.shape[1]
        return cls(A_psi=np.zeros((0, 0)), B_psi1=np.zeros((0, p)),
                   B_psi2=np.zeros((0, m)), C_psi=np.zeros((q, 0)),
                   D_psi1=D_psi1, D_psi2=D_psi2, M=M)

    @property
    def n_psi(self) -> int:
        return self.A_psi.shape[0]

    @property
    def p(self) -> int:
        return self.D_psi1.shape[1]

    @property
    def m(self) -> int:
        return self.D_psi2.shape[1]

    @property
    def q(self) -> int:
        return self.M.shape[0]


def _check_filter_matches(plant: PlantData, filt: IqcFilter, label: str) -> None:
    if filt.p != plant.p:
        raise DimensionMismatchError(
            f"{label} expects p={filt.p} plant outputs but the plant "
            f"produces p={plant.p}")
    if filt.m != plant.m:
        raise DimensionMismatchError(
            f"{label} expects m={filt.m} inputs but the plant has "
            f"m={plant.m}")


def augment_all(plant: PlantData,
                filters: Sequence[IqcFilter]) -> tuple[SystemData, IqcSet]:
    """Absorb every filter's state into the plant state.

    The combined state is ``[x; psi(1); ...; psi(r)]`` in the order the
    filters are given.  Returns the augmented system together with one
    static constraint matrix per filter, each acting on the combined
    ``[state; input]`` vector and zero over the other filters' states.
    """
    filters = tuple(filters)
    for idx, filt in enumerate(filters):
        _check_filter_matches(plant, filt, f"filter[{idx}]")
    n, m = plant.n, plant.m
    n_aug = n + sum(f.n_psi for f in filters)

    A_bar = np.zeros((n_aug, n_aug))
    A_bar[:n, :n] = plant.A
    B_bar = np.zeros((n_aug, m))
    B_bar[:n] = plant.B
    row = n
    for filt in filters:
        stop = row + filt.n_psi
        A_bar[row:stop, :n] = filt.B_psi1 @ plant.C
        A_bar[row:stop, row:stop] = filt.A_psi
        B_bar[row:stop] = filt.B_psi2 + filt.B_psi1 @ plant.D
        row = stop

    mats = []
    row = n
    for filt in filters:
        stop = row + filt.n_psi
        T = np.zeros((filt.q, n_aug + m))
        T[:, :n] = filt.D_psi1 @ plant.C
        T[:, row:stop] = filt.C_psi
        T[:, n_aug:] = filt.D_psi2 + filt.D_psi1 @ plant.D
        mats.append(T.T @ filt.M @ T)
        row = stop

    sys_aug = SystemData(A=A_bar, B=B_bar)
    return sys_aug, IqcSet.from_matrices(mats, dim=n_aug + m)


def augment(plant: PlantData, filt: IqcFilter) -> tuple[SystemData, IqcSet]:
    """Absorb one filter's state into the plant state.

    Returns the augmented system and a one-entry constraint set; see
    :func:`augment_all` for the block structure and for stacking several
    filters.
    """
    return augment_all(plant, (filt,))


def filtered_signal(plant: PlantData, filt: IqcFilter, x0,
                    inputs) -> np.ndarray:
    """Simulate the filter along a plant trajectory and return ``z``.

    Runs the plant from ``x0`` under ``inputs`` (length N), feeds the
    outputs ``y_k = C x_k + D u_k`` and the inputs through the filter
    starting from ``psi_0 = 0``, and returns the filtered signal as an
    ``(N, q)`` array.  ``sum(z_k' M z_k)`` over these rows is the value
    the static constraint produced by :func:`augment` measures.
    """
    _check_filter_matches(plant, filt, "filter")
    traj = simulate(plant.system(), x0, inputs)
    X, U = traj.states[:-1], traj.inputs
    Y = X @ plant.C.T + U @ plant.D.T
    steps = len(traj)
    Z = np.empty((steps, filt.q))
    psi = np.zeros(filt.n_psi)
    for k in range(steps):
        Z[k] = filt.C_psi @ psi + filt.D_psi1 @ Y[k] + filt.D_psi2 @ U[k]
        psi = filt.A_psi @ psi + filt.B_psi1 @ Y[k] + filt.B_psi2 @ U[k]
    return Z
