"""Certify contraction rates for gradient descent on sector-bounded problems.

Gradient descent x_{k+1} = x_k - alpha * g_k, where the gradient g_k is
only known to lie in the sector between g = m_f * x and g = L * x, is a
one-state linear system with an unknown input constrained by a single
pointwise quadratic inequality.  The certified spectral radius of that
constrained system is a proven worst-case contraction rate over the
whole problem class.

For this sector the sharp rate is max(|1 - alpha*m_f|, |1 - alpha*L|),
minimized at alpha = 2 / (m_f + L).  The script sweeps alpha and prints
the certified rate next to that closed form.

Run: python3 demos/certify_gradient_descent.py
"""

import numpy as np

from iqcradius import IqcSet, SystemData, exponential_rate_certificate, spectral_radius

M_F, L = 1.0, 10.0
SECTOR = [[-M_F * L, (M_F + L) / 2.0], [(M_F + L) / 2.0, -1.0]]


def certified_rate(alpha: float) -> float:
    sys = SystemData(A=[[1.0]], B=[[-alpha]])
    iqcs = IqcSet.from_matrices([SECTOR])
    return spectral_radius(sys, iqcs).rho


def main() -> None:
    print(f"sector bounds: m_f = {M_F}, L = {L}")
    print(f"{'alpha':>10}  {'certified':>10}  {'closed form':>11}")
    for alpha in (0.02, 0.05, 0.10, 2.0 / (M_F + L), 0.15, 0.19):
        closed = max(abs(1.0 - alpha * M_F), abs(1.0 - alpha * L))
        print(f"{alpha:>10.4f}  {certified_rate(alpha):>10.6f}  {closed:>11.6f}")

    best = 2.0 / (M_F + L)
    sys = SystemData(A=[[1.0]], B=[[-best]])
    iqcs = IqcSet.from_matrices([SECTOR])
    rate = exponential_rate_certificate(sys, iqcs)
    print()
    print(f"optimal step alpha = 2/(m_f+L) = {best:.6f}")
    print(f"certified exponential decay rate: {rate.rho:.6f} "
          f"(= {int(np.round(rate.rho * (M_F + L)))}/{int(M_F + L)}"
          f" + bisection slack)")


if __name__ == "__main__":
    main()
