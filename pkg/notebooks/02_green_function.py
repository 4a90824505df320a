"""
Green's function of the linearized scheme
=========================================

Marches the Green's function of the operator linearized about the reference
profile, compares it with the leading term ``E(beta; (n alpha + j0)/sqrt n) V``
and with the Gaussian local limit away from the shock.

Run with ``python notebooks/02_green_function.py``.
"""

import math

import numpy as np

from dspstab import make_mlf, shock_pair, solve_family, linearize
from dspstab.green import (KernelSpec, decomposition_residual, derivative_decay, eigenvector_v,
                           green_column, h2mu)
from dspstab.linop import analyze_symbol, limit_symbol, spectral_probe

scheme = make_mlf(0.5, 0.8)
shock = shock_pair(scheme, 1.0, -1.0)
family = solve_family(scheme, shock)
op = linearize(scheme, family.reference)

# %% limit symbols: drift, diffusion order and coefficient
symbols = tuple(analyze_symbol(limit_symbol(scheme, u, side))
                for u, side in ((shock.u_minus, "left"), (shock.u_plus, "right")))
for s in symbols:
    print(f"{s.side:5s}: a = {s.coeffs}, alpha = {s.alpha:+.3f}, mu = {s.mu}, beta = {s.beta.real:.6f}")

# %% the eigenvector for eigenvalue 1 and the rest of the spectrum
V = eigenvector_v(op, family)
print(f"V: sum {V.normalization:.15f}, decay rate {V.decay_rate:.4f}, cosine gap {1 - V.cosine:.1e}")
print(f"spectral radius on the complement of V: {spectral_probe(op, V.seq):.4f}")

# %% Green's function columns conserve mass exactly (up to rounding)
for n in (10, 100, 1000):
    g = green_column(op, n, 40).seq
    print(f"n = {n:4d}: support [{g.offset}, {g.end - 1}], mass error {abs(g.values.sum() - 1):.1e}")

# %% G(n, j0, .) - E V: the residual collapses once the mass has reached the shock
tab = decomposition_residual(op, V, symbols, range(20, 201, 10), 40)
for n, r in list(zip(tab.n, tab.linf))[::3]:
    print(f"  n = {n:3d}: |G - E V| = {r:.3e}")
print(f"fitted decay exponent {tab.exponent:.2f}")

# %% far from the shock the column is a Gaussian moving at speed alpha
n, j0 = 300, 1000
g = green_column(op, n, j0).seq
alpha, beta = symbols[1].alpha, symbols[1].beta
x = (g.indices() - j0 - n * alpha) / math.sqrt(n)
gauss = h2mu(KernelSpec(1, beta), x) / math.sqrt(n)
print(f"local limit at n = {n}: sup |G - H/sqrt(n)| = {np.max(np.abs(g.values - gauss)):.2e}")

# %% discrete derivative of the Green's function decays like n^(-1/2) in l1
far = derivative_decay(op, 1000, range(100, 1501, 50))
print(f"far-field l1 decay exponent of L^n (Id - T) delta: {far.fits['l1'].exponent:.4f}")
