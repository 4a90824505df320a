"""
Conservative one-step explicit schemes.

A scheme advances ``u`` by

    (N u)_j = u_j - nu * (F_{j+1} - F_j),    F_j = F(nu; u_{j-p}, ..., u_{j+q-1}).

Numerical fluxes are vectorized callables ``F(nu, u_{-p}, ..., u_{q-1})``
taking ``p+q`` arrays of equal shape.  The modified Lax–Friedrichs flux with
Burgers' flux is the reference instance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .seqcore import CheckReport, TailedSeq

STATE_MARGIN = 1e-9


class StateEscapeError(ValueError):
    """A state left the admissible interval; ``index`` is the offending position."""

    def __init__(self, msg: str, index: int | None = None):
        super().__init__(msg)
        self.index = index


def burgers_flux(u):
    return 0.5 * u * u


def burgers_derivative(u):
    return u


@dataclass(frozen=True)
class SchemeSpec:
    p: int
    q: int
    nu: float
    flux: Callable
    numerical_flux: Callable
    state_lo: float
    state_hi: float
    flux_derivative: Callable
    # optional exact gradient (nu, *states) -> tuple of p+q partial derivatives of F
    flux_gradient: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("stencil extents p, q must be >= 1")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.state_lo < self.state_hi:
            raise ValueError("state_lo must be below state_hi")

    @property
    def bounds(self) -> tuple[float, float]:
        """Closed admissible interval: the user interval shrunk by ``STATE_MARGIN``."""
        return self.state_lo + STATE_MARGIN, self.state_hi - STATE_MARGIN

    def flux_at(self, states: np.ndarray) -> np.ndarray:
        """``F`` on the stacked ``(p+q, ...)`` array of arguments."""
        return self.numerical_flux(self.nu, *states)

    def sample_states(self, n_samples: int) -> np.ndarray:
        if n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        lo, hi = self.bounds
        return np.linspace(lo, hi, n_samples)


def make_mlf(nu: float, D: float, flux: Callable = burgers_flux,
             flux_derivative: Callable = burgers_derivative,
             state_bounds: tuple[float, float] = (-1.5, 1.5)) -> SchemeSpec:
    """Modified Lax–Friedrichs: ``F(u_{-1}, u_0) = (f(u_{-1}) + f(u_0))/2 + D (u_{-1} - u_0)``."""
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if not D > 0:
        raise ValueError(f"D must be positive, got {D}")

    def F(_nu, um1, u0):
        return 0.5 * (flux(um1) + flux(u0)) + D * (um1 - u0)

    def grad(_nu, um1, u0):
        return 0.5 * flux_derivative(um1) + D, 0.5 * flux_derivative(u0) - D

    lo, hi = state_bounds
    return SchemeSpec(1, 1, float(nu), flux, F, float(lo), float(hi), flux_derivative,
                      flux_gradient=grad, name=f"mlf(D={D:g})")


# -- evolution ------------------------------------------------------------

def check_states(s: SchemeSpec, u: np.ndarray, index0: int = 0) -> None:
    lo, hi = s.bounds
    bad = np.flatnonzero((u < lo) | (u > hi) | ~np.isfinite(u))
    if bad.size:
        k = int(bad[0])
        raise StateEscapeError(f"state escaped U=[{lo:.12g}, {hi:.12g}] at index {index0 + k} "
                               f"(value {float(u[k])!r})", index0 + k)


def step_dense(s: SchemeSpec, u: np.ndarray, left: float, right: float) -> np.ndarray:
    """
    One step on a dense window (last axis), tails ``left``/``right`` outside it.

    Works on stacked arrays: every row is an independent sequence sharing
    the same window and tails (scalars or arrays broadcastable to rows).
    """
    p, q = s.p, s.q
    shape = u.shape[:-1]
    lpad = np.broadcast_to(np.asarray(left, dtype=float)[..., None], shape + (p,))
    rpad = np.broadcast_to(np.asarray(right, dtype=float)[..., None], shape + (q,))
    ext = np.concatenate([lpad, u, rpad], axis=-1)
    n = u.shape[-1]
    # F_j for j = 0..n (interfaces of the window), arguments u_{j-p..j+q-1}
    states = [ext[..., i:i + n + 1] for i in range(p + q)]
    F = s.numerical_flux(s.nu, *states)
    return u - s.nu * (F[..., 1:] - F[..., :-1])


def evolve(s: SchemeSpec, u: TailedSeq) -> TailedSeq:
    """Apply the scheme once; tails are kept exactly and the window widens by ``q`` left, ``p`` right."""
    check_states(s, np.array([u.left_tail]), u.offset - 1)
    check_states(s, u.values, u.offset)
    check_states(s, np.array([u.right_tail]), u.end)
    lo, hi = u.offset - s.q, u.end + s.p
    new = step_dense(s, u.window(lo, hi), u.left_tail, u.right_tail)
    return TailedSeq(lo, new, u.left_tail, u.right_tail)


# -- admissibility checks ---------------------------------------------------

def check_consistency(s: SchemeSpec, n_samples: int = 1001) -> CheckReport:
    """``max |F(u,...,u) - f(u)|`` over sampled ``u``; pass iff ``<= 1e-12``."""
    u = s.sample_states(n_samples)
    res = np.abs(s.numerical_flux(s.nu, *([u] * (s.p + s.q))) - s.flux(u))
    k = int(np.argmax(res))
    val = float(res[k])
    return CheckReport("consistency", val <= 1e-12, val, {"worst_state": float(u[k])})


def check_cfl(s: SchemeSpec, n_samples: int = 1001) -> CheckReport:
    """``-q < nu f'(u) < p`` on sampled ``u``."""
    u = s.sample_states(n_samples)
    c = s.nu * np.asarray(s.flux_derivative(u), dtype=float) * np.ones_like(u)
    ok = bool(np.all((-s.q < c) & (c < s.p)))
    return CheckReport("cfl", ok, float(np.max(np.abs(c))),
                       {"min_speed": float(c.min()), "max_speed": float(c.max()), "p": s.p, "q": s.q})


@dataclass(frozen=True)
class ShockPair:
    u_minus: float
    u_plus: float
    rh_residual: float
    lax_ok: bool

    @property
    def jump(self) -> float:
        return self.u_minus - self.u_plus


def shock_pair(s: SchemeSpec, u_minus: float, u_plus: float) -> ShockPair:
    """Rankine–Hugoniot residual ``f(u-) - f(u+)`` and the Lax condition ``f'(u+) < 0 < f'(u-)``."""
    check_states(s, np.array([u_minus, u_plus]))
    rh = float(s.flux(u_minus) - s.flux(u_plus))
    lax = bool(s.flux_derivative(u_plus) < 0 < s.flux_derivative(u_minus))
    return ShockPair(float(u_minus), float(u_plus), rh, lax)


def check_rankine_hugoniot(sp: ShockPair, tol: float = 1e-12) -> CheckReport:
    return CheckReport("rankine_hugoniot", abs(sp.rh_residual) <= tol, abs(sp.rh_residual))


def check_lax(s: SchemeSpec, sp: ShockPair) -> CheckReport:
    return CheckReport("lax", sp.lax_ok, float("nan"),
                       {"fprime_minus": float(s.flux_derivative(sp.u_minus)),
                        "fprime_plus": float(s.flux_derivative(sp.u_plus))})
