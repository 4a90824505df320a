"""
Stationary discrete shock profiles.

Profiles are obtained by iterating the scheme from a step datum until the
update is below a tolerance.  Because the scheme is conservative, the mass of
``ū^δ - ū`` equals the mass injected by the initial datum; with the datum
used here that mass is ``δ``.
"""
from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .scheme import SchemeSpec, ShockPair, check_states, step_dense
from .seqcore import (CheckReport, TailedSeq, diff_seq, fit_exponential_tail, mass,
                      max_workers)

DEFAULT_TOL = 1e-13
DEFAULT_HALF_WIDTH = 60
DEFAULT_MAX_STEPS = 10**6
DEFAULT_DELTA_GRID = tuple(np.linspace(-0.5, 0.5, 17))
RESIDUAL_FLOOR = 1e-11   # tail entries below this are not used by exponential fits


class ConvergenceError(RuntimeError):
    """The fixed-point iteration did not reach the tolerance."""


class FamilyRangeError(ValueError):
    """A requested mass lies outside the range of the solved family."""


@dataclass(frozen=True)
class Profile:
    seq: TailedSeq
    delta: float
    residual: float
    iterations: int


def step_datum(shock: ShockPair, delta: float, half_width: int) -> TailedSeq:
    """
    Step initial datum carrying mass ``delta`` relative to the ``delta=0`` datum.

    With jump ``[u] = u- - u+`` the transition index is
    ``k = floor((delta + [u]/2) / [u])`` and the value there is
    ``delta + u+ + [u]/2 - k [u]``; ``u-`` to the left, ``u+`` to the right.
    For ``u- = 1, u+ = -1`` this is ``delta - 2 floor((delta+1)/2)``.
    """
    jump = shock.jump
    if jump == 0:
        raise ValueError("shock states must differ")
    k = math.floor((delta + jump / 2) / jump)
    j = np.arange(-half_width, half_width + 1)
    if not -half_width <= k <= half_width:
        raise ValueError(f"transition index {k} falls outside the window")
    v = np.where(j < k, shock.u_minus, shock.u_plus).astype(float)
    v[k + half_width] = delta + shock.u_plus + jump / 2 - k * jump
    return TailedSeq(-half_width, v, shock.u_minus, shock.u_plus)


def solve_sdsp(s: SchemeSpec, shock: ShockPair, delta: float = 0.0,
               half_width: int = DEFAULT_HALF_WIDTH, tol: float = DEFAULT_TOL,
               max_steps: int = DEFAULT_MAX_STEPS, initial: TailedSeq | None = None) -> Profile:
    """Iterate the scheme from the step datum (or ``initial``) until ``‖N u - u‖_∞ <= tol``."""
    if not shock.lax_ok:
        raise ValueError("shock violates the Lax condition")
    if abs(shock.rh_residual) > 1e-12:
        raise ValueError(f"Rankine-Hugoniot residual {shock.rh_residual:g} too large")
    if not tol > 0:
        raise ValueError("tol must be positive")
    u0 = initial if initial is not None else step_datum(shock, delta, half_width)
    lo, hi = -half_width, half_width + 1
    u = u0.window(lo, hi)
    um, up = shock.u_minus, shock.u_plus
    r = math.inf
    for it in range(max_steps + 1):
        check_states(s, u, lo)
        un = step_dense(s, u, um, up)
        r = float(np.max(np.abs(un - u)))
        if r <= tol:
            seq = TailedSeq(lo, u, um, up).canonical()
            return Profile(seq, float(delta), r, it)
        u = un
    raise ConvergenceError(f"no convergence for delta={delta} after {max_steps} steps "
                           f"(residual {r:.3e})")


@dataclass
class ProfileFamily:
    """Profiles ``ū^δ`` ordered by ``δ``; the ``δ=0`` member is the reference ``ū``."""

    shock: ShockPair
    scheme: SchemeSpec
    members: list = field(default_factory=list)   # [(delta, Profile)], sorted
    half_width: int = DEFAULT_HALF_WIDTH
    tol: float = DEFAULT_TOL
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        self.members = sorted(self.members, key=lambda m: m[0])
        ds = [d for d, _ in self.members]
        if any(b <= a for a, b in zip(ds, ds[1:])):
            raise ValueError("family deltas must be strictly increasing")
        if 0.0 not in ds:
            raise ValueError("family must contain the reference member delta=0")

    @property
    def deltas(self) -> np.ndarray:
        return np.array([d for d, _ in self.members])

    @property
    def reference(self) -> Profile:
        return self.get(0.0)

    def get(self, delta: float) -> Profile | None:
        for d, pr in self.members:
            if d == delta:
                return pr
        return None

    def solve(self, delta: float) -> Profile:
        return solve_sdsp(self.scheme, self.shock, delta, self.half_width, self.tol, self.max_steps)

    def profile(self, delta: float, allow_solve: bool = True) -> Profile:
        pr = self.get(delta)
        if pr is None:
            if not allow_solve:
                raise KeyError(f"delta={delta} is not a solved member")
            pr = self.solve(delta)
        return pr


def solve_family(s: SchemeSpec, shock: ShockPair, deltas=DEFAULT_DELTA_GRID,
                 half_width: int = DEFAULT_HALF_WIDTH, tol: float = DEFAULT_TOL,
                 max_steps: int = DEFAULT_MAX_STEPS, workers: int | None = None) -> ProfileFamily:
    """Solve every member (in parallel up to ``DSPSTAB_THREADS``) and assemble in δ order."""
    ds = sorted({float(d) for d in deltas} | {0.0})
    n = min(len(ds), workers or max_workers())

    def one(d):
        return d, solve_sdsp(s, shock, d, half_width, tol, max_steps)

    if n > 1:
        with ThreadPoolExecutor(n) as ex:
            members = list(ex.map(one, ds))
    else:
        members = [one(d) for d in ds]
    return ProfileFamily(shock, s, members, half_width, tol, max_steps)


def mass_function(fam: ProfileFamily, delta: float, allow_solve: bool = True) -> float:
    """``M(δ) = Σ_j (ū^δ_j - ū_j)``."""
    if delta == 0.0:
        return 0.0
    pr = fam.profile(delta, allow_solve)
    return mass(diff_seq(pr.seq, fam.reference.seq))


# -- localization -------------------------------------------------------------

@dataclass
class LocalizationFit:
    rate_left: float
    rate_right: float
    fit_quality: dict


def _side_rate(dist: np.ndarray, resid: np.ndarray, floor: float) -> tuple[float, dict]:
    usable = resid > floor
    if not usable.any():
        return math.inf, {"ok": True, "n_points": 0, "note": "all residuals below floor"}
    last = int(np.flatnonzero(usable)[-1])
    # outer half of the stretch that is still above the floor
    first = (last + 1) // 2
    d, r = dist[first:last + 1], resid[first:last + 1]
    keep = r > floor
    d, r = d[keep], r[keep]
    if len(d) < 8:
        raise ValueError(f"degenerate window: only {len(d)} usable points")
    tf = fit_exponential_tail(d, r)
    ok = tf.rate > 1e-3 and tf.exponential
    return tf.rate, {"ok": ok, "n_points": tf.n_points, "rss_exp": tf.rss_exp,
                     "rss_pow": tf.rss_pow, "log_c": tf.log_c}


def localization_rates(pr: Profile | TailedSeq, center: int = 0,
                       floor: float = RESIDUAL_FLOOR) -> LocalizationFit:
    """
    Exponential rates of ``|ū_j - u^±|`` on each side of ``center``.

    Each side is fitted on the outer half of the points still above
    ``floor``.  A side fails if the rate is below ``1e-3`` or if a power law
    in ``|j|`` explains the data better than an exponential.
    """
    seq = pr.seq if isinstance(pr, Profile) else pr
    jr = np.arange(center + 1, max(seq.end, center + 2))
    jl = np.arange(min(seq.offset, center - 1), center)[::-1]
    rr = np.abs(seq.window(jr[0], jr[-1] + 1) - seq.right_tail)
    rl = np.abs(seq.window(jl[-1], jl[0] + 1)[::-1] - seq.left_tail)
    rate_r, qr = _side_rate((jr - center).astype(float), rr, floor)
    rate_l, ql = _side_rate((center - jl).astype(float), rl, floor)
    return LocalizationFit(rate_l, rate_r, {"ok": ql["ok"] and qr["ok"], "left": ql, "right": qr})


def family_lipschitz_check(fam: ProfileFamily, floor: float = RESIDUAL_FLOOR,
                           collapse_ratio: float = 1e-3) -> CheckReport:
    """
    Bound ``sup_j |ū^δ_j - ū_j| / |δ|`` over the members and fit ``C e^{-c|j|}``
    to the envelope of ``|ū^δ_j - ū_j| / |δ|``.
    """
    others = [(d, pr) for d, pr in fam.members if d != 0.0]
    if len(fam.members) < 3:
        raise ValueError("need at least 3 members")
    ref = fam.reference.seq
    ratios, diffs = [], []
    for d, pr in others:
        df = pr.seq - ref
        diffs.append((df, abs(d)))
        ratios.append(df.max_abs() / abs(d))
    ratios = np.array(ratios)
    collapsed = [float(d) for (d, _), r in zip(others, ratios) if r < collapse_ratio * ratios.max()]
    lo = min(df.offset for df, _ in diffs)
    hi = max(df.end for df, _ in diffs)
    env = np.max([np.abs(df.window(lo, hi)) / a for df, a in diffs], axis=0)
    j = np.arange(lo, hi)
    keep = (env > floor) & (np.abs(j) >= 3)
    c = C = math.nan
    fit_ok = False
    if keep.sum() >= 4:
        tf = fit_exponential_tail(np.abs(j[keep]).astype(float), env[keep])
        c, C = tf.rate, math.exp(tf.log_c)
        fit_ok = tf.rate > 1e-3
    passed = fit_ok and not collapsed and bool(np.isfinite(ratios).all())
    return CheckReport("family_lipschitz", passed, float(ratios.max()),
                       {"ratios": dict(zip([float(d) for d, _ in others], ratios.tolist())),
                        "C": C, "c": c, "collapsed": collapsed},
                       "" if not collapsed else f"ratio collapse at delta={collapsed}")


def identify_delta(fam: ProfileFamily, h: TailedSeq, tol: float = 1e-12,
                   max_refine: int = 60, allow_solve: bool = True) -> float:
    """
    The ``δ`` with ``M(δ) = Σ h``, by bracketing on the tabulated ``M`` and
    regula falsi refinement with on-demand profile solves.
    """
    target = mass(h)
    ds = list(fam.deltas)
    Ms = [mass_function(fam, d, allow_solve=False) for d in ds]
    if any(b <= a for a, b in zip(Ms, Ms[1:])):
        raise ValueError("mass function is not increasing on the family")
    for d, m in zip(ds, Ms):
        if abs(m - target) <= tol:
            return float(d)
    if not Ms[0] <= target <= Ms[-1]:
        raise FamilyRangeError(f"mass {target:g} outside family range [{Ms[0]:g}, {Ms[-1]:g}]")
    k = bisect.bisect_left(Ms, target)
    a, b, Ma, Mb = ds[k - 1], ds[k], Ms[k - 1], Ms[k]
    x = a + (target - Ma) * (b - a) / (Mb - Ma)
    if not allow_solve:
        return float(x)
    for _ in range(max_refine):
        Mx = mass_function(fam, x)
        if abs(Mx - target) <= tol or b - a <= 1e-15:
            break
        if Mx < target:
            a, Ma = x, Mx
        else:
            b, Mb = x, Mx
        x_new = a + (target - Ma) * (b - a) / (Mb - Ma)
        # keep the step inside the bracket and away from its ends
        x = min(max(x_new, a + 1e-3 * (b - a)), b - 1e-3 * (b - a))
    return float(x)


def write_family_manifest(path, fam: ProfileFamily) -> None:
    """``delta,mass,residual,iterations``."""
    with open(path, "w", newline="\n") as fh:
        fh.write("delta,mass,residual,iterations\n")
        for d, pr in fam.members:
            fh.write(f"{float(d)!r},{float(mass_function(fam, d, False))!r},{float(pr.residual)!r},{int(pr.iterations)}\n")
