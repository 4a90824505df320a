"""
Decay-rate conditions, the nonlinear stability experiment and identity checks.

The experiment perturbs the reference profile by the two-point family

    h_J = -a_J δ_0 + a_J δ_J,     a_J = 1 / (1 + (1+J)^Γ),

marches the nonlinear scheme and fits log-log slopes of the sup over ``J``
of the weighted norms of ``u^n - ū``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .linop import BandedOp, apply, linearize, op_difference_apply
from .profile import Profile, ProfileFamily, identify_delta
from .scheme import SchemeSpec, check_states, evolve, step_dense
from .seqcore import (CheckReport, TailedSeq, max_workers, shift,
                      weighted_norm, weights)

EPS = 1e-12
RANDOM_SEED = 0x5EED


class ConditionError(ValueError):
    """Decay parameters violate a precondition."""


# -- conditions ---------------------------------------------------------------------

def cond_h(a: float, b: float, c: float) -> bool:
    """Condition (H) on a triplet of nonnegative reals."""
    if min(a, b, c) < 0:
        raise ValueError(f"triplet entries must be >= 0, got {(a, b, c)}")
    d = b - c
    if a < 1 - EPS:
        return 1 - a <= d + EPS
    if a <= 1 + EPS:
        return d > EPS
    return d >= -EPS


@dataclass(frozen=True)
class DecayParams:
    gamma1: float
    gamma_inf: float
    p1: float
    p_inf: float
    mu: int = 1
    Gamma: float = math.nan
    c1: bool | None = None
    c2: bool | None = None
    c3: bool | None = None
    c4: bool | None = None

    @property
    def all_conditions(self) -> bool:
        return bool(self.c1 and self.c2 and self.c3 and self.c4)

    @property
    def half_inv_mu(self) -> float:
        return 1.0 / (2 * self.mu)


def gamma_of(dp: DecayParams) -> float:
    """``Γ = max(p1+γ1, p∞+γ∞-1/2μ, p∞, γ∞)``."""
    return max(dp.p1 + dp.gamma1, dp.p_inf + dp.gamma_inf - dp.half_inv_mu, dp.p_inf, dp.gamma_inf)


def check_conditions(dp: DecayParams) -> DecayParams:
    """Evaluate (C1)-(C4) and ``Γ``."""
    g1, gi, p1, pi, h = dp.gamma1, dp.gamma_inf, dp.p1, dp.p_inf, dp.half_inv_mu
    m = min(gi, h)
    c1 = cond_h(p1 + pi, gi + h, p1)
    c2 = cond_h(gi + h, p1 + pi, p1)
    c3 = cond_h(p1 + pi, g1 + h + m, pi) or cond_h(2 * pi, gi + m, pi)
    c4 = cond_h(g1 + h + m, p1 + pi, pi) or cond_h(gi + m, 2 * pi, pi)
    return replace(dp, Gamma=gamma_of(dp), c1=c1, c2=c2, c3=c3, c4=c4)


def decay_params(gamma1: float, gamma_inf: float, p1: float, p_inf: float, mu: int = 1) -> DecayParams:
    return check_conditions(DecayParams(gamma1, gamma_inf, p1, p_inf, mu))


def preset(choice: int, p: float, mu: int = 1) -> DecayParams:
    """
    Choice 1: ``(γ1, γ∞, p1, p∞) = (p, p+1/2μ, p, p)``, needs ``p >= (1-1/μ)/2``
    (strict for ``μ = 1``).  Choice 2: ``(p, p, p, p+1/2μ)``, needs
    ``p >= max((1-1/μ)/2, 1/2μ)``.
    """
    h = 1.0 / (2 * mu)
    lo = 0.5 * (1 - 1.0 / mu)
    if choice == 1:
        if p < lo - EPS or (mu == 1 and p <= lo + EPS):
            raise ConditionError(f"choice 1 needs p {'>' if mu == 1 else '>='} {lo:g} for mu={mu}, got {p:g}")
        return decay_params(p, p + h, p, p, mu)
    if choice == 2:
        need = max(lo, h)
        if p < need - EPS:
            raise ConditionError(f"choice 2 needs p >= {need:g} for mu={mu}, got {p:g}")
        return decay_params(p, p, p, p + h, mu)
    raise ConditionError(f"choice must be 1 or 2, got {choice}")


def make_hJ(J: int, Gamma: float) -> TailedSeq:
    """``∓1/(1+(1+J)^Γ)`` at ``j = 0`` and ``j = J``: zero mass, unit ``ℓ¹_Γ`` norm."""
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    a = 1.0 / (1.0 + (1.0 + J) ** Gamma)
    v = np.zeros(J + 1)
    v[0], v[J] = -a, a
    return TailedSeq(0, v)


# -- experiment ---------------------------------------------------------------------

@dataclass
class ExperimentReport:
    params: DecayParams
    J_list: list
    n: np.ndarray
    l1: np.ndarray              # (n, J) ‖h^n‖ in ℓ¹_{γ1}
    linf: np.ndarray            # (n, J) ‖h^n‖ in ℓ^∞_{γ∞}
    h_norms: np.ndarray         # ‖h_J‖ in ℓ¹_Γ
    log_env_l1: np.ndarray
    log_env_linf: np.ndarray
    window: tuple
    slopes: dict
    targets: dict
    slack: dict
    verdicts: dict
    mass_defect: np.ndarray     # max over J of |mass(u^n - ū) - mass(h)| / ‖h‖_ℓ¹
    deltas: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v == "pass" for v in self.verdicts.values())


def default_regression_window(s: SchemeSpec, u_minus: float, u_plus: float, J_max: int,
                              n_max: int) -> tuple[int, int]:
    """
    ``[n_r/10, n_r]`` with ``n_r = min(n_max, J_max / (2 min|α±|))``.

    ``n_r`` is the time the farthest member of the ``h_J`` family needs to
    travel half way to the shock.  Past that time every member has been
    absorbed and the envelope only tracks the exponential collapse onto the
    profile, which carries no information on the algebraic rates.
    """
    speed = min(abs(s.nu * s.flux_derivative(u_minus)), abs(s.nu * s.flux_derivative(u_plus)))
    if speed == 0:
        n_r = n_max
    else:
        n_r = int(min(n_max, math.floor(J_max / (2 * speed))))
    return max(1, round(n_r / 10)), max(n_r, 2)


def default_slack(dp: DecayParams) -> dict:
    s = 0.1 if dp.p1 >= 1 - EPS else 0.15
    return {"l1": s, "linf": s}


def _march(s: SchemeSpec, U: np.ndarray, Ub: np.ndarray, Uref: np.ndarray, h_mass: np.ndarray,
           w1: np.ndarray, wi: np.ndarray, n_max: int, left: float, right: float, lo: int):
    nJ = U.shape[0]
    l1 = np.empty((n_max + 1, nJ))
    li = np.empty((n_max + 1, nJ))
    md = np.empty((n_max + 1, nJ))
    for n in range(n_max + 1):
        H = np.abs(U - Ub)
        l1[n] = (H * w1).sum(axis=1)
        li[n] = (H * wi).max(axis=1)
        md[n] = np.abs((U - Uref).sum(axis=1) - h_mass)
        if n < n_max:
            if U.min() < s.bounds[0] or U.max() > s.bounds[1]:
                check_states(s, U.ravel(), lo)
            U = step_dense(s, U, left, right)
    return l1, li, md


def _slope(n: np.ndarray, env: np.ndarray, window: tuple) -> float:
    m = (n >= window[0]) & (n <= window[1])
    y = env[m]
    if not np.all(np.isfinite(y)):
        return math.nan
    return float(np.polyfit(np.log(n[m]), y, 1)[0])


def run_experiment(s: SchemeSpec, fam: ProfileFamily, dp: DecayParams, J_list=range(1, 51),
                   n_max: int = 2000, regression_window: tuple | None = None,
                   slack: dict | None = None, perturbations=None, strict: bool = True,
                   workers: int | None = None) -> ExperimentReport:
    """
    March ``u^0 = ū + h`` for each perturbation, record ``‖u^n - ū^δ‖`` in
    ``ℓ¹_{γ1}`` and ``ℓ^∞_{γ∞}``, and fit slopes of the log sup-envelope.

    ``perturbations`` replaces the ``h_J`` family (labels are then
    ``1..len``).  With ``strict=False`` violated conditions only warn.
    """
    if dp.c1 is None:
        dp = check_conditions(dp)
    if not dp.all_conditions:
        msg = f"conditions not satisfied: C1..C4 = {(dp.c1, dp.c2, dp.c3, dp.c4)}"
        if strict:
            raise ConditionError(msg)
        warnings.warn(msg)
    J_list = list(J_list)
    if perturbations is None:
        hs = [make_hJ(J, dp.Gamma) for J in J_list]
    else:
        hs = list(perturbations)
        J_list = list(range(1, len(hs) + 1))
    ref = fam.reference.seq
    deltas = [identify_delta(fam, h) for h in hs]
    profiles = [fam.profile(d).seq for d in deltas]
    reach = n_max * max(s.p, s.q) + 1
    lo = min([ref.offset] + [h.offset for h in hs if len(h)] + [p.offset for p in profiles]) - reach
    hi = max([ref.end] + [h.end for h in hs if len(h)] + [p.end for p in profiles]) + reach
    j = np.arange(lo, hi)
    w1 = weights(j, dp.gamma1)
    wi = weights(j, dp.gamma_inf)
    Uref = ref.window(lo, hi)
    U = np.array([Uref + h.window(lo, hi) for h in hs])
    Ub = np.array([p.window(lo, hi) for p in profiles])
    h_mass = np.array([float(h.values.sum()) for h in hs])
    h_l1 = np.array([weighted_norm(h, 1, 0.0) for h in hs])
    h_norms = np.array([weighted_norm(h, 1, dp.Gamma) for h in hs])

    nw = min(len(hs), workers or max_workers())
    chunks = np.array_split(np.arange(len(hs)), nw) if nw > 1 else [np.arange(len(hs))]
    chunks = [c for c in chunks if len(c)]

    def run(idx):
        return _march(s, U[idx], Ub[idx], Uref, h_mass[idx], w1, wi, n_max,
                      ref.left_tail, ref.right_tail, lo)

    if len(chunks) > 1:
        with ThreadPoolExecutor(len(chunks)) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(chunks[0])]
    l1 = np.concatenate([p[0] for p in parts], axis=1)
    li = np.concatenate([p[1] for p in parts], axis=1)
    md = np.concatenate([p[2] for p in parts], axis=1)

    scale = np.where(h_norms > 0, h_norms, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        env1 = np.log(np.nanmax(np.where(h_norms > 0, l1 / scale, 0.0), axis=1))
        envi = np.log(np.nanmax(np.where(h_norms > 0, li / scale, 0.0), axis=1))
        mdef = np.nanmax(np.where(h_l1 > 0, md / np.where(h_l1 > 0, h_l1, 1.0), 0.0), axis=1)
    n = np.arange(n_max + 1)
    if regression_window is None:
        regression_window = default_regression_window(s, ref.left_tail, ref.right_tail,
                                                      max(J_list), n_max)
    slopes = {"l1": _slope(n, env1, regression_window), "linf": _slope(n, envi, regression_window)}
    targets = {"l1": -dp.p1, "linf": -dp.p_inf}
    slack = slack or default_slack(dp)
    verdicts = {}
    for k in slopes:
        if math.isnan(slopes[k]):
            verdicts[k] = "degenerate"
        else:
            verdicts[k] = "pass" if slopes[k] <= targets[k] + slack[k] else "fail"
    return ExperimentReport(dp, J_list, n, l1, li, h_norms, env1, envi, tuple(regression_window),
                            slopes, targets, slack, verdicts, mdef, deltas)


# -- remainder and identities ---------------------------------------------------

def state_radius(s: SchemeSpec, pr: Profile) -> float:
    """Distance from the profile states to the boundary of the admissible interval."""
    lo, hi = s.bounds
    v = np.concatenate([pr.seq.values, [pr.seq.left_tail, pr.seq.right_tail]])
    return float(min((v - lo).min(), (hi - v).min()))


def q_remainder(s: SchemeSpec, pr: Profile, h: TailedSeq, op: BandedOp | None = None,
                radius: float | None = None) -> TailedSeq:
    """
    ``Q_j = nu F(ū+h)_j - nu F(ū)_j - Σ_k b_{j,k} h_{j+k}``, so that
    ``N(ū+h) = ū + L h + (Id - T) Q(h)`` up to the profile residual.
    """
    R = state_radius(s, pr) if radius is None else radius
    if not h.is_compact:
        raise ValueError("h must be compact")
    if h.max_abs() >= R:
        raise ValueError(f"perturbation too large: ‖h‖_∞ = {h.max_abs():.3g} >= R = {R:.3g}")
    if len(h) == 0:
        return TailedSeq.zeros()
    op = op or linearize(s, pr)
    p, q = s.p, s.q
    lo, hi = h.offset - q + 1, h.end + p
    n = hi - lo
    ub = pr.seq.window(lo - p, hi + q - 1)
    hw = h.window(lo - p, hi + q - 1)
    st_b = [ub[i:i + n] for i in range(p + q)]
    st_u = [ub[i:i + n] + hw[i:i + n] for i in range(p + q)]
    dF = s.nu * (s.numerical_flux(s.nu, *st_u) - s.numerical_flux(s.nu, *st_b))
    B = op.b_rows(lo, hi)
    lin = sum(B[:, i] * hw[i:i + n] for i in range(p + q))
    return TailedSeq(lo, dF - lin)


def q_identity_residual(s: SchemeSpec, pr: Profile, h: TailedSeq, op: BandedOp | None = None) -> float:
    """``‖N(ū+h) - ū - L h - (Id - T) Q(h)‖_∞``."""
    op = op or linearize(s, pr)
    Q = q_remainder(s, pr, h, op)
    lhs = evolve(s, pr.seq + h) - pr.seq
    rhs = apply(op, h) + Q - shift(Q)
    d = lhs - rhs
    return d.max_abs()


def random_perturbations(radius: float, trials: int, seed: int = RANDOM_SEED, support: int = 20):
    """Compact ``h`` on ``[-support, support]`` with entries uniform in ``[-R/4, R/4]``."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        yield TailedSeq(-support, rng.uniform(-radius / 4, radius / 4, 2 * support + 1))


def check_inq_bounds(s: SchemeSpec, pr: Profile, gamma1: float, gamma_inf: float, trials: int = 100,
                     seed: int = RANDOM_SEED, cap: float = 1e6, op: BandedOp | None = None) -> CheckReport:
    """
    Ratios ``‖Q‖_{ℓ¹_{γ1+γ∞}} / (‖h‖_{ℓ¹_{γ1}} ‖h‖_{ℓ^∞_{γ∞}})`` and
    ``‖Q‖_{ℓ^∞_{2γ∞}} / ‖h‖²_{ℓ^∞_{γ∞}}`` over random ``h``; pass iff all are
    finite and below ``cap``.  ``detail['scaling']`` tracks ``‖Q(εh)‖_∞/ε²``.
    """
    if trials < 10:
        raise ValueError("trials must be >= 10")
    op = op or linearize(s, pr)
    R = state_radius(s, pr)
    r1, r2 = [], []
    first = None
    for h in random_perturbations(R, trials, seed):
        if first is None:
            first = h
        Q = q_remainder(s, pr, h, op, R)
        hi_ = weighted_norm(h, math.inf, gamma_inf)
        r1.append(weighted_norm(Q, 1, gamma1 + gamma_inf) / (weighted_norm(h, 1, gamma1) * hi_))
        r2.append(weighted_norm(Q, math.inf, 2 * gamma_inf) / hi_ ** 2)
    eps = [1.0, 1e-1, 1e-2, 1e-3]
    scaling = [q_remainder(s, pr, first * e, op, R).max_abs() / e ** 2 for e in eps]
    r1, r2 = np.array(r1), np.array(r2)
    ok = bool(np.all(np.isfinite(r1)) and np.all(np.isfinite(r2)) and max(r1.max(), r2.max()) < cap)
    return CheckReport("inq_bounds", ok, float(max(r1.max(), r2.max())),
                       {"max_ratio_l1": float(r1.max()), "max_ratio_linf": float(r2.max()),
                        "scaling_eps": eps, "scaling": scaling, "radius": R})


def insum_bound_check(a: float, b: float, c: float, n_max: int = 10**4,
                      require_h: bool = True) -> CheckReport:
    """
    ``sup_n (n+2)^c S(n)`` with ``S(n) = Σ_{m=0}^{⌊(n+1)/2⌋} (m+1)^{-a} (n+1-m)^{-b}``.

    The running sup is accepted as stabilized when its increase over the
    last decade of ``n`` is below ``1e-3`` relative, or when its increases
    over the four quarter-decades of that decade shrink geometrically
    (mean ratio ``<= 0.95``), so the remaining growth is summable.
    """
    if require_h and not cond_h(a, b, c):
        raise ConditionError(f"condition (H) violated by {(a, b, c)}")
    if n_max < 100:
        raise ValueError("n_max must be >= 100")
    inv_a = np.arange(1, n_max + 3, dtype=float) ** -a        # (m+1)^{-a}, m = 0..
    inv_b = np.concatenate([[0.0], np.arange(1, n_max + 2, dtype=float) ** -b])   # k^{-b}
    S = np.empty(n_max + 1)
    for n in range(n_max + 1):
        M = (n + 1) // 2
        m = np.arange(M + 1)
        S[n] = inv_a[:M + 1] @ inv_b[n + 1 - m]
    v = (np.arange(n_max + 1) + 2.0) ** c * S
    run = np.maximum.accumulate(v)
    # increments of the running sup over the four quarter-decades of the last decade
    marks = [int(round(n_max / 10 * 10 ** (k / 4))) for k in range(5)]
    inc = np.diff(run[marks])
    rel_last = (run[n_max] - run[marks[0]]) / run[marks[0]]
    if np.all(inc > 0):
        ratio = float((inc[-1] / inc[0]) ** (1 / 3))
    else:
        ratio = 0.0 if inc[-1] == 0 else math.inf
    ok = bool(rel_last < 1e-3 or ratio <= 0.95)
    return CheckReport("insum", ok, float(run[-1]),
                       {"triplet": (a, b, c), "relative_growth_last_decade": float(rel_last),
                        "quarter_decade_ratio": ratio, "argmax": int(np.argmax(v))})


@dataclass
class DuhamelResult:
    residuals: np.ndarray       # ‖h^n - reconstruction‖_∞ for n = 0..n_check
    delta: float

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())


def duhamel_check(s: SchemeSpec, fam: ProfileFamily, delta: float, h: TailedSeq, n_check: int,
                  op_ref: BandedOp | None = None) -> DuhamelResult:
    """
    Compare ``h^n = N^n(ū^δ + h) - ū^δ`` with the Duhamel expansion

        L^n h + Σ_{m<n} L^{n-1-m} [(L^δ - L) h^m + (Id - T) Q^δ(h^m)]

    evaluated by the Horner recursion ``y_{m+1} = L y_m + source_m``.
    """
    if n_check > 100:
        raise ValueError("n_check must be <= 100")
    pd = fam.profile(delta)
    op_ref = op_ref or linearize(s, fam.reference)
    op_d = linearize(s, pd) if delta != 0.0 else op_ref
    R = state_radius(s, pd)
    h_m = h
    y = h
    res = [0.0]
    u = pd.seq + h
    for _ in range(n_check):
        src = q_remainder(s, pd, h_m, op_d, R)
        src = src - shift(src)
        if delta != 0.0:
            src = src + op_difference_apply(op_d, op_ref, h_m)
        y = apply(op_ref, y) + src
        u = evolve(s, u)
        h_m = (u - pd.seq).canonical(0.0)
        res.append((h_m - y).max_abs())
    return DuhamelResult(np.array(res), float(delta))
