"""
Green's function of the linearized operator and generalized Gaussians.

``G(n, j0, ·) = L^n δ_{j0}`` is computed by recursion.  Its large-time
behaviour is compared with ``E_{2μ}(β; x) V`` where ``V`` spans the kernel
of ``Id - L`` (normalized to unit mass) and ``E_{2μ}`` is the tail integral of
the generalized Gaussian

    H_{2μ}(β; x) = (1/2π) ∫ e^{ixu} e^{-β u^{2μ}} du.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .linop import BandedOp, SymbolData, apply
from .profile import ProfileFamily
from .seqcore import (CheckReport, DecayFit, TailedSeq, WeightedNormSpec, diff_seq,
                      fit_decay_exponent, fit_exponential_tail, mass, weighted_norm)

DELTA0 = 0.0625
RESIDUAL_FLOOR = 1e-13      # below this, unit-mass residuals are rounding noise
QUAD_EPSABS = 1e-13


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


# -- kernels -------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    mu: int
    beta: complex

    def __post_init__(self):
        if int(self.mu) != self.mu or self.mu < 1:
            raise ValueError(f"mu must be a positive integer, got {self.mu}")
        if not complex(self.beta).real > 0:
            raise ValueError(f"beta must have positive real part, got {self.beta}")

    @property
    def cutoff(self) -> float:
        """``U`` with ``exp(-Re(β) U^{2μ}) = 1e-16``."""
        return (-math.log(1e-16) / complex(self.beta).real) ** (1.0 / (2 * self.mu))


def _quad(fun, a, b, **kw) -> float:
    val, err, *info = integrate.quad(fun, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12,
                                     limit=500, full_output=1, **kw)
    if err > 1e-10:
        raise QuadratureError(f"quadrature error estimate {err:.2e} exceeds 1e-10")
    return val


def _damping(k: KernelSpec, m: int):
    b = complex(k.beta)
    two_mu = 2 * k.mu

    def re(u):
        return u ** m * math.exp(-b.real * u ** two_mu) * math.cos(b.imag * u ** two_mu)
    return re


def _h_quad(k: KernelSpec, x: float, m: int) -> float:
    # (1/π) ∫_0^U u^m cos(xu + mπ/2) e^{-β u^{2μ}} du, real part
    g = _damping(k, m)
    U = k.cutoff
    cm, sm = round(math.cos(m * math.pi / 2)), round(math.sin(m * math.pi / 2))
    total = 0.0
    if cm:
        total += cm * (_quad(g, 0.0, U, weight="cos", wvar=x) if x else _quad(g, 0.0, U))
    if sm and x:
        total -= sm * _quad(g, 0.0, U, weight="sin", wvar=x)
    return total / math.pi


def h2mu(k: KernelSpec, x, deriv: int = 0, method: str = "auto"):
    """``∂_x^m H_{2μ}(β; x)``; closed form for ``μ = 1, m = 0`` unless ``method='quad'``."""
    if method not in ("auto", "closed", "quad"):
        raise ValueError(f"unknown method {method!r}")
    closed = k.mu == 1 and deriv == 0 and method != "quad"
    if method == "closed" and not (k.mu == 1 and deriv == 0):
        raise ValueError("closed form only for mu=1, deriv=0")
    xs = np.asarray(x, dtype=float)
    if closed:
        b = complex(k.beta)
        out = np.real(np.exp(-xs ** 2 / (4 * b)) / np.sqrt(4 * np.pi * b))
    else:
        out = np.vectorize(lambda t: _h_quad(k, float(t), deriv), otypes=[float])(xs)
    return float(out) if out.ndim == 0 else out


def _e_quad(k: KernelSpec, x: float) -> float:
    # E(x) = 1/2 - (1/π) ∫_0^U sin(xu)/u e^{-β u^{2μ}} du
    if x == 0.0:
        return 0.5
    g = _damping(k, 0)
    U = k.cutoff
    val = _quad(lambda u: x * np.sinc(x * u / math.pi) * g(u), 0.0, U)
    return 0.5 - val / math.pi


def e2mu(k: KernelSpec, x, method: str = "auto"):
    """``E_{2μ}(β; x) = ∫_x^∞ H_{2μ}(β; y) dy``; ``½ erfc(x / 2√β)`` for ``μ = 1``."""
    if method not in ("auto", "closed", "quad"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and k.mu != 1:
        raise ValueError("closed form only for mu=1")
    xs = np.asarray(x, dtype=float)
    if k.mu == 1 and method != "quad":
        b = complex(k.beta)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.real(0.5 * special.erfc(xs / (2 * np.sqrt(b))))
        out = np.where(np.isposinf(xs), 0.0, np.where(np.isneginf(xs), 1.0, out))
    else:
        def one(t):
            if math.isinf(t):
                return 0.0 if t > 0 else 1.0
            return _e_quad(k, float(t))
        out = np.vectorize(one, otypes=[float])(xs)
    return float(out) if out.ndim == 0 else out


def _envelope_points(x: np.ndarray, signed: np.ndarray) -> np.ndarray:
    """Indices describing the upper envelope of ``|signed|``: local maxima if it oscillates."""
    if np.any(np.diff(np.sign(signed[signed != 0])) != 0):
        a = np.abs(signed)
        peaks = [i for i in range(1, len(a) - 1) if a[i] >= a[i - 1] and a[i] >= a[i + 1]]
        return np.array(peaks, dtype=int)
    return np.arange(len(x))


def kernel_bound_check(k: KernelSpec, m: int, x_grid, kind: str = "H",
                       value_floor: float = 1e-12) -> CheckReport:
    """
    Fit ``|value(x)| <= C exp(-c |x|^ω)`` with ``ω = 2μ/(2μ-1)`` on ``x_grid``.

    ``kind`` selects ``∂^m H`` ('H'), ``E`` for ``x > 0`` ('E+') or
    ``1 - E`` for ``x < 0`` ('E-').  The report carries the fitted ``c`` for
    the theoretical ``ω``, and a free fit of ``ω`` for comparison.  It passes
    when ``c > 0`` and the fitted bound covers every point up to a factor
    ``e`` (one unit in log).
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    x = np.abs(np.asarray(x_grid, dtype=float))
    x = np.unique(x[x > 0])
    if kind == "H":
        signed = np.asarray(h2mu(k, x, m), dtype=float)
    elif kind == "E+":
        signed = np.asarray(e2mu(k, x), dtype=float)
    elif kind == "E-":
        signed = 1.0 - np.asarray(e2mu(k, -x), dtype=float)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    idx = _envelope_points(x, signed)
    xe, ve = x[idx], np.abs(signed[idx])
    keep = ve > value_floor
    xe, ve = xe[keep], ve[keep]
    omega = 2 * k.mu / (2 * k.mu - 1)
    if len(xe) < 3:
        return CheckReport(f"kernel_bound_{kind}{m}", False, math.nan, {"omega": omega},
                           "too few points above the value floor")
    lv = np.log(ve)
    slope, icpt = np.polyfit(xe ** omega, lv, 1)
    c = -slope
    excess = float(np.max(lv - (icpt - c * xe ** omega)))
    try:
        (a_f, c_f, w_f), _ = optimize.curve_fit(lambda t, a, cc, w: a - cc * t ** w, xe, lv,
                                                p0=(icpt, max(c, 1e-3), omega), maxfev=20000)
    except RuntimeError:
        w_f = math.nan
    ok = c > 0 and excess <= 1.0
    return CheckReport(f"kernel_bound_{kind}{m}", bool(ok), float(c),
                       {"omega": omega, "omega_fit": float(w_f), "C": math.exp(icpt + max(excess, 0.0)),
                        "log_excess": excess, "n_points": int(len(xe))})


# -- Green's function ----------------------------------------------------------------

class Propagator:
    """Repeated application of a banded operator on a fixed window with zero data outside."""

    def __init__(self, op: BandedOp, lo: int, hi: int):
        self.op, self.lo, self.hi = op, lo, hi
        self.A = op.rows(lo, hi)

    def step(self, x: np.ndarray) -> np.ndarray:
        p, q, n = self.op.p, self.op.q, self.hi - self.lo
        xp = np.concatenate([np.zeros(p), x, np.zeros(q)])
        out = self.A[:, 0] * xp[0:n]
        for c in range(1, self.op.width):
            out = out + self.A[:, c] * xp[c:c + n]
        return out

    def seq(self, x: np.ndarray) -> TailedSeq:
        return TailedSeq(self.lo, x)

    def embed(self, h: TailedSeq) -> np.ndarray:
        if not h.is_compact:
            raise ValueError("propagation needs a compact sequence")
        if len(h.values) and (h.offset < self.lo or h.end > self.hi):
            raise ValueError("sequence does not fit in the propagation window")
        return h.window(self.lo, self.hi)


def propagate(op: BandedOp, h: TailedSeq, n_list):
    """Yield ``(n, L^n h)`` for the sorted ``n_list`` from one march."""
    n_list = sorted(int(n) for n in n_list)
    if not n_list:
        return
    if n_list[0] < 0:
        raise ValueError("n must be >= 0")
    N = n_list[-1]
    lo = (h.offset if len(h.values) else 0) - N * op.q
    hi = (h.end if len(h.values) else 1) + N * op.p
    P = Propagator(op, lo, hi)
    x = P.embed(h)
    n = 0
    for target in n_list:
        while n < target:
            x = P.step(x)
            n += 1
        yield n, P.seq(x)


@dataclass
class GreenColumn:
    n: int
    j0: int
    seq: TailedSeq

    @property
    def mass_error(self) -> float:
        return abs(mass(self.seq) - 1.0)


def _clip_support(g: TailedSeq, n: int, j0: int, op: BandedOp) -> TailedSeq:
    lo, hi = j0 - n * op.q, j0 + n * op.p + 1
    v = g.window(g.offset, g.end)
    j = g.indices()
    outside = (j < lo) | (j >= hi)
    if np.any(v[outside] != 0.0):
        raise AssertionError("Green column leaked outside its finite support")
    return TailedSeq(lo, g.window(lo, hi))


def green_columns(op: BandedOp, j0: int, n_list):
    """Yield :class:`GreenColumn` for each ``n`` in ``n_list`` (one march)."""
    for n, g in propagate(op, TailedSeq.dirac(j0), n_list):
        yield GreenColumn(n, j0, _clip_support(g, n, j0, op))


def green_column(op: BandedOp, n: int, j0: int) -> GreenColumn:
    """``G(n, j0, ·)``, supported on ``j0 - n q .. j0 + n p``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return next(green_columns(op, j0, [n]))


# -- eigenvector ---------------------------------------------------------------------

@dataclass
class EigenV:
    seq: TailedSeq
    normalization: float
    decay_rate: float
    fd_seq: TailedSeq = field(repr=False, default=None)
    cosine: float = math.nan


def eigen_residual(op: BandedOp, V: TailedSeq) -> float:
    """``‖L V - V‖_∞``."""
    return (apply(op, V) - V).max_abs()


def _unit_mass(x: np.ndarray, what: str) -> np.ndarray:
    s = x.sum()
    if abs(s) <= 1e-8 * np.abs(x).sum():
        raise ArithmeticError(f"{what}: sum of V vanishes; cannot normalize")
    return x / s


def _decay_rate(V: TailedSeq, floor: float = RESIDUAL_FLOOR) -> float:
    j = V.indices()
    a = np.abs(V.values)
    rates = []
    for side in (j >= 3, j <= -3):
        keep = side & (a > floor)
        if keep.sum() >= 4:
            rates.append(fit_exponential_tail(np.abs(j[keep]).astype(float), a[keep]).rate)
    return min(rates) if rates else math.inf


def eigenvector_v(op: BandedOp, fam: ProfileFamily, half_width: int = 60, delta0: float = DELTA0,
                  shift: float = 1e-10, cos_tol: float = 1e-6, inverse_steps: int = 3) -> EigenV:
    """
    Unit-mass ``V`` with ``L V = V``.

    Two constructions are compared: the centered difference
    ``(ū^{δ0} - ū^{-δ0}) / 2δ0`` of the profile family and inverse iteration
    on the truncated ``(1 + shift) Id - L``.  They must agree in direction to
    cosine similarity ``> 1 - cos_tol``.  The inverse-iteration vector is the
    one returned because it is an eigenvector to rounding accuracy; the
    difference quotient carries an ``O(δ0²)`` error.
    """
    up, dn = fam.profile(delta0), fam.profile(-delta0)
    fd = diff_seq(up.seq, dn.seq) * (1.0 / (2 * delta0))
    lo, hi = -half_width, half_width + 1
    x_fd = _unit_mass(fd.window(lo, hi), "finite difference")
    M = op.dense(lo, hi)
    A = (1.0 + shift) * np.eye(hi - lo) - M
    x = x_fd.copy()
    for _ in range(inverse_steps):
        x = np.linalg.solve(A, x)
        x /= np.linalg.norm(x)
    x = _unit_mass(x, "inverse iteration")
    cosine = float(x @ x_fd / (np.linalg.norm(x) * np.linalg.norm(x_fd)))
    if cosine <= 1 - cos_tol:
        raise ArithmeticError(f"V constructions disagree: cosine similarity {cosine:.10f}")
    V = TailedSeq(lo, x).canonical()
    return EigenV(V, float(V.values.sum()), _decay_rate(V), TailedSeq(lo, x_fd).canonical(), cosine)


# -- decompositions ------------------------------------------------------------------

def _pick_side(sym, j0: int) -> SymbolData:
    if isinstance(sym, SymbolData):
        return sym
    left, right = sym
    return right if j0 >= 0 else left


def e_factor(sym: SymbolData, n: int, j0: int) -> float:
    """``E_{2μ}(β+; (nα+ + j0)/n^{1/2μ})`` for ``j0 >= 0``, mirrored with ``α-, β-`` for ``j0 < 0``."""
    if sym.mu is None or sym.beta is None:
        raise ValueError("symbol has no diffusion data; run analyze_symbol first")
    k = KernelSpec(sym.mu, complex(sym.beta))
    num = n * sym.alpha + j0 if j0 >= 0 else -n * sym.alpha - j0
    if n == 0:
        x = math.copysign(math.inf, num) if num else 0.0
    else:
        x = num / n ** (1.0 / (2 * sym.mu))
    return float(e2mu(k, x))


@dataclass
class DecompositionTable:
    j0: int
    n: np.ndarray
    e_factor: np.ndarray
    linf: np.ndarray
    l1: np.ndarray
    fit: DecayFit
    mass_error: np.ndarray
    columns: list = field(default_factory=list, repr=False)

    @property
    def exponent(self) -> float:
        return self.fit.exponent


def decomposition_residual(op: BandedOp, V, sym, n_list, j0: int, floor: float = RESIDUAL_FLOOR,
                           drop_frac: float = 0.1, keep_columns: bool = False) -> DecompositionTable:
    """
    ``R(n) = G(n, j0, ·) - E(n) V`` for each ``n`` with the decay exponent of
    ``‖R(n)‖_∞`` (fit rule of :func:`fit_decay_exponent`).
    """
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 4:
        raise ValueError("n_list needs at least 4 entries")
    Vs = V.seq if isinstance(V, EigenV) else V
    side = _pick_side(sym, j0)
    ef, li, l1, me, cols = [], [], [], [], []
    for col in green_columns(op, j0, n_list):
        e = e_factor(side, col.n, j0)
        R = col.seq - Vs * e
        ef.append(e)
        li.append(R.max_abs())
        l1.append(float(np.abs(R.values).sum()))
        me.append(col.mass_error)
        if keep_columns:
            cols.append((col, e))
    n = np.array(n_list)
    li = np.array(li)
    pos = n > 0
    fit = fit_decay_exponent(n[pos], li[pos], floor, drop_frac)
    return DecompositionTable(j0, n, np.array(ef), li, np.array(l1), fit, np.array(me), cols)


@dataclass
class DecayTable:
    n: np.ndarray
    series: dict                 # label -> values over n
    fits: dict                   # label -> DecayFit
    targets: dict = field(default_factory=dict)
    mass: np.ndarray | None = None


def derivative_decay(op: BandedOp, j0: int, n_list, floor: float = RESIDUAL_FLOOR,
                     drop_frac: float = 0.1) -> DecayTable:
    """``L^n (Id - T) δ_{j0} = G(n, j0, ·) - G(n, j0-1, ·)`` and its ℓ¹ decay exponent."""
    n_list = sorted(int(n) for n in n_list)
    dip = TailedSeq(j0 - 1, np.array([-1.0, 1.0]))
    n_out, l1, ms = [], [], []
    for n, d in propagate(op, dip, n_list):
        n_out.append(n)
        l1.append(float(np.abs(d.values).sum()))
        ms.append(mass(d))
    n = np.array(n_out)
    l1 = np.array(l1)
    pos = n > 0
    fit = fit_decay_exponent(n[pos], l1[pos], floor, drop_frac) if pos.sum() >= 2 else None
    return DecayTable(n, {"l1": l1}, {"l1": fit}, {"l1": 1.0 / 2}, np.array(ms))


def semigroup_decay(op: BandedOp, h: TailedSeq, norms, n_max: int, Gamma: float | None = None,
                    mu: int = 1, zero_mass: bool = False, floor_rel: float = RESIDUAL_FLOOR,
                    drop_frac: float = 0.1) -> DecayTable:
    """
    ``‖L^n h‖`` for ``n = 0..n_max`` in each requested weighted norm, with
    decay exponents and the targets ``Γ-γ`` (ℓ¹) and ``Γ-γ+min(γ, 1/2μ)`` (ℓ^∞).
    """
    if zero_mass and abs(mass(h)) > 1e-10:
        raise ValueError(f"zero-mass estimate requested but mass(h) = {mass(h):.3e}")
    norms = [nm if isinstance(nm, WeightedNormSpec) else WeightedNormSpec(*nm) for nm in norms]
    ns = list(range(n_max + 1))
    series = {nm.label: np.empty(n_max + 1) for nm in norms}
    for n, x in propagate(op, h, ns):
        for nm in norms:
            series[nm.label][n] = weighted_norm(x, nm)
    n = np.array(ns)
    fits, targets = {}, {}
    for nm in norms:
        v = series[nm.label]
        floor = floor_rel * max(v[0], 1e-300)
        fits[nm.label] = fit_decay_exponent(n[1:], v[1:], floor, drop_frac) if n_max >= 2 else None
        if Gamma is not None:
            extra = min(nm.gamma, 1.0 / (2 * mu)) if nm.r != 1 else 0.0
            targets[nm.label] = Gamma - nm.gamma + extra
    return DecayTable(n, series, fits, targets)


def green_csv_rows(op: BandedOp, n: int, j0: int, V=None, sym=None):
    """Rows ``(n, j0, j, green, leading_term, residual)``; the last two need ``V`` and ``sym``."""
    col = green_column(op, n, j0)
    rows = []
    if V is None or sym is None:
        for j, g in zip(col.seq.indices(), col.seq.values):
            rows.append((n, j0, int(j), float(g), None, None))
        return rows
    Vs = V.seq if isinstance(V, EigenV) else V
    e = e_factor(_pick_side(sym, j0), n, j0)
    lo, hi = min(col.seq.offset, Vs.offset), max(col.seq.end, Vs.end)
    G, L = col.seq.window(lo, hi), Vs.window(lo, hi) * e
    for j, g, l in zip(range(lo, hi), G, L):
        rows.append((n, j0, j, float(g), float(l), float(g - l)))
    return rows
