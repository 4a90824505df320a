"""
Linearization of a scheme about a profile and the limiting symbols.

The linearized operator acts by ``(L h)_j = Σ_{k=-p}^{q} a_{j,k} h_{j+k}`` with

    b_{j,k} = nu * ∂_k F(ū_{j-p}, ..., ū_{j+q-1}),      k = -p..q-1
    a_{j,-p} = b_{j,-p},   a_{j,q} = -b_{j+1,q-1},
    a_{j,k}  = δ_{k,0} + b_{j,k} - b_{j+1,k-1}          otherwise.

Each column of ``a`` sums to one (``Σ_k a_{i-k,k} = 1``), which is the
conservation of mass under ``L``.  Row sums equal ``1 + S_j - S_{j+1}``
with ``S_j = Σ_k b_{j,k}`` and are one only where the profile is constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .profile import Profile
from .scheme import SchemeSpec, check_states
from .seqcore import CheckReport, TailedSeq, mass

FD_STEP = 1e-6


# -- flux derivatives ------------------------------------------------------------

def flux_gradient_fd(s: SchemeSpec, states: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """
    Partial derivatives of ``F`` at stacked arguments ``(p+q, m)`` by central
    differences with one Richardson step; returns ``(p+q, m)``.
    """
    states = np.asarray(states, dtype=float)
    out = np.empty_like(states)
    for k in range(states.shape[0]):
        def central(step):
            up, dn = states.copy(), states.copy()
            up[k] += step
            dn[k] -= step
            return (s.flux_at(up) - s.flux_at(dn)) / (2 * step)
        out[k] = (4 * central(h / 2) - central(h)) / 3
    return out


def flux_gradient(s: SchemeSpec, states: np.ndarray, use_exact: bool = True) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    if use_exact and s.flux_gradient is not None:
        g = s.flux_gradient(s.nu, *states)
        return np.array([np.broadcast_to(np.asarray(gk, dtype=float), states.shape[1:]) for gk in g])
    return flux_gradient_fd(s, states)


# -- banded operators ------------------------------------------------------------

@dataclass(frozen=True)
class BandedOp:
    """
    Banded operator with varying coefficients on rows ``lo..lo+n-1`` and
    constant limits outside.  Column ``c`` of ``a_var`` holds ``k = c - p``;
    column ``c`` of ``b_var`` holds ``k = c - p`` for ``k < q``.
    """

    p: int
    q: int
    lo: int
    a_var: np.ndarray
    a_left: np.ndarray
    a_right: np.ndarray
    b_var: np.ndarray | None = None
    b_left: np.ndarray | None = None
    b_right: np.ndarray | None = None

    @property
    def hi(self) -> int:
        return self.lo + self.a_var.shape[0]

    @property
    def width(self) -> int:
        return self.p + self.q + 1

    def _rows(self, var, left, right, lo: int, hi: int) -> np.ndarray:
        n = hi - lo
        out = np.empty((max(n, 0), var.shape[1] if var.ndim == 2 else len(left)))
        if n <= 0:
            return out
        j = np.arange(lo, hi)
        out[j < self.lo] = left
        out[j >= self.hi] = right
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a < b:
            out[a - lo:b - lo] = var[a - self.lo:b - self.lo]
        return out

    def rows(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients ``a_{j,k}`` for ``j = lo..hi-1`` as an ``(hi-lo, p+q+1)`` array."""
        return self._rows(self.a_var, self.a_left, self.a_right, lo, hi)

    def b_rows(self, lo: int, hi: int) -> np.ndarray:
        if self.b_var is None:
            raise ValueError("operator has no b coefficients")
        return self._rows(self.b_var, self.b_left, self.b_right, lo, hi)

    def row_sums(self, lo: int | None = None, hi: int | None = None) -> np.ndarray:
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return self.rows(lo, hi).sum(axis=1)

    def column_sums(self, lo: int | None = None, hi: int | None = None) -> np.ndarray:
        """``Σ_k a_{i-k,k}`` for ``i = lo..hi-1``."""
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        A = self.rows(lo - self.q, hi + self.p)
        i = np.arange(lo, hi)
        out = np.zeros(hi - lo)
        for c in range(self.width):
            k = c - self.p
            out += A[i - k - (lo - self.q), c]
        return out

    def dense(self, lo: int, hi: int) -> np.ndarray:
        """Truncated matrix on ``lo..hi-1`` with zero (Dirichlet) data outside."""
        n = hi - lo
        A = self.rows(lo, hi)
        M = np.zeros((n, n))
        r = np.arange(n)
        for c in range(self.width):
            k = c - self.p
            ok = (r + k >= 0) & (r + k < n)
            M[r[ok], r[ok] + k] = A[ok, c]
        return M


def _assemble(p: int, q: int, b: np.ndarray) -> np.ndarray:
    """a rows ``0..m-2`` from b rows ``0..m-1`` (row ``i`` of ``a`` needs b rows ``i``, ``i+1``)."""
    m = b.shape[0]
    a = np.zeros((m - 1, p + q + 1))
    for c in range(p + q + 1):
        k = c - p
        if k == 0:
            a[:, c] += 1.0
        if k < q:
            a[:, c] += b[:-1, k + p]
        if k > -p:
            a[:, c] -= b[1:, k - 1 + p]
    return a


def _b_at_states(s: SchemeSpec, u: TailedSeq, lo: int, hi: int, use_exact: bool) -> np.ndarray:
    """``b_{j,k}`` for ``j = lo..hi-1`` as ``(hi-lo, p+q)``."""
    p, q = s.p, s.q
    dense = u.window(lo - p, hi + q - 1)
    n = hi - lo
    states = np.array([dense[i:i + n] for i in range(p + q)])
    return s.nu * flux_gradient(s, states, use_exact).T


def linearize_at(s: SchemeSpec, u: TailedSeq, use_exact: bool = True) -> BandedOp:
    """Linearization about an arbitrary state sequence (profile or not)."""
    check_states(s, u.values, u.offset)
    p, q = s.p, s.q
    lo, hi = u.offset - q, u.end + p          # rows whose coefficients may differ from the limits
    b = _b_at_states(s, u, lo, hi + 1, use_exact)
    a = _assemble(p, q, b)
    bl = _b_at_states(s, TailedSeq.constant(u.left_tail), 0, 2, use_exact)
    br = _b_at_states(s, TailedSeq.constant(u.right_tail), 0, 2, use_exact)
    return BandedOp(p, q, lo, a, _assemble(p, q, bl)[0], _assemble(p, q, br)[0],
                    b[:-1], bl[0], br[0])


def linearize(s: SchemeSpec, pr: Profile, use_exact: bool = True, tol: float | None = None) -> BandedOp:
    """Linearized operator ``L^δ`` about a converged profile."""
    if tol is not None and pr.residual > tol:
        raise ValueError(f"profile not converged (residual {pr.residual:.3e} > {tol:.3e})")
    return linearize_at(s, pr.seq, use_exact)


def apply(op: BandedOp, h: TailedSeq) -> TailedSeq:
    """``(L h)_j = Σ_k a_{j,k} h_{j+k}``; the window widens by ``q`` left and ``p`` right."""
    if not h.is_compact:
        raise ValueError("apply needs a compact sequence")
    p, q = op.p, op.q
    lo, hi = h.offset - q, h.end + p
    n = hi - lo
    if len(h.values) == 0:
        return TailedSeq.zeros()
    A = op.rows(lo, hi)
    x = h.window(lo - p, hi + q)
    out = np.zeros(n)
    for c in range(op.width):
        out += A[:, c] * x[c:c + n]
    return TailedSeq(lo, out)


def op_difference_apply(opA: BandedOp, opB: BandedOp, h: TailedSeq, mass_tol: float = 1e-10) -> TailedSeq:
    """``(A - B) h`` from the coefficient differences; the result has zero mass."""
    if (opA.p, opA.q) != (opB.p, opB.q):
        raise ValueError(f"stencil mismatch: {(opA.p, opA.q)} vs {(opB.p, opB.q)}")
    if not h.is_compact:
        raise ValueError("op_difference_apply needs a compact sequence")
    if len(h.values) == 0:
        return TailedSeq.zeros()
    p, q = opA.p, opA.q
    lo, hi = h.offset - q, h.end + p
    n = hi - lo
    dA = opA.rows(lo, hi) - opB.rows(lo, hi)
    x = h.window(lo - p, hi + q)
    out = np.zeros(n)
    for c in range(opA.width):
        out += dA[:, c] * x[c:c + n]
    res = TailedSeq(lo, out)
    m = mass(res)
    if abs(m) > mass_tol * (1.0 + float(np.abs(h.values).sum())):
        raise ArithmeticError(f"(A - B) h has mass {m:.3e}; operators do not share conservation")
    return res


# -- limiting symbols -------------------------------------------------------------

@dataclass
class SymbolData:
    """Limiting symbol ``F(κ) = Σ_k a_k κ^k`` on one side of the shock."""

    side: str
    coeffs: np.ndarray            # a_k for k = -p..q
    p: int
    q: int
    alpha: float
    mu: int | None = None
    beta: complex | None = None
    dissipative: bool | None = None
    unit_roots: tuple = ()
    symbol: Callable | None = field(default=None, repr=False)
    alpha_check: float = math.nan   # -F'(1) from the coefficients

    def __call__(self, kappa):
        kappa = np.asarray(kappa, dtype=complex)
        if self.symbol is not None:
            return self.symbol(kappa)
        out = np.zeros_like(kappa)
        for c, a in enumerate(self.coeffs):
            out = out + a * kappa ** (c - self.p)
        return out

    def on_circle(self, xi) -> np.ndarray:
        """``F(e^{iξ})``; computed as ``1 + Σ a_k (e^{ikξ} - 1)`` when coefficients are known."""
        xi = np.asarray(xi, dtype=float)
        if self.symbol is not None:
            return self.symbol(np.exp(1j * xi))
        z = np.zeros(xi.shape, dtype=complex)
        for c, a in enumerate(self.coeffs):
            k = c - self.p
            if k:
                z += a * np.expm1(1j * k * xi)
        return 1.0 + (self.coeffs.sum() - 1.0) + z

    def log_on_circle(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.symbol is not None:
            return np.log(self.on_circle(xi))
        z = np.zeros(xi.shape, dtype=complex) + (self.coeffs.sum() - 1.0)
        for c, a in enumerate(self.coeffs):
            k = c - self.p
            if k:
                z += a * np.expm1(1j * k * xi)
        return np.log1p(z)


def limit_symbol(s: SchemeSpec, state: float, side: str, use_exact: bool = True) -> SymbolData:
    """Symbol of the constant-coefficient operator at ``state``; ``alpha = nu f'(state)``."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    check_states(s, np.array([state]))
    b = _b_at_states(s, TailedSeq.constant(state), 0, 2, use_exact)
    a = _assemble(s.p, s.q, b)[0]
    alpha = float(s.nu * s.flux_derivative(state))
    k = np.arange(-s.p, s.q + 1)
    alpha_check = float(-(k * a).sum())
    return SymbolData(side, a, s.p, s.q, alpha, alpha_check=alpha_check)


def symbol_from_coeffs(coeffs, p: int, q: int, side: str = "right") -> SymbolData:
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) != p + q + 1:
        raise ValueError("need p+q+1 coefficients")
    k = np.arange(-p, q + 1)
    alpha = float(-(k * coeffs).sum())
    return SymbolData(side, coeffs, p, q, alpha, alpha_check=alpha)


def check_dissipativity(sym: SymbolData, n_grid: int = 4096, arc: float = 1e-6) -> CheckReport:
    """``|F(e^{iξ})| < 1 - 1e-12`` on a uniform grid outside ``|ξ| < arc``, and ``F(1) = 1``."""
    if n_grid < 64:
        raise ValueError("n_grid must be >= 64")
    xi = np.linspace(-np.pi, np.pi, n_grid, endpoint=False)
    xi = xi[np.abs(xi) >= arc]
    mod = np.abs(sym.on_circle(xi))
    at_one = abs(complex(sym(np.array(1.0 + 0j))) - 1.0)
    mx = float(mod.max())
    ok = mx < 1 - 1e-12 and at_one <= 1e-12
    return CheckReport("dissipativity", ok, mx, {"F_at_1_error": at_one,
                                                 "worst_xi": float(xi[int(np.argmax(mod))])})


class DiffusionFitError(ValueError):
    """No diffusive order up to ``mu_max``."""


def extract_diffusion(sym: SymbolData, mu_max: int = 4, xi_range=(1e-3, 1e-1), n_xi: int = 40,
                      poly_degree: int = 5) -> tuple[int, complex]:
    """
    Smallest ``μ`` with ``log F(e^{iξ}) + iαξ = -β ξ^{2μ} + O(ξ^{2μ+1})``.

    For each candidate ``μ`` the ratio ``g(ξ)/ξ^{2μ}`` is fitted by a low
    degree polynomial in ``ξ``; ``-β`` is its intercept.  A candidate is
    accepted when the fit is accurate and the intercept is not negligible
    against the ratio itself.
    """
    xi = np.geomspace(*xi_range, n_xi)
    g = sym.log_on_circle(xi) + 1j * sym.alpha * xi
    for mu in range(1, mu_max + 1):
        r = g / xi ** (2 * mu)
        # rounding in g is uniform, so its effect on r grows like ξ^{-2μ}: weight accordingly
        w = (xi / xi[-1]) ** (2 * mu)
        V = np.vander(xi, poly_degree + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(V.astype(complex) * w[:, None], r * w, rcond=None)
        fit_err = float(np.max(np.abs(V @ coef - r) * w))
        scale = float(np.max(np.abs(r)))
        c0 = complex(coef[0])
        if abs(c0) <= 1e-3 * scale or fit_err > 1e-3 * abs(c0):
            continue
        beta = -c0
        if beta.real <= 0:
            raise DiffusionFitError(f"fitted beta {beta} has non-positive real part at mu={mu}")
        return mu, beta
    raise DiffusionFitError(f"no diffusive order found up to mu_max={mu_max}")


def check_hyp_inv(op: BandedOp, sym_left: SymbolData | None = None, sym_right: SymbolData | None = None,
                  tol: float = 1e-12) -> CheckReport:
    """Extreme band coefficients ``a_{j,-p}``, ``a_{j,q}`` and their limits are nonzero."""
    vals = {"left_limit": min(abs(op.a_left[0]), abs(op.a_left[-1])),
            "right_limit": min(abs(op.a_right[0]), abs(op.a_right[-1]))}
    for name, sym in (("sym_left", sym_left), ("sym_right", sym_right)):
        if sym is not None:
            vals[name] = min(abs(sym.coeffs[0]), abs(sym.coeffs[-1]))
    bad_j = None
    if op.a_var.shape[0]:
        edge = np.minimum(np.abs(op.a_var[:, 0]), np.abs(op.a_var[:, -1]))
        k = int(np.argmin(edge))
        vals["window"] = float(edge[k])
        if edge[k] <= tol:
            bad_j = op.lo + k
    worst = min(vals.values())
    ok = worst > tol
    msg = "" if ok else (f"vanishing band edge at j={bad_j}" if bad_j is not None
                         else "vanishing band edge in the limit coefficients")
    return CheckReport("hyp_inv", ok, float(worst), {"min_by_part": vals, "index": bad_j}, msg)


def count_unit_roots(sym: SymbolData) -> np.ndarray:
    """Roots of ``κ^p (F(κ) - 1)`` (degree ``p+q``) from companion-matrix eigenvalues."""
    c = np.array(sym.coeffs, dtype=float)          # powers 0..p+q of κ^p F(κ)
    c[sym.p] -= 1.0
    while len(c) > 1 and c[-1] == 0:
        c = c[:-1]
    if len(c) < 2:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c[::-1])
    return np.sort_complex(roots.astype(complex))


def check_unit_roots(sym: SymbolData, dist_tol: float = 1e-8) -> CheckReport:
    """``p+q`` pairwise distinct roots of ``F(κ) = 1``, ``κ = 1`` among them."""
    roots = count_unit_roots(sym)
    n = len(roots)
    c = np.array(sym.coeffs, dtype=float)
    c[sym.p] -= 1.0
    dP = np.polyder(c[::-1])
    scale = float(np.abs(c).max())
    mind = min((abs(roots[i] - roots[k]) for i in range(n) for k in range(i + 1, n)), default=math.inf)
    # a multiple root shows up as a vanishing derivative of the polynomial at that root
    min_dP = float(np.min(np.abs(np.polyval(dP, roots)))) / scale if n else math.inf
    has_one = bool(n and np.min(np.abs(roots - 1)) <= 1e-8)
    distinct = mind > dist_tol and min_dP > dist_tol
    ok = n == sym.p + sym.q and distinct and has_one
    return CheckReport("unit_roots", ok, float(mind),
                       {"roots": [complex(r) for r in roots], "count": n, "has_one": has_one,
                        "distinct": distinct, "min_derivative": min_dP})


def analyze_symbol(sym: SymbolData, n_grid: int = 4096, mu_max: int = 4) -> SymbolData:
    """Return ``sym`` with dissipativity, ``μ``, ``β`` and unit roots filled in."""
    dis = check_dissipativity(sym, n_grid)
    mu = beta = None
    if dis.passed:
        try:
            mu, beta = extract_diffusion(sym, mu_max)
        except DiffusionFitError:
            pass
    roots = tuple(count_unit_roots(sym)) if sym.symbol is None else ()
    return replace(sym, dissipative=dis.passed, mu=mu, beta=beta, unit_roots=roots)


# -- spectral probe ---------------------------------------------------------------

class ProbeStagnationError(RuntimeError):
    """Power iteration collapsed or stopped producing usable iterates."""


def spectral_probe(op: BandedOp, V: TailedSeq | None, half_width: int = 200, iters: int = 4000,
                   seed: int = 0x5EED) -> float:
    """
    Dominant modulus of the truncated operator on the complement of ``span{V}``.

    The truncation is ``[-half_width, half_width]`` with zero data outside.
    Each iterate is deflated by ``x - (Σ x) V``, the projection onto
    zero-mass sequences along ``V``.  The estimate is the geometric mean
    growth factor over the last quarter of the iterations.
    """
    lo, hi = -half_width, half_width + 1
    M = op.dense(lo, hi)
    v = None
    if V is not None:
        v = V.window(lo, hi)
        if abs(v.sum()) < 1e-12:
            raise ValueError("V has zero mass; cannot deflate")
        v = v / v.sum()
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(hi - lo)

    def deflate(y):
        return y - y.sum() * v if v is not None else y

    x = deflate(x)
    x /= np.linalg.norm(x)
    logs = np.empty(iters)
    for it in range(iters):
        y = deflate(M @ x)
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0.0:
            if nrm == 0.0:
                return 0.0
            raise ProbeStagnationError(f"power iteration broke down at step {it}")
        logs[it] = math.log(nrm)
        x = y / nrm
    tail = logs[-max(iters // 4, 1):]
    return float(math.exp(tail.mean()))
