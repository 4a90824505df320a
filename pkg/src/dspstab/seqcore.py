"""
Tailed sequences and weighted sequence norms.

A :class:`TailedSeq` is a doubly infinite real sequence stored as a finite
window plus two constant tails.  Shock profiles carry the shock states as
tails; perturbations, Green columns and eigenvectors have zero tails and are
called *compact*.

The module also hosts small numerical helpers shared by the other modules:
decay-exponent fitting with a round-off floor, exponential tail fits, and the
worker-count policy.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

TRIM_TOL = 1e-14


class NonSummableError(ValueError):
    """Raised when a norm or mass is requested for a sequence with nonzero tails."""


@dataclass(frozen=True)
class TailedSeq:
    """Doubly infinite sequence: ``values`` on ``[offset, offset+len)``, constants outside."""

    offset: int
    values: np.ndarray
    left_tail: float = 0.0
    right_tail: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("sequence values must be finite")
        if not (math.isfinite(self.left_tail) and math.isfinite(self.right_tail)):
            raise ValueError("tails must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "left_tail", float(self.left_tail))
        object.__setattr__(self, "right_tail", float(self.right_tail))

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls) -> "TailedSeq":
        return cls(0, np.zeros(0))

    @classmethod
    def dirac(cls, j0: int, weight: float = 1.0) -> "TailedSeq":
        return cls(j0, np.array([weight]))

    @classmethod
    def constant(cls, c: float) -> "TailedSeq":
        return cls(0, np.zeros(0), c, c)

    @classmethod
    def from_dict(cls, entries: dict) -> "TailedSeq":
        """Compact sequence from ``{j: value}``; unlisted indices are zero."""
        if not entries:
            return cls.zeros()
        lo, hi = min(entries), max(entries)
        v = np.zeros(hi - lo + 1)
        for j, x in entries.items():
            v[j - lo] = x
        return cls(lo, v)

    # -- access -------------------------------------------------------
    @property
    def end(self) -> int:
        return self.offset + len(self.values)

    @property
    def is_compact(self) -> bool:
        return self.left_tail == 0.0 and self.right_tail == 0.0

    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.end)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, j: int) -> float:
        if j < self.offset:
            return self.left_tail
        if j >= self.end:
            return self.right_tail
        return float(self.values[j - self.offset])

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Dense copy of entries ``lo..hi-1``, tails included where needed."""
        n = hi - lo
        out = np.empty(max(n, 0))
        if n <= 0:
            return out
        j = np.arange(lo, hi)
        out[j < self.offset] = self.left_tail
        out[j >= self.end] = self.right_tail
        a, b = max(lo, self.offset), min(hi, self.end)
        if a < b:
            out[a - lo:b - lo] = self.values[a - self.offset:b - self.offset]
        return out

    def support(self) -> tuple[int, int] | None:
        """Smallest ``(lo, hi)`` with nonzero entries in ``[lo, hi]``; compact sequences only."""
        nz = np.flatnonzero(self.values)
        if not self.is_compact:
            raise NonSummableError("support of a sequence with nonzero tails is unbounded")
        if nz.size == 0:
            return None
        return self.offset + int(nz[0]), self.offset + int(nz[-1])

    # -- canonical form -----------------------------------------------
    def canonical(self, tol: float = TRIM_TOL) -> "TailedSeq":
        """Trim window entries within ``tol`` of the tail on their side."""
        v = self.values
        left = np.abs(v - self.left_tail) > tol
        right = np.abs(v - self.right_tail) > tol
        lo = int(np.argmax(left)) if left.any() else len(v)
        hi = len(v) - int(np.argmax(right[::-1])) if right.any() else 0
        if hi <= lo:
            # window is tail on both sides: keep an empty window at the switch point
            return TailedSeq(self.offset + hi, np.zeros(0), self.left_tail, self.right_tail)
        return TailedSeq(self.offset + lo, v[lo:hi], self.left_tail, self.right_tail)

    # -- arithmetic ---------------------------------------------------
    def _binary(self, other: "TailedSeq", op) -> "TailedSeq":
        lo = min(self.offset, other.offset)
        hi = max(self.end, other.end)
        return TailedSeq(lo, op(self.window(lo, hi), other.window(lo, hi)),
                         op(self.left_tail, other.left_tail), op(self.right_tail, other.right_tail))

    def __add__(self, other: "TailedSeq") -> "TailedSeq":
        return self._binary(other, np.add)

    def __sub__(self, other: "TailedSeq") -> "TailedSeq":
        return self._binary(other, np.subtract)

    def __mul__(self, c: float) -> "TailedSeq":
        return TailedSeq(self.offset, self.values * c, self.left_tail * c, self.right_tail * c)

    __rmul__ = __mul__

    def __neg__(self) -> "TailedSeq":
        return self * -1.0

    def max_abs(self) -> float:
        m = max(abs(self.left_tail), abs(self.right_tail))
        return max(m, float(np.max(np.abs(self.values)))) if len(self.values) else m


@dataclass(frozen=True)
class WeightedNormSpec:
    """Norm of ``ℓ^r_γ``: weight ``(1+|j|)^γ``, ``r`` in {1, inf}."""

    r: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.r not in (1, math.inf):
            raise ValueError(f"r must be 1 or inf, got {self.r}")
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")

    @property
    def label(self) -> str:
        return f"l{'1' if self.r == 1 else 'inf'}_{self.gamma:g}"


L1 = WeightedNormSpec(1, 0.0)
LINF = WeightedNormSpec(math.inf, 0.0)


def _require_compact(h: TailedSeq, what: str) -> None:
    if not h.is_compact:
        raise NonSummableError(f"non-summable sequence: {what} needs zero tails "
                               f"(got {h.left_tail}, {h.right_tail})")


def weights(j: np.ndarray, gamma: float) -> np.ndarray:
    return (1.0 + np.abs(j)) ** gamma


def weighted_norm(h: TailedSeq, spec: WeightedNormSpec | float, gamma: float | None = None) -> float:
    """``‖h‖_{ℓ^r_γ}``; ``spec`` is a :class:`WeightedNormSpec` or the exponent ``r``."""
    if not isinstance(spec, WeightedNormSpec):
        spec = WeightedNormSpec(spec, 0.0 if gamma is None else gamma)
    _require_compact(h, "weighted_norm")
    if len(h.values) == 0:
        return 0.0
    w = np.abs(h.values) * weights(h.indices(), spec.gamma) if spec.gamma else np.abs(h.values)
    return float(w.sum() if spec.r == 1 else w.max())


def mass(h: TailedSeq) -> float:
    """``Σ_j h_j`` for compact ``h``."""
    _require_compact(h, "mass")
    return float(math.fsum(h.values))


def shift(h: TailedSeq) -> TailedSeq:
    """``(shift h)_j = h_{j+1}``."""
    return TailedSeq(h.offset - 1, h.values, h.left_tail, h.right_tail)


def unshift(h: TailedSeq) -> TailedSeq:
    """Inverse of :func:`shift`."""
    return TailedSeq(h.offset + 1, h.values, h.left_tail, h.right_tail)


def diff_seq(a: TailedSeq, b: TailedSeq, tol: float = TRIM_TOL) -> TailedSeq:
    """Pointwise ``a - b``; entries within ``tol`` of the tail difference snap to it."""
    d = a - b
    v = d.values.copy()
    j = d.indices()
    # snap near-tail entries on each side of the midpoint to that side's tail
    mid = d.offset + len(v) // 2
    for side, tail in ((j < mid, d.left_tail), (j >= mid, d.right_tail)):
        near = side & (np.abs(v - tail) <= tol)
        v[near] = tail
    return TailedSeq(d.offset, v, d.left_tail, d.right_tail).canonical(tol)


# -- CSV -----------------------------------------------------------------

def write_seq_csv(path, h: TailedSeq) -> None:
    """``j,value`` rows with a ``# left_tail=... right_tail=...`` header comment."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# left_tail={h.left_tail!r} right_tail={h.right_tail!r}\n")
        fh.write("j,value\n")
        for j, v in zip(h.indices(), h.values):
            fh.write(f"{j},{float(v)!r}\n")


def read_seq_csv(path) -> TailedSeq:
    left = right = 0.0
    js, vs = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "left_tail":
                        left = float(val)
                    elif key == "right_tail":
                        right = float(val)
                continue
            if line.startswith("j,"):
                continue
            j, v = line.split(",")
            js.append(int(j))
            vs.append(float(v))
    if not js:
        return TailedSeq(0, np.zeros(0), left, right)
    js = np.asarray(js)
    if np.any(np.diff(js) != 1):
        raise ValueError(f"{path}: indices must be consecutive")
    return TailedSeq(int(js[0]), np.asarray(vs), left, right)


# -- fitting helpers ---------------------------------------------------------

@dataclass
class DecayFit:
    """Power-law decay fit ``value ~ C n^{-exponent}``."""

    exponent: float
    n_used: np.ndarray = field(repr=False)
    values_used: np.ndarray = field(repr=False)
    floor_hit: bool = False
    note: str = ""


def fit_decay_exponent(n, values, floor: float = 0.0, drop_frac: float = 0.1) -> DecayFit:
    """
    Least-squares decay exponent of ``log values`` against ``log n``.

    The first ``drop_frac`` of the points is discarded as transient.  Points
    below ``floor`` carry no information beyond "smaller than the floor": the
    fit keeps the points above it plus the first sub-floor point clipped to
    the floor, which can only underestimate the true decay.  If the series is
    already below the floor at the first retained point the decay is faster
    than any power on the window and the exponent is reported as ``inf``.
    """
    n = np.asarray(n, dtype=float)
    v = np.asarray(values, dtype=float)
    k0 = int(math.floor(drop_frac * len(n)))
    n, v = n[k0:], v[k0:]
    if len(n) < 2:
        raise ValueError("need at least two points after dropping the transient")
    if np.any(n <= 0):
        raise ValueError("decay fits need n > 0")
    below = np.flatnonzero(v <= floor)
    floor_hit = below.size > 0
    if floor_hit:
        first = int(below[0])
        if first == 0:
            return DecayFit(math.inf, n[:1], v[:1], True, "below floor on the whole window")
        n_use = n[:first + 1]
        v_use = np.concatenate([v[:first], [floor]])
    else:
        n_use, v_use = n, v
    slope = np.polyfit(np.log(n_use), np.log(v_use), 1)[0]
    return DecayFit(float(-slope), n_use, v_use, floor_hit)


@dataclass
class TailFit:
    """Exponential fit ``|r_j| ~ C e^{-rate |j|}`` with a power-law comparison."""

    rate: float
    log_c: float
    n_points: int
    rss_exp: float
    rss_pow: float

    @property
    def exponential(self) -> bool:
        return self.rate > 1e-3 and self.rss_exp <= self.rss_pow


def fit_exponential_tail(dist: np.ndarray, resid: np.ndarray) -> TailFit:
    """Fit ``log resid`` linearly in ``dist`` and in ``log dist`` and keep both residuals."""
    dist = np.asarray(dist, dtype=float)
    lr = np.log(np.asarray(resid, dtype=float))
    ce, res_e, *_ = np.polyfit(dist, lr, 1, full=True)
    cp, res_p, *_ = np.polyfit(np.log(dist), lr, 1, full=True)
    rss_e = float(res_e[0]) if len(res_e) else 0.0
    rss_p = float(res_p[0]) if len(res_p) else 0.0
    return TailFit(float(-ce[0]), float(ce[1]), len(dist), rss_e, rss_p)


# -- parallelism -------------------------------------------------------------

def max_workers(default: int | None = None) -> int:
    """Worker cap from ``DSPSTAB_THREADS`` (falls back to the CPU count)."""
    env = os.environ.get("DSPSTAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"DSPSTAB_THREADS must be an integer, got {env!r}") from None
    return default or (os.cpu_count() or 1)


@dataclass
class CheckReport:
    """Outcome of one verification: name, verdict, headline value and details."""

    name: str
    passed: bool
    value: float = math.nan
    detail: dict = field(default_factory=dict)
    message: str = ""

    def __bool__(self) -> bool:
        return bool(self.passed)
