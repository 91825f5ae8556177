"""
Finite-ball certification of non-resonant background fields.

A background vector ``b`` with exponent ``r`` is certified over the ball
``0 < |k| <= K`` by the constant

    c_est = min |b . k| * |k|^r,

which is the best ``c`` for which ``|b . k| >= c / |k|^r`` holds on that
ball.  Nothing is claimed beyond the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .spectral import Lattice, SpectralField, directional_derivative, sobolev_norm

__all__ = [
    "BackgroundField",
    "estimate_constant",
    "check_condition",
    "candidate_fields",
    "certify",
    "certification_table",
    "resolve_bfield",
    "poincare_constant",
    "poincare_check",
    "compensated_dot",
]

GOLDEN = (1 + math.sqrt(5)) / 2

_CATALOG = {
    2: {"golden": (1.0, GOLDEN), "sqrt2": (1.0, math.sqrt(2.0))},
    3: {"cubic": (1.0, 2 ** (1 / 3), 2 ** (2 / 3))},
}


@dataclass(frozen=True)
class BackgroundField:
    vector: tuple[float, ...]
    r: float
    c_est: float | None = None
    K_cert: int | None = None
    argmin_k: tuple[int, ...] | None = None
    name: str | None = None

    def __post_init__(self):
        n = len(self.vector)
        if not self.r > n - 1:
            raise ValueError(f"exponent r must exceed n - 1 = {n - 1}, got {self.r}")

    @property
    def n(self) -> int:
        return len(self.vector)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=float)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.array))

    @property
    def certified(self) -> bool:
        return self.c_est is not None and self.c_est > 0


def _split(a: np.ndarray):
    # Dekker split into two 26-bit halves
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def compensated_dot(bvec, k: np.ndarray) -> np.ndarray:
    """``|b . k|`` for integer rows ``k`` (shape ``(m, n)``) in double-double.

    Each ``b_i`` is split so that ``hi * k_i`` and ``lo * k_i`` are exact for
    ``|k_i| < 2**26``; the partial products are then accumulated with
    error-free transformations and rounded once at the end.
    """
    bvec = np.asarray(bvec, dtype=float)
    kf = np.asarray(k, dtype=float)
    s = np.zeros(kf.shape[0])
    e = np.zeros(kf.shape[0])
    for i in range(bvec.size):
        hi, lo = _split(np.float64(bvec[i]))
        for part in (hi, lo):
            s, err = _two_sum(s, part * kf[:, i])
            e += err
    return np.abs(s + e)


def _ball_slices(n: int, K: int):
    """Lattice points of ``0 < |k| <= K`` grouped by ``k_0``, visited as 0, -1, 1, -2, 2, ..."""
    for k0 in [0] + [v for j in range(1, K + 1) for v in (-j, j)]:
        rest = K * K - k0 * k0
        lim = math.isqrt(rest)
        a = np.arange(-lim, lim + 1)
        if n == 2:
            pts = np.stack([np.full_like(a, k0), a], axis=1)
        else:
            g1, g2 = np.meshgrid(a, a, indexing="ij")
            keep = g1 * g1 + g2 * g2 <= rest
            pts = np.stack([np.full(keep.sum(), k0), g1[keep], g2[keep]], axis=1)
        if k0 == 0:
            pts = pts[np.any(pts != 0, axis=1)]
        yield k0, pts


def _order_key(k) -> tuple:
    return (sum(int(v) * int(v) for v in k), tuple(int(v) for v in k))


def _first(pts: np.ndarray) -> tuple:
    """Earliest row in (|k|^2, lexicographic) order."""
    k2 = np.sum(pts.astype(np.int64) ** 2, axis=1)
    order = np.lexsort(tuple(pts.T[::-1]) + (k2,))
    return tuple(int(v) for v in pts[order[0]])


def estimate_constant(bvec, r: float, K: int) -> tuple[float, tuple[int, ...]]:
    """Exact minimum of ``|b . k| |k|^r`` over ``0 < |k| <= K`` and its first minimizer.

    Ties resolve to the first wavevector in (|k|^2, lexicographic) order.  A
    resonant direction returns ``c_est = 0`` with its shortest resonant
    wavevector; the scan stops as soon as no shorter one can remain.
    """
    bvec = tuple(float(v) for v in bvec)
    n = len(bvec)
    if K < 1:
        raise ValueError(f"certification radius must be >= 1, got {K}")
    if not r > n - 1:
        raise ValueError(f"exponent r must exceed n - 1 = {n - 1}, got {r}")
    best, arg = math.inf, None
    zero = None
    for k0, pts in _ball_slices(n, K):
        if zero is not None and k0 * k0 > _order_key(zero)[0]:
            break
        if pts.shape[0] == 0:
            continue
        dot = compensated_dot(bvec, pts)
        hits = dot == 0.0
        if np.any(hits):
            cand = _first(pts[hits])
            if zero is None or _order_key(cand) < _order_key(zero):
                zero = cand
            continue
        if zero is not None:
            continue
        k2 = np.sum(pts.astype(float) ** 2, axis=1)
        vals = dot * k2 ** (0.5 * r)
        v = vals.min()
        cand = _first(pts[vals == v])
        if v < best or (v == best and _order_key(cand) < _order_key(arg)):
            best, arg = float(v), cand
    if zero is not None:
        return 0.0, zero
    return best, arg


def check_condition(bvec, r: float, c: float, K: int) -> bool:
    """Whether ``|b . k| >= c / |k|^r`` for every ``0 < |k| <= K``."""
    if c <= 0:
        return True
    c_est, _ = estimate_constant(bvec, r, K)
    return c_est >= c


def candidate_fields(n: int) -> list[BackgroundField]:
    """Badly approximable catalog vectors with ``r = n - 1 + 0.1``, uncertified."""
    if n not in _CATALOG:
        raise ValueError(f"no catalog for dimension {n}")
    r = round(n - 1 + 0.1, 12)
    return [BackgroundField(vector=v, r=r, name=name) for name, v in _CATALOG[n].items()]


def certify(bf: BackgroundField, K: int) -> BackgroundField:
    c, arg = estimate_constant(bf.vector, bf.r, K)
    return replace(bf, c_est=c, K_cert=K, argmin_k=arg)


def certification_table(bvec, r: float, radii) -> list[dict]:
    """Rows ``{K, c_est, argmin_k, rel_drop}``; ``rel_drop`` compares with the previous radius."""
    rows, prev = [], None
    for K in radii:
        c, arg = estimate_constant(bvec, r, int(K))
        drop = None if prev in (None, 0.0) else (prev - c) / prev
        rows.append({"K": int(K), "c_est": c, "argmin_k": arg, "rel_drop": drop})
        prev = c
    return rows


def resolve_bfield(choice, n: int, r: float | None = None) -> BackgroundField:
    """Catalog name (``"golden"``, ``"sqrt2"``, ``"cubic"``) or an explicit vector."""
    if isinstance(choice, str) and choice.strip() in _CATALOG.get(n, {}):
        name = choice.strip()
        vec = _CATALOG[n][name]
    else:
        if isinstance(choice, str):
            vec = tuple(float(v) for v in choice.replace(",", " ").split())
        else:
            vec = tuple(float(v) for v in choice)
        name = None
        if len(vec) != n:
            raise ValueError(f"background vector {vec} does not have n = {n} components")
    r = round(n - 1 + 0.1, 12) if r is None else r
    return BackgroundField(vector=vec, r=r, name=name)


def poincare_constant(lattice: Lattice, bf: BackgroundField, s: float) -> tuple[float, tuple[int, ...]]:
    """Largest per-mode ratio ``(1+|k|^2)^{s/2} / ((1+|k|^2)^{(s+r)/2} |b . k|)``.

    The maximum runs over retained ``k != 0``; it is the sharp constant in
    ``||f||_{H^s} <= c ||b.grad f||_{H^{s+r}}`` for fields on this lattice.
    """
    mask = lattice.retained & lattice.nonzero
    pts = lattice.wavevectors[:, mask].T
    dot = compensated_dot(bf.vector, pts)
    if np.any(dot == 0):
        raise ValueError("background field is resonant on this lattice")
    one_k2 = 1.0 + np.sum(pts.astype(float) ** 2, axis=1)
    ratio = one_k2 ** (0.5 * s) / (one_k2 ** (0.5 * (s + bf.r)) * dot)
    i = int(np.argmax(ratio))
    return float(ratio[i]), tuple(int(v) for v in pts[i])


def poincare_check(f: SpectralField, bf: BackgroundField, s: float) -> tuple[float, float, float]:
    """``(||f||_{H^s}, ||b.grad f||_{H^{s+r}}, ratio)``; ratio is 0 for the zero field."""
    if not f.is_mean_zero():
        raise ValueError("Poincare inequality needs a mean-zero field")
    lhs = sobolev_norm(f, s)
    rhs = sobolev_norm(directional_derivative(f, bf.vector), s + bf.r)
    if lhs == 0.0:
        return 0.0, rhs, 0.0
    return lhs, rhs, lhs / rhs
