"""
Exact per-mode solution of the linearized perturbation system.

For each wavevector ``k != 0`` and each vector component, the pair
``(u_hat, b_hat)`` obeys ``psi' = -M psi`` with

    viscous:   M = [[|k|^2, -i a], [-i a, 0]]
    resistive: M = [[0, -i a], [-i a, |k|^2]]

where ``a = b . k``.  Both matrices have trace ``|k|^2`` and determinant
``a^2``, so they share the eigenvalues

    lambda_pm = (|k|^2 +- sqrt(|k|^4 - 4 a^2)) / 2.

The propagator is evaluated in projector form

    exp(-M t) = exp(-lambda_+ t) I + G(t) (lambda_+ I - M),
    G(t) = (exp(-lambda_- t) - exp(-lambda_+ t)) / (lambda_+ - lambda_-),

which has no singularity at the double root.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField

__all__ = [
    "Regime",
    "ModeSpectrum",
    "KernelValues",
    "mode_matrix",
    "mode_spectrum",
    "kernels",
    "mode_propagator",
    "propagator_entries",
    "evolve_linear",
    "theoretical_rate",
    "kernel_bound_sweep",
    "eigenvalues",
    "g_kernel",
    "log_kernels",
]

S1, S2, S3 = 1, 2, 3
REGION_NAMES = {S1: "S1", S2: "S2", S3: "S3"}
_DEGENERATE_RTOL = 1e-8
_SERIES_SWITCH = 1e-2


class Regime(str, enum.Enum):
    VISCOUS = "viscous"
    RESISTIVE = "resistive"

    @property
    def mu(self) -> int:
        return 1 if self is Regime.VISCOUS else 0

    @property
    def nu(self) -> int:
        return 1 - self.mu

    @classmethod
    def parse(cls, value) -> Regime:
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        aliases = {"viscous": cls.VISCOUS, "viscousonly": cls.VISCOUS, "mu1nu0": cls.VISCOUS,
                   "resistive": cls.RESISTIVE, "resistiveonly": cls.RESISTIVE, "mu0nu1": cls.RESISTIVE}
        if v not in aliases:
            raise ValueError(f"unknown regime {value!r}; use 'viscous' or 'resistive'")
        return aliases[v]


@dataclass(frozen=True)
class ModeSpectrum:
    k: tuple[int, ...]
    discriminant: float
    lambda_plus: complex
    lambda_minus: complex
    region: str
    degenerate: bool


@dataclass(frozen=True)
class KernelValues:
    G: complex
    K1_abs: float
    K2_abs: float
    K3: complex


def _k2_a(k, bvec) -> tuple[float, float]:
    k = np.asarray(k, dtype=float)
    k2 = float(k @ k)
    if k2 == 0:
        raise ValueError("the zero wavevector has no mode dynamics")
    return k2, float(np.asarray(bvec, dtype=float) @ k)


def eigenvalues(k2, a):
    """Vectorized ``(lambda_+, lambda_-, discriminant, region)``.

    ``lambda_-`` is taken from Vieta's relation ``lambda_+ lambda_- = a^2``
    off the oscillatory region, which keeps it accurate when ``a`` is small.
    """
    k2 = np.asarray(k2, dtype=float)
    a2 = np.asarray(a, dtype=float) ** 2
    disc = k2 * k2 - 4.0 * a2
    root = np.sqrt(disc.astype(complex))
    lp = 0.5 * (k2 + root)
    lm = np.where(disc <= 0, np.conj(lp), a2 / lp)
    region = np.where(disc <= 0, S1, np.where(disc <= 0.25 * k2 * k2, S2, S3))
    return lp, lm, disc, region


def mode_matrix(k, bvec, regime) -> np.ndarray:
    k2, a = _k2_a(k, bvec)
    regime = Regime.parse(regime)
    if regime is Regime.VISCOUS:
        return np.array([[k2, -1j * a], [-1j * a, 0.0]])
    return np.array([[0.0, -1j * a], [-1j * a, k2]])


def mode_spectrum(k, bvec) -> ModeSpectrum:
    k2, a = _k2_a(k, bvec)
    lp, lm, disc, region = eigenvalues(k2, a)
    lp, lm = complex(lp), complex(lm)
    degenerate = abs(lp - lm) < _DEGENERATE_RTOL * max(1.0, k2)
    return ModeSpectrum(
        k=tuple(int(v) for v in k),
        discriminant=float(disc),
        lambda_plus=lp,
        lambda_minus=lm,
        region=REGION_NAMES[int(region)],
        degenerate=bool(degenerate),
    )


def _sinhc(z):
    z2 = z * z
    return 1.0 + z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0 * (1.0 + z2 / 72.0)))


def g_kernel(lp, lm, t):
    """``(exp(-lm t) - exp(-lp t)) / (lp - lm)`` with its limit ``t exp(-lp t)``.

    When ``|(lp - lm) t / 2|`` is small the symmetric form
    ``t exp(-(lp+lm) t/2) sinh(z)/z`` is summed as a series instead of
    forming the cancelling difference.
    """
    lp, lm, t = np.broadcast_arrays(np.asarray(lp, complex), np.asarray(lm, complex),
                                    np.asarray(t, float))
    half = 0.5 * (lp - lm)
    z = half * t
    small = np.abs(z) < _SERIES_SWITCH
    out = np.empty(lp.shape, dtype=complex)
    if np.any(small):
        mean = 0.5 * (lp[small] + lm[small])
        out[small] = t[small] * np.exp(-mean * t[small]) * _sinhc(z[small])
    big = ~small
    if np.any(big):
        out[big] = (np.exp(-lm[big] * t[big]) - np.exp(-lp[big] * t[big])) / (lp[big] - lm[big])
    return out


def kernels(k, bvec, t: float) -> KernelValues:
    if t < 0:
        raise ValueError(f"kernel time must be nonnegative, got {t}")
    k2, a = _k2_a(k, bvec)
    lp, lm, _, _ = eigenvalues(k2, a)
    G = complex(g_kernel(lp, lm, t))
    lp = complex(lp)
    K1 = abs(G) * np.sqrt(abs(lp) ** 2 + a * a)
    K2 = K1 * abs(a) / abs(lp)
    return KernelValues(G=G, K1_abs=float(K1), K2_abs=float(K2), K3=complex(np.exp(-lp * t)))


def propagator_entries(k2, a, t, regime):
    """Vectorized entries ``(e11, e12, e21, e22)`` of ``exp(-M t)``."""
    regime = Regime.parse(regime)
    lp, lm, _, _ = eigenvalues(k2, a)
    G = g_kernel(lp, lm, t)
    K3 = np.exp(-lp * np.asarray(t, float))
    off = 1j * np.asarray(a, float) * G
    # lambda_+ I - M has diagonal (lambda_+ - |k|^2, lambda_+) = (-lambda_-, lambda_+) when viscous
    d_diss = K3 - lm * G
    d_free = K3 + lp * G
    if regime is Regime.VISCOUS:
        return d_diss, off, off, d_free
    return d_free, off, off, d_diss


def mode_propagator(k, bvec, t: float, regime) -> np.ndarray:
    if t < 0:
        raise ValueError(f"propagation time must be nonnegative, got {t}")
    k2, a = _k2_a(k, bvec)
    e11, e12, e21, e22 = (complex(v) for v in propagator_entries(k2, a, t, regime))
    return np.array([[e11, e12], [e21, e22]])


def lattice_symbols(lattice, bvec) -> tuple[np.ndarray, np.ndarray]:
    """``|k|^2`` and ``b . k`` on the stored half spectrum (k = 0 included as zero)."""
    a = np.tensordot(np.asarray(bvec, dtype=float), lattice.kfloat, axes=1)
    return lattice.k2, a


def lattice_propagator(lattice, bvec, t: float, regime):
    k2, a = lattice_symbols(lattice, bvec)
    safe = np.where(lattice.nonzero, k2, 1.0)
    entries = propagator_entries(safe, a, t, regime)
    # k = 0 carries no dynamics; it stays whatever it is (zero for admissible data)
    out = []
    for e, diag in zip(entries, (True, False, False, True)):
        e = np.where(lattice.nonzero, e, 1.0 if diag else 0.0)
        out.append(e)
    return tuple(out)


def apply_propagator(entries, u: np.ndarray, b: np.ndarray):
    e11, e12, e21, e22 = entries
    return e11 * u + e12 * b, e21 * u + e22 * b


def evolve_linear(U0: SpectralField, B0: SpectralField, t: float, bvec, regime):
    """Exact linear flow at time ``t``, applied per wavevector and component."""
    if U0.lattice != B0.lattice:
        raise ValueError("U0 and B0 live on different lattices")
    if t < 0:
        raise ValueError(f"evolution time must be nonnegative, got {t}")
    if t == 0:
        return U0.with_coeffs(U0.coeffs.copy()), B0.with_coeffs(B0.coeffs.copy())
    entries = lattice_propagator(U0.lattice, bvec, t, regime)
    u, b = apply_propagator(entries, U0.coeffs, B0.coeffs)
    return U0.with_coeffs(u), B0.with_coeffs(b)


def theoretical_rate(m: float, s: float, r: float, regime, component: str) -> float:
    """Algebraic decay exponent of ``||U||_{H^s}`` or ``||B||_{H^s}`` for data in H^m.

    The dissipated component (velocity when viscous, magnetic field when
    resistive) decays at ``1/2 + (m - s + 1) / (2 (1 + r))``; the other one at
    ``(m - s) / (2 (1 + r))``.
    """
    if s > m:
        raise ValueError(f"s = {s} exceeds m = {m}")
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    regime = Regime.parse(regime)
    if component not in ("velocity", "magnetic"):
        raise ValueError(f"component must be 'velocity' or 'magnetic', got {component!r}")
    dissipated = "velocity" if regime is Regime.VISCOUS else "magnetic"
    if component == dissipated:
        return 0.5 + (m - s + 1) / (2 * (1 + r))
    return (m - s) / (2 * (1 + r))


def log_kernels(k2, a, t):
    """``(log|K1|, log|K2|, log|K3|)`` evaluated without underflow.

    Returns ``-inf`` where a kernel vanishes exactly (e.g. a zero of the
    oscillatory factor in region S1).
    """
    k2, a, t = np.broadcast_arrays(np.asarray(k2, float), np.asarray(a, float),
                                   np.asarray(t, float))
    lp, lm, disc, region = eigenvalues(k2, a)
    log_g = np.empty(k2.shape)
    osc = disc <= 0
    with np.errstate(divide="ignore"):
        if np.any(osc):
            sigma = np.sqrt(-disc[osc])
            theta = 0.5 * sigma * t[osc]
            log_g[osc] = (np.log(t[osc]) - 0.5 * k2[osc] * t[osc]
                          + np.log(np.abs(np.sinc(theta / np.pi))))
        real = ~osc
        if np.any(real):
            delta = np.sqrt(disc[real])
            log_g[real] = (-lm[real].real * t[real]
                           + np.log(-np.expm1(-delta * t[real])) - np.log(delta))
        abs_lp = np.abs(lp)
        log_k1 = log_g + 0.5 * np.log(abs_lp**2 + a * a)
        log_k2 = log_k1 + np.log(np.abs(a)) - np.log(abs_lp)
    log_k3 = -lp.real * t
    return log_k1, log_k2, log_k3, region


def _ball(n: int, K: int) -> np.ndarray:
    r = np.arange(-K, K + 1)
    g = np.stack(np.meshgrid(*([r] * n), indexing="ij"), axis=-1).reshape(-1, n)
    k2 = np.sum(g * g, axis=1)
    return g[(k2 > 0) & (k2 <= K * K)]


INEQUALITIES = (
    ("K1_low", "|K1| <= C exp(-|k|^2 t / 8) on S1 u S2"),
    ("K2_low", "|K2| <= C exp(-|k|^2 t / 8) on S1 u S2"),
    ("K1_high", "|K1| <= C exp(-(b.k)^2 t / |k|^2) on S3"),
    ("K2_high", "|K2| <= C |b.k| / |k|^2 exp(-(b.k)^2 t / |k|^2) on S3"),
    ("K3_all", "|K3| <= C exp(-|k|^2 t / 2) on all k != 0"),
)


def kernel_bound_sweep(bvec, K_ball: int, t_grid) -> list[dict]:
    """Smallest empirical constants in the region-wise kernel bounds.

    Every ``(k, t)`` with ``0 < |k| <= K_ball`` and ``t`` in ``t_grid`` is
    evaluated in log space; each row reports ``C = max |kernel| / bound``,
    the witness ``(k, t)``, the number of modes tested and whether the
    region was empty.
    """
    bvec = np.asarray(bvec, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if K_ball < 1:
        raise ValueError("K_ball must be >= 1")
    if t_grid.size == 0 or np.any(t_grid <= 0) or not np.all(np.isfinite(t_grid)):
        raise ValueError("t_grid must be finite and positive")
    pts = _ball(bvec.size, K_ball)
    k2 = np.sum(pts.astype(float) ** 2, axis=1)
    a = pts.astype(float) @ bvec
    K2g, Tg = np.meshgrid(k2, t_grid, indexing="ij")
    Ag = np.broadcast_to(a[:, None], K2g.shape)
    log_k1, log_k2, log_k3, region = log_kernels(K2g, Ag, Tg)
    low = region <= S2
    high = region == S3
    allk = np.ones_like(low)
    with np.errstate(divide="ignore"):
        decay_high = -(Ag**2) * Tg / K2g
        specs = {
            "K1_low": (log_k1, -K2g * Tg / 8, low),
            "K2_low": (log_k2, -K2g * Tg / 8, low),
            "K1_high": (log_k1, decay_high, high),
            "K2_high": (log_k2, np.log(np.abs(Ag)) - np.log(K2g) + decay_high, high),
            "K3_all": (log_k3, -K2g * Tg / 2, allk),
        }
    rows = []
    for name, desc in INEQUALITIES:
        logv, logb, mask = specs[name]
        nmodes = int(np.count_nonzero(mask[:, 0]))
        if nmodes == 0:
            rows.append({"inequality": name, "description": desc, "C": None,
                         "witness_k": None, "witness_t": None, "modes": 0, "vacuous": True})
            continue
        ratio = np.where(mask, logv - logb, -np.inf)
        idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        rows.append({
            "inequality": name,
            "description": desc,
            "C": float(np.exp(ratio[idx])),
            "witness_k": tuple(int(v) for v in pts[idx[0]]),
            "witness_t": float(t_grid[idx[1]]),
            "modes": nmodes,
            "vacuous": False,
        })
    return rows
