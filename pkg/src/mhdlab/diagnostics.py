"""
Norm time series, energy functionals and decay-rate fits.

Per-sample quantities are collected into :class:`NormSeries` rows keyed by
label (``u_h0``, ``b_h3``, ``energy_l2``, ...).  Time integrals use the
trapezoid rule on the sampled cadence without interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linear import Regime
from .spectral import SpectralField, grad_linf_bound, sobolev_norm

__all__ = [
    "NormSeries",
    "DecayFit",
    "default_a",
    "default_A",
    "q_functional",
    "f_functional",
    "state_row",
    "em_accumulator",
    "fit_decay",
    "weighted_sup",
    "fourier_l1_integral",
    "energy_identity_residuals",
    "s_label",
]


@dataclass
class NormSeries:
    """Sampled quantities; ``rows[i]`` belongs to ``times[i]``."""

    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def append(self, t: float, row: dict) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError(f"sample time {t} does not follow {self.times[-1]}")
        self.times.append(float(t))
        self.rows.append(dict(row))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    def column(self, label: str) -> np.ndarray:
        """Values of ``label``; NaN where a row lacks it."""
        return np.array([float(r.get(label, math.nan)) for r in self.rows])

    def labels(self) -> list:
        seen = {}
        for r in self.rows:
            for k in r:
                seen.setdefault(k, None)
        return list(seen)

    def truncate(self, t_max: float) -> NormSeries:
        keep = [i for i, t in enumerate(self.times) if t <= t_max]
        return NormSeries([self.times[i] for i in keep], [dict(self.rows[i]) for i in keep])


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    window: tuple
    rms_residual: float
    samples: int


def default_a(bnorm: float) -> float:
    return 1.0 + 0.5 * bnorm + 0.5 * bnorm**2


def default_A(bnorm: float) -> float:
    return 0.5 * (1.0 + bnorm + bnorm**2)


def _pair_sum(f: SpectralField, g: SpectralField, mult: np.ndarray) -> float:
    """``Re sum_k mult(k) f_hat(k) . conj(g_hat(k))`` over the full lattice."""
    lat = f.lattice
    per_k = np.sum(f.coeffs * np.conj(g.coeffs), axis=0) * mult
    return float(np.sum(lat.weights * per_k.real))


def _symbol(lat, bvec) -> np.ndarray:
    return np.tensordot(np.asarray(bvec, dtype=float), lat.kfloat, axes=1)


def _kpow(lat, p: float) -> np.ndarray:
    out = np.zeros(lat.spectral_shape)
    np.power(lat.k2, 0.5 * p, out=out, where=lat.nonzero)
    return out


def q_cross_terms(state, s: int) -> list:
    """The terms ``int (b.grad b) . Lambda^{2l-2} u dx`` for ``l = 0..s``."""
    lat = state.lattice
    a = _symbol(lat, state.bf.vector)
    out = []
    for l in range(int(s) + 1):
        mult = 1j * a * _kpow(lat, 2 * l - 2)
        out.append(_pair_sum(state.b, state.u, mult))
    return out


def q_functional(state, s: int, a: float | None = None) -> float:
    """Modified energy ``a ||(u,b)||_{H^s}^2 - sum_l int (b.grad b) . Lambda^{2l-2} u``.

    Args:
        state: solver state with mean-zero fields.
        s: nonnegative integer order.
        a: weight of the Sobolev energy; defaults to ``1 + |b|/2 + |b|^2/2``.

    Returns:
        The real value of the functional.
    """
    if s < 0 or int(s) != s:
        raise ValueError(f"order must be a nonnegative integer, got {s}")
    a = default_a(state.bf.norm) if a is None else a
    energy = sobolev_norm(state.u, s) ** 2 + sobolev_norm(state.b, s) ** 2
    return a * energy - sum(q_cross_terms(state, s))


def f_functional(state, A: float | None = None) -> float:
    """``A ||(u,b)||_{L^2}^2 - int (b.grad u) . Lambda^{-2} b dx``, A = (1+|b|+|b|^2)/2."""
    lat = state.lattice
    A = default_A(state.bf.norm) if A is None else A
    mult = 1j * _symbol(lat, state.bf.vector) * lat.inv_k2
    energy = sobolev_norm(state.u, 0) ** 2 + sobolev_norm(state.b, 0) ** 2
    return A * energy - _pair_sum(state.u, state.b, mult)


def state_row(state, s_list, m: int) -> dict:
    """All per-sample quantities of one state.

    The CSV columns are a subset; the remaining entries (dissipation terms,
    H^m energy, drifts) serve the energy checks and E_m accumulation.
    """
    lat = state.lattice
    u, b = state.u, state.b
    row = {}
    for s in s_list:
        row[f"u_h{s_label(s)}"] = sobolev_norm(u, s)
        row[f"b_h{s_label(s)}"] = sobolev_norm(b, s)
    row["u_gradlinf"] = grad_linf_bound(u)
    row["b_gradlinf"] = grad_linf_bound(b)
    row["energy_l2"] = sobolev_norm(u, 0) ** 2 + sobolev_norm(b, 0) ** 2
    row["q_m"] = q_functional(state, m)
    row["f_func"] = f_functional(state) if state.regime is Regime.RESISTIVE else math.nan
    # extra in-memory quantities
    wm = (1.0 + lat.k2) ** m * lat.weights
    pu = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    pb = np.sum(np.abs(b.coeffs) ** 2, axis=0)
    row["hm_sq"] = float(np.sum(wm * (pu + pb)))
    row["u_grad2"] = float(np.sum(lat.weights * lat.k2 * pu))
    row["b_grad2"] = float(np.sum(lat.weights * lat.k2 * pb))
    row["u_grad2_hm"] = float(np.sum(wm * lat.k2 * pu))
    row["b_grad2_hm"] = float(np.sum(wm * lat.k2 * pb))
    a2 = _symbol(lat, state.bf.vector) ** 2
    row["bdb_hm"] = float(np.sum(wm * a2 * lat.inv_k2 * pb))
    return row


def s_label(s) -> str:
    s = float(s)
    return str(int(s)) if s.is_integer() else repr(s)


def _trapezoid(y: np.ndarray, t: np.ndarray) -> float:
    return float(np.trapezoid(y, t)) if hasattr(np, "trapezoid") else float(np.trapz(y, t))


def em_accumulator(series: NormSeries, m: int, regime) -> float:
    """``E_m^2(T)``: sup of the H^m energy plus the regime's time-integrated dissipation.

    Viscous: ``int ||grad u||_{H^m}^2 + int ||Lambda^{-1}(b.grad b)||_{H^m}^2``.
    Resistive: ``int ||grad b||_{H^m}^2``.  The series must carry the rows
    produced by :func:`state_row` with the same ``m``.

    Raises:
        ValueError: with fewer than two samples.
    """
    if len(series) < 2:
        raise ValueError("E_m needs at least two samples")
    regime = Regime.parse(regime)
    t = series.t
    sup = float(np.max(series.column("hm_sq")))
    if regime is Regime.VISCOUS:
        dis = series.column("u_grad2_hm") + series.column("bdb_hm")
    else:
        dis = series.column("b_grad2_hm")
    return sup + _trapezoid(dis, t)


def _window(t: np.ndarray, window) -> np.ndarray:
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"window must have t_lo < t_hi, got {window}")
    return (t >= lo) & (t <= hi)


def fit_decay(series: NormSeries, label: str, window) -> DecayFit:
    """Least-squares slope of ``log value`` against ``log(1+t)`` over ``window``.

    Returns:
        DecayFit whose exponent is the negated slope.

    Raises:
        ValueError: if the window holds fewer than 8 samples or a nonpositive value.
    """
    t = series.t
    y = series.column(label)
    sel = _window(t, window)
    if sel.sum() < 8:
        raise ValueError(f"fit window {window} holds {int(sel.sum())} samples, need >= 8")
    ys = y[sel]
    if not np.all(ys > 0) or not np.all(np.isfinite(ys)):
        raise ValueError(f"nonpositive or non-finite {label} values in window {window}")
    x = np.log1p(t[sel])
    ly = np.log(ys)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - ly) ** 2)))
    return DecayFit(exponent=float(-slope), intercept=float(icpt), window=tuple(window),
                    rms_residual=rms, samples=int(sel.sum()))


def weighted_sup(series: NormSeries, label: str, rate: float, window=None) -> tuple[float, float]:
    """``(sup (1+t)^rate value(t), witness t)`` over the samples in ``window``."""
    t = series.t
    y = series.column(label)
    sel = np.ones(t.shape, bool) if window is None else _window(t, window)
    if not np.any(sel):
        raise ValueError("empty window")
    w = np.exp(rate * np.log1p(t[sel])) * y[sel]
    i = int(np.argmax(w))
    return float(w[i]), float(t[sel][i])


def fourier_l1_integral(times, values) -> float:
    """Trapezoid integral of sampled ``sum_k |k| |f_hat(t,k)|`` values."""
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    if times.size < 2:
        return 0.0
    return _trapezoid(values, times)


def _fd_weights(x: np.ndarray, x0: float) -> np.ndarray:
    """First-derivative weights at ``x0`` for nodes ``x`` (Vandermonde solve)."""
    h = x - x0
    scale = np.max(np.abs(h))
    V = np.vander(h / scale, increasing=True).T
    rhs = np.zeros(len(x))
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs) / scale


def energy_identity_residuals(series: NormSeries, regime) -> list[dict]:
    """Check ``dE/dt = -2 ||grad f||_{L^2}^2`` at interior samples.

    ``f`` is the dissipated field.  The derivative is the 5-point centered
    difference over neighbouring samples (4th order on nonuniform nodes).
    Each entry carries ``t``, ``residual``, ``tolerance`` and ``ok``.
    """
    regime = Regime.parse(regime)
    t = series.t
    E = series.column("energy_l2")
    g2 = series.column("u_grad2" if regime is Regime.VISCOUS else "b_grad2")
    out = []
    for i in range(2, len(t) - 2):
        x = t[i - 2:i + 3]
        dE = float(_fd_weights(x, t[i]) @ E[i - 2:i + 3])
        diss = 2.0 * g2[i]
        res = abs(dE + diss)
        tol = max(1e-4 * diss, 1e-10)
        out.append({"t": float(t[i]), "residual": res, "tolerance": tol, "ok": res <= tol})
    return out
