"""
Pseudo-spectral integration of the nonlinear perturbation system.

The state ``psi = (u_hat, b_hat)`` obeys, mode by mode,

    psi' = -M psi - (N1, N2),
    N1 = P(u.grad u - b.grad b),   N2 = u.grad b - b.grad u,

and is advanced with the integrating-factor (Lawson) RK4 scheme, whose
linear part uses the exact propagator from :mod:`mhdlab.linear`.  Quadratic
products are formed on the grid in divergence form with the 2/3 rule.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .diophantine import BackgroundField
from .linear import Regime, apply_propagator, evolve_linear, lattice_propagator
from .spectral import (
    SpectralField,
    divergence_magnitude,
    hermitian_residual,
    leray_project,
    sup_bound,
    symmetrize,
)

__all__ = [
    "State",
    "NonlinearTerms",
    "StepControl",
    "Drift",
    "InstabilityError",
    "nonlinear_rhs",
    "step",
    "cfl_dt",
    "enforce_invariants",
]


class InstabilityError(RuntimeError):
    """A step produced non-finite coefficients.

    When raised from :func:`advance`, ``state`` holds the last valid state.
    """

    state = None


@dataclass(frozen=True)
class State:
    u: SpectralField
    b: SpectralField
    t: float
    regime: Regime
    bf: BackgroundField

    def __post_init__(self):
        if self.u.lattice != self.b.lattice:
            raise ValueError("u and b live on different lattices")
        object.__setattr__(self, "regime", Regime.parse(self.regime))

    @property
    def lattice(self):
        return self.u.lattice


@dataclass(frozen=True)
class NonlinearTerms:
    N1: SpectralField
    N2: SpectralField


@dataclass(frozen=True)
class StepControl:
    cfl_number: float = 0.4
    max_dt: float = 0.05
    dt: float | None = None

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.cfl_number > 0 or not self.max_dt > 0:
            raise ValueError("cfl_number and max_dt must be positive")


@dataclass
class Drift:
    """Invariant violations found before enforcement (absolute magnitudes)."""

    mean: float = 0.0
    divergence: float = 0.0
    hermitian: float = 0.0

    def merge(self, other: Drift) -> Drift:
        return Drift(max(self.mean, other.mean), max(self.divergence, other.divergence),
                     max(self.hermitian, other.hermitian))


@dataclass
class _Workspace:
    """Index bookkeeping for the product terms of one lattice."""

    sym: list = field(default_factory=list)
    anti: list = field(default_factory=list)


_WORKSPACES: dict = {}


def _workspace(n: int) -> _Workspace:
    if n not in _WORKSPACES:
        pairs = list(itertools.combinations_with_replacement(range(n), 2))
        _WORKSPACES[n] = _Workspace(sym=pairs, anti=list(itertools.combinations(range(n), 2)))
    return _WORKSPACES[n]


def _rhs_arrays(lat, uc: np.ndarray, bc: np.ndarray):
    """Coefficients of ``N1`` and ``N2`` for raw coefficient arrays."""
    n = lat.n
    phys = sfft.irfftn(np.concatenate([uc, bc]), s=lat.grid_shape, axes=lat.axes, norm="forward")
    u, b = phys[:n], phys[n:]
    ws = _workspace(n)
    # overflow surfaces later as a non-finite state and an InstabilityError
    with np.errstate(over="ignore", invalid="ignore"):
        prods = [u[i] * u[j] - b[i] * b[j] for i, j in ws.sym]
        prods += [u[j] * b[i] - b[j] * u[i] for i, j in ws.anti]
    hat = sfft.rfftn(np.stack(prods), axes=lat.axes, norm="forward")
    hat *= lat.dealias_mask
    ik = 1j * lat.kfloat
    n1 = np.zeros_like(uc)
    n2 = np.zeros_like(bc)
    for p, (i, j) in enumerate(ws.sym):
        n1[i] += ik[j] * hat[p]
        if i != j:
            n1[j] += ik[i] * hat[p]
    off = len(ws.sym)
    for p, (i, j) in enumerate(ws.anti):
        # W_ij = u_j b_i - b_j u_i, W_ji = -W_ij
        n2[i] += ik[j] * hat[off + p]
        n2[j] -= ik[i] * hat[off + p]
    kdot = np.sum(lat.kfloat * n1, axis=0)
    n1 -= lat.kfloat * (kdot * lat.inv_k2)
    return n1, n2


def nonlinear_rhs(state: State) -> NonlinearTerms:
    """Dealiased ``N1 = P(u.grad u - b.grad b)`` and ``N2 = u.grad b - b.grad u``."""
    lat = state.lattice
    n1, n2 = _rhs_arrays(lat, state.u.coeffs, state.b.coeffs)
    return NonlinearTerms(SpectralField(lat, n1), SpectralField(lat, n2))


def cfl_dt(state: State, control: StepControl | None = None) -> float:
    control = control or StepControl()
    speed = sup_bound(state.u) + sup_bound(state.b) + state.bf.norm
    if speed == 0:
        return control.max_dt
    return min(control.max_dt, control.cfl_number / (state.lattice.k_max * speed))


def _measure_drift(u: SpectralField, b: SpectralField) -> Drift:
    mean = float(max(np.max(np.abs(u.mean())), np.max(np.abs(b.mean()))))
    div = max(divergence_magnitude(u), divergence_magnitude(b))
    herm = max(hermitian_residual(u), hermitian_residual(b))
    return Drift(mean=mean, divergence=div, hermitian=herm)


def _clean(f: SpectralField) -> SpectralField:
    return symmetrize(leray_project(f))


def enforce_invariants(state: State) -> tuple[State, Drift]:
    """Zero the mean modes, Leray-project u and b, impose Hermitian symmetry.

    Returns the cleaned state and the drift measured beforehand.
    """
    drift = _measure_drift(state.u, state.b)
    return replace(state, u=_clean(state.u), b=_clean(state.b)), drift


_PROPAGATORS: dict = {}


def _propagator(lat, bvec, dt: float, regime):
    # step sizes repeat under a steady CFL limit; keep a few recent ones
    key = (lat, tuple(bvec), float(dt), regime)
    hit = _PROPAGATORS.get(key)
    if hit is None:
        if len(_PROPAGATORS) >= 8:
            _PROPAGATORS.pop(next(iter(_PROPAGATORS)))
        hit = _PROPAGATORS[key] = lattice_propagator(lat, bvec, dt, regime)
    return hit


def step_with_drift(state: State, dt: float, nonlinear: bool = True) -> tuple[State, Drift]:
    """One integrating-factor RK4 step; see :func:`step`."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    lat = state.lattice
    bvec = state.bf.vector
    full = _propagator(lat, bvec, dt, state.regime)
    u, b = state.u.coeffs, state.b.coeffs
    if not nonlinear:
        un, bn = apply_propagator(full, u, b)
    else:
        half = _propagator(lat, bvec, 0.5 * dt, state.regime)

        def F(x, y):
            n1, n2 = _rhs_arrays(lat, x, y)
            return -n1, -n2

        h = dt
        k1u, k1b = F(u, b)
        eu, eb = apply_propagator(half, u, b)
        a1u, a1b = apply_propagator(half, u + 0.5 * h * k1u, b + 0.5 * h * k1b)
        k2u, k2b = F(a1u, a1b)
        k3u, k3b = F(eu + 0.5 * h * k2u, eb + 0.5 * h * k2b)
        p3u, p3b = apply_propagator(half, k3u, k3b)
        fu, fb = apply_propagator(full, u, b)
        k4u, k4b = F(fu + h * p3u, fb + h * p3b)
        p1u, p1b = apply_propagator(full, k1u, k1b)
        p23u, p23b = apply_propagator(half, k2u + k3u, k2b + k3b)
        un = fu + (h / 6.0) * (p1u + 2.0 * p23u + k4u)
        bn = fb + (h / 6.0) * (p1b + 2.0 * p23b + k4b)
    if not (np.all(np.isfinite(un)) and np.all(np.isfinite(bn))):
        raise InstabilityError(f"non-finite coefficients after step to t = {state.t + dt}")
    new = replace(state, u=SpectralField(lat, un), b=SpectralField(lat, bn), t=state.t + dt)
    return enforce_invariants(new)


def step(state: State, dt: float, nonlinear: bool = True) -> State:
    """Advance by ``dt`` and re-impose the invariants.

    Raises:
        ValueError: for ``dt <= 0``.
        InstabilityError: if the new coefficients are not all finite.
    """
    return step_with_drift(state, dt, nonlinear)[0]


def _ladder(dt: float, top: float) -> float:
    """Round ``dt`` down onto ``top * 2**(-j/8)`` so that step sizes repeat."""
    j = math.ceil(8 * math.log2(top / dt) - 1e-9)
    return min(dt, top * 2.0 ** (-max(j, 0) / 8))


def advance(state: State, t_target: float, control: StepControl | None = None,
            nonlinear: bool = True) -> tuple[State, Drift, float]:
    """Step from ``state.t`` to exactly ``t_target``.

    Step sizes come from :func:`cfl_dt` rounded down to a fixed geometric
    ladder (or ``control.dt``) and are shortened to land on the target.  Returns the final state, the worst drift seen
    and the size of the last step.
    """
    control = control or StepControl()
    drift = Drift()
    last = 0.0
    while state.t < t_target:
        dt = control.dt if control.dt is not None else _ladder(cfl_dt(state, control), control.max_dt)
        remaining = t_target - state.t
        landing = remaining <= dt * (1 + 1e-9)
        if landing:
            dt = remaining
        elif remaining < 2 * dt:
            dt = 0.5 * remaining
        try:
            state, d = step_with_drift(state, dt, nonlinear)
        except InstabilityError as exc:
            exc.state = state
            raise
        if landing:
            state = replace(state, t=t_target)
        drift = drift.merge(d)
        last = dt
    return state, drift, last


def linear_reference(state: State, t: float) -> State:
    """Exact linear flow of ``state`` to absolute time ``t``."""
    u, b = evolve_linear(state.u, state.b, t - state.t, state.bf.vector, state.regime)
    return replace(state, u=u, b=b, t=t)
