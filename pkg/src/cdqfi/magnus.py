"""Windowed Magnus propagation with an exact sequential-evolution oracle.

The uniform grid carries N_t points over [0, T]; evolution takes the
N_t - 1 left-sampled steps between them, so a constant Hamiltonian
reproduces exp(-iHT) exactly.  Windows own m = N_t / n_w consecutive grid
points; each window propagates to the first point of the next one, which
makes the final window one step shorter (its last sample carries zero
weight).  The nested commutator sums of the second and third Magnus terms
are evaluated through prefix/suffix factorization, which is algebraically
identical to the nested sums and O(m) in batched matrix products.

Everything here is written against the common surface of numpy complex
arrays and CTensor, so training differentiates through the identical code
path used for plain evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import CTensor, Tensor


@dataclass(frozen=True)
class TimeGrid:
    """Uniform collocation grid: times[0] = 0, times[n_t - 1] = horizon."""

    n_t: int = 256
    horizon: float = 1.0
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_t < 2:
            raise ValueError("need at least two grid points")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(
            self, "times", np.linspace(0.0, self.horizon, self.n_t)
        )

    @property
    def dt(self) -> float:
        return self.horizon / (self.n_t - 1)


@dataclass(frozen=True)
class WindowPlan:
    """Partition of the n_t grid points into n_w contiguous windows."""

    n_t: int
    n_w: int = 16

    def __post_init__(self):
        if self.n_w < 1 or self.n_t % self.n_w != 0:
            raise ValueError(f"n_w={self.n_w} must divide n_t={self.n_t}")

    @property
    def m(self) -> int:
        return self.n_t // self.n_w


def _is_ctensor(x) -> bool:
    return isinstance(x, CTensor)


def _eye_like(x, dim: int):
    if _is_ctensor(x):
        return CTensor.const(np.eye(dim))
    return np.eye(dim, dtype=np.complex128)


def _expand_m_axis(x):
    """Insert a length-1 axis before the trailing (d, d) block."""
    shape = x.shape[:-2] + (1,) + x.shape[-2:]
    return x.reshape(shape)


def _max_frobenius(x) -> float:
    v = x.value() if _is_ctensor(x) else np.asarray(x)
    sq = (np.abs(v) ** 2).sum(axis=(-2, -1))
    return float(np.sqrt(sq.max()))


def _comm(a, b):
    return a @ b - b @ a


def omega_window(h_samples, dt: float, p: int):
    """Magnus generator of one window (or a batch) from its time samples.

    h_samples: (..., m, d, d) Hermitian operators in time order; returns the
    (..., d, d) anti-Hermitian generator truncated at order p in {1, 2, 3}.
    """
    if p not in (1, 2, 3):
        raise ValueError("truncation order must be 1, 2, or 3")
    total = h_samples.sum(axis=-3)
    omega = (-1j * dt) * total
    if p >= 2:
        prefix = h_samples.cumsum(-3) - h_samples  # sum over earlier samples
        inner = _comm(h_samples, prefix)
        omega = omega + (-0.5 * dt * dt) * inner.sum(axis=-3)
        if p >= 3:
            suffix = _expand_m_axis(total) - prefix - h_samples
            nested = _comm(suffix, inner) + _comm(prefix, _comm(h_samples, suffix))
            omega = omega + (1j * dt**3 / 6.0) * nested.sum(axis=-3)
    return omega


def expm_taylor(x, terms: int = 14):
    """exp(x) by scaling-and-squaring with a truncated power series.

    The series is applied at norm <= 1/2 where `terms` terms leave a
    truncation residual below 1e-16; smoothly differentiable, unlike an
    eigendecomposition route.
    """
    dim = x.shape[-1]
    norm = _max_frobenius(x)
    if not np.isfinite(norm):
        raise ValueError("non-finite generator entries")
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = x * (0.5**squarings) if squarings else x
    eye = _eye_like(x, dim)
    acc = eye + scaled * (1.0 / terms)
    for k in range(terms - 1, 0, -1):
        acc = eye + (scaled @ acc) * (1.0 / k)
    for _ in range(squarings):
        acc = acc @ acc
    return acc


def window_propagators(h_samples, grid: TimeGrid, plan: WindowPlan, p: int):
    """Per-window propagators from Hamiltonian samples at all grid points.

    The final grid point is given zero step weight (evolution ends at T), so
    the last window sums one sample fewer.
    """
    if plan.n_t != grid.n_t:
        raise ValueError("window plan does not match the grid")
    mask = np.ones((grid.n_t, 1, 1))
    mask[-1] = 0.0
    mask_f = Tensor.const(mask) if _is_ctensor(h_samples) else mask
    dim = h_samples.shape[-1]
    windows = (h_samples * mask_f).reshape((plan.n_w, plan.m, dim, dim))
    omegas = omega_window(windows, grid.dt, p)
    return expm_taylor(omegas)


def evolve_windowed(psi0, h_samples, grid: TimeGrid, plan: WindowPlan, p: int):
    """Apply the n_w window propagators in time order.

    Returns (final state as a (d, 1) column, the (n_w, d, d) propagator
    stack retained for the unitarity metric).
    """
    props = window_propagators(h_samples, grid, plan, p)
    psi = psi0
    for w in range(plan.n_w):
        psi = props[w] @ psi
    return psi, props


@dataclass
class SequentialResult:
    psi_final: np.ndarray  # (d,)
    states: np.ndarray  # (n_t, d): state at every grid point
    prefix_ops: np.ndarray | None = None  # (n_t, d, d): U(0 -> t_j)


def evolve_sequential(
    psi0: np.ndarray, h_samples: np.ndarray, grid: TimeGrid, want_prefix: bool = False
) -> SequentialResult:
    """Per-step exponential propagation, the oracle for Magnus error studies."""
    psi0 = np.asarray(psi0, dtype=np.complex128)
    h_samples = np.asarray(h_samples, dtype=np.complex128)
    if h_samples.shape[0] != grid.n_t:
        raise ValueError("need one Hamiltonian sample per grid point")
    if psi0.shape != (h_samples.shape[-1],):
        raise ValueError("state dimension does not match the Hamiltonian")
    steps = expm_taylor((-1j * grid.dt) * h_samples[:-1])
    states = np.empty((grid.n_t, psi0.size), dtype=np.complex128)
    states[0] = psi0
    psi = psi0
    for j in range(grid.n_t - 1):
        psi = steps[j] @ psi
        states[j + 1] = psi
    prefix = None
    if want_prefix:
        prefix = np.empty((grid.n_t,) + steps.shape[1:], dtype=np.complex128)
        prefix[0] = np.eye(psi0.size)
        for j in range(grid.n_t - 1):
            prefix[j + 1] = steps[j] @ prefix[j]
    return SequentialResult(psi, states, prefix)


def truncation_error_bound(horizon: float, n_w: int, p: int) -> float:
    """Constant-free global truncation scaling T (T / n_w)^p."""
    if n_w < 1:
        raise ValueError("need at least one window")
    if p not in (1, 2, 3):
        raise ValueError("truncation order must be 1, 2, or 3")
    return horizon * (horizon / n_w) ** p
