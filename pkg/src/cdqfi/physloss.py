"""Training-objective components: stationarity residual loss, smoothness
regularizer, terminal metrology penalties, causality weighting.

Per-time parts are differentiable row operations; the causality weights are
computed from concrete per-time values and enter the total as constants
(they modulate, but are never themselves trained through).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor

DOMAIN_TOL = 1e-2


@dataclass(frozen=True)
class LossWeights:
    """Weight hierarchy: w_el > w_eta = w_balance > w_phase > w_reg."""

    w_el: float = 1e3
    w_eta: float = 1.0
    w_balance: float = 1.0
    w_phase: float = 1e-1
    w_reg: float = 1e-2
    eps_t: float = 1.0

    def reference_mode(self) -> "LossWeights":
        """Stationarity-only configuration used for paired baseline runs."""
        return LossWeights(
            w_el=self.w_el, w_eta=0.0, w_balance=0.0, w_phase=0.0, w_reg=0.0,
            eps_t=self.eps_t,
        )

    def to_json_dict(self) -> dict:
        return {
            "w_el": self.w_el, "w_eta": self.w_eta, "w_balance": self.w_balance,
            "w_phase": self.w_phase, "w_reg": self.w_reg, "eps_t": self.eps_t,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LossWeights":
        unknown = set(d) - {"w_el", "w_eta", "w_balance", "w_phase", "w_reg", "eps_t"}
        if unknown:
            raise ValueError(f"unknown loss keys {sorted(unknown)}")
        return cls(**d)


def el_loss(residual_values) -> float:
    """Mean squared magnitude of a residual coefficient vector."""
    r = np.asarray(residual_values)
    return float(np.mean(np.abs(r) ** 2))


def el_loss_rows(residual_rows: Tensor) -> Tensor:
    """Per-time version for (n_times, M) real residual rows on the tape."""
    return (residual_rows * residual_rows).mean(axis=1)


def regularizer_rows(comm_rows: Tensor) -> Tensor:
    """Mean squared coefficient magnitude of consecutive-time commutators."""
    return (comm_rows * comm_rows).mean(axis=1)


def commutativity_regularizer(h_next, h_now) -> float:
    """Smoothness penalty between consecutive total-Hamiltonian samples.

    Mean squared coefficient magnitude of [H(t + dt), H(t)] in the truncated
    basis; zero exactly when the two samples commute.
    """
    from .pauli import commutator_in_basis

    return el_loss(commutator_in_basis(h_next, h_now).values)


def _check_domain(name, value, lo, hi):
    v = float(value.data) if isinstance(value, Tensor) else float(value)
    if not (lo - DOMAIN_TOL <= v <= hi + DOMAIN_TOL):
        raise ValueError(f"{name}={v:.6g} outside [{lo}, {hi}]")


def terminal_losses(eta, cos_dphi, balance):
    """Quadratic distance of the terminal metrics from their optima.

    Inputs may be floats or scalar tensors; values are domain-checked with a
    small tolerance for propagation/finite-difference noise.
    """
    _check_domain("eta", eta, 0.0, 1.0)
    _check_domain("cos_dphi", cos_dphi, -1.0, 1.0)
    _check_domain("balance", balance, 0.0, 1.0)
    return (1.0 - eta) ** 2, (1.0 - cos_dphi) ** 2, (1.0 - balance) ** 2


def causality_weights(per_time_losses: np.ndarray, eps_t: float) -> np.ndarray:
    """exp(-eps_t * sum of losses at earlier times); weight 1 at t_0.

    Always evaluated on concrete values: the weights gate the gradient flow
    but do not receive gradients themselves.
    """
    losses = np.asarray(per_time_losses, dtype=float)
    if np.any(losses < 0):
        raise ValueError("per-time losses must be non-negative")
    exclusive_prefix = np.cumsum(losses) - losses
    return np.exp(-eps_t * exclusive_prefix)


def total_loss(per_time: Tensor, weights: np.ndarray) -> Tensor:
    """Causality-weighted mean over the grid: (1/N_t) sum_n w(t_n) L(t_n)."""
    if per_time.shape != weights.shape:
        raise ValueError("per-time losses and weights differ in length")
    return (per_time * weights).mean()


@dataclass
class LossBreakdown:
    """Per-epoch log row: raw (unweighted) parts plus the optimized total."""

    el: float
    reg: float
    eta_term: float
    phase_term: float
    balance_term: float
    total: float

    CSV_HEADER = "epoch,el,reg,eta_term,phase_term,balance_term,total"

    def csv_row(self, epoch: int) -> str:
        vals = (self.el, self.reg, self.eta_term, self.phase_term,
                self.balance_term, self.total)
        return f"{epoch}," + ",".join(f"{v:.17g}" for v in vals)
