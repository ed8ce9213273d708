"""Propagator error studies and system-size scaling reports."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .magnus import (
    TimeGrid,
    WindowPlan,
    evolve_sequential,
    evolve_windowed,
    truncation_error_bound,
)
from .metrics import qfi_from_states
from .network import AdamState, init_params
from .pauli import build_basis
from .schedule import reference_schedule
from .trainer import build_context, loss_and_grads, protocol_rows


@dataclass
class MagnusStudyRow:
    n_w: int
    p: int
    eta_error: float
    state_error: float
    bound: float


def magnus_study(
    config: RunConfig,
    n_w_list,
    p_list,
    params: dict | None = None,
    out_dir=None,
) -> list[MagnusStudyRow]:
    """Windowed-vs-sequential error sweep over window counts and orders.

    Without parameters the protocol is the reference schedule with zero
    gauge potential; with a checkpoint's parameters the learned protocol is
    studied instead.  Emits CSV (n_w, p, measured_error, bound) and a
    log-log SVG when out_dir is given.
    """
    if not n_w_list or not p_list:
        raise ValueError("need at least one window count and one order")
    ctx = build_context(config)
    grid, dim = ctx.grid, ctx.dim
    if params is None:
        lam, dlam = reference_schedule(grid.times)
        a_rows = np.zeros((grid.n_t, ctx.basis.size))
    else:
        lam, dlam, a_rows = protocol_rows(config, params, ctx)
    stack = ctx.stack_re + 1j * ctx.stack_im

    h_dense = {}
    for omega in ctx.omegas:
        rows = ctx.init_row[None, :] + lam[:, None] * ctx.dctrl_rows[omega]
        rows = rows + dlam[:, None] * a_rows
        h_dense[omega] = (rows @ stack).reshape(grid.n_t, dim, dim)

    gaps = lam * ctx.gap_direction
    f_q_max = float(np.trapezoid(gaps, dx=grid.dt) ** 2)
    seq = {w: evolve_sequential(ctx.psi0, h_dense[w], grid) for w in ctx.omegas}
    w0, wp, wm = ctx.omegas
    dw = config.delta_omega
    eta_seq = qfi_from_states(
        seq[w0].psi_final, seq[wp].psi_final, seq[wm].psi_final, dw
    ) / f_q_max

    rows_out = []
    for n_w in n_w_list:
        plan = WindowPlan(grid.n_t, n_w)
        for p in p_list:
            psi = {}
            for omega in ctx.omegas:
                col, _ = evolve_windowed(
                    ctx.psi0[:, None], h_dense[omega], grid, plan, p
                )
                psi[omega] = col[:, 0]
            eta_win = qfi_from_states(psi[w0], psi[wp], psi[wm], dw) / f_q_max
            rows_out.append(
                MagnusStudyRow(
                    n_w=n_w,
                    p=p,
                    eta_error=abs(eta_win - eta_seq),
                    state_error=float(np.linalg.norm(psi[w0] - seq[w0].psi_final)),
                    bound=truncation_error_bound(grid.horizon, n_w, p),
                )
            )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "magnus_study.csv", "w") as f:
            f.write("n_w,p,measured_error,bound\n")
            for r in rows_out:
                f.write(f"{r.n_w},{r.p},{r.eta_error:.17g},{r.bound:.17g}\n")
        from .svgplot import line_chart

        series = []
        for p in p_list:
            sub = [r for r in rows_out if r.p == p]
            series.append(
                {"x": [r.n_w for r in sub], "y": [max(r.eta_error, 1e-18) for r in sub],
                 "label": f"measured p={p}"}
            )
            series.append(
                {"x": [r.n_w for r in sub], "y": [r.bound for r in sub],
                 "label": f"bound p={p}", "dashed": True}
            )
        line_chart(
            out / "magnus_study.svg",
            series,
            title="Windowed propagation error",
            xlabel="windows",
            ylabel="error",
            logx=True,
            logy=True,
        )
    return rows_out


def fitted_order(rows: list[MagnusStudyRow], p: int, use_state_error=True) -> float:
    """Log-log slope of the error against the window count for one order."""
    sub = sorted((r for r in rows if r.p == p), key=lambda r: r.n_w)
    xs = np.log([r.n_w for r in sub])
    ys = np.log([r.state_error if use_state_error else r.eta_error for r in sub])
    return float(np.polyfit(xs, ys, 1)[0])


@dataclass
class ScalabilityRow:
    q: int
    k: int
    basis_size: int
    n_out: int
    m_out_gib: float
    train_step_ms: float | None
    inference_ms: float | None


def output_memory_gib(n_t: int, n_out: int, bytes_per_value: int = 4) -> float:
    """Memory of the per-grid output tensor in GiB (float32 values)."""
    return n_t * n_out * bytes_per_value / 1024**3


def scalability_report(
    q_list,
    k: int,
    n_t: int = 256,
    measure: bool = True,
    out_dir=None,
    repeats: int = 3,
) -> list[ScalabilityRow]:
    """Basis counts, output-tensor memory, and measured per-step timings."""
    from .models import ModelSpec

    rows = []
    for q in q_list:
        kk = min(k, q)
        basis = build_basis(q, kk)
        n_out = 1 + basis.size
        step_ms = infer_ms = None
        if measure:
            cfg = RunConfig(
                model=ModelSpec("nearest-neighbor", q),
                basis_k=kk,
                n_t=n_t,
                epochs=1,
                seed=0,
            )
            ctx = build_context(cfg)
            params = init_params(ctx.shape, 0)
            adam = AdamState(lr=cfg.lr)
            samples = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                _, grads = loss_and_grads(ctx, params)
                adam.step(params, grads)
                samples.append((time.perf_counter() - t0) * 1e3)
            step_ms = float(np.median(samples))
            samples = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                protocol_rows(cfg, params, ctx)
                samples.append((time.perf_counter() - t0) * 1e3)
            infer_ms = float(np.median(samples))
        rows.append(
            ScalabilityRow(
                q=q,
                k=kk,
                basis_size=basis.size,
                n_out=n_out,
                m_out_gib=output_memory_gib(n_t, n_out),
                train_step_ms=step_ms,
                inference_ms=infer_ms,
            )
        )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scalability.csv", "w") as f:
            f.write("q,k,basis_size,n_out,m_out_gib,train_step_ms,inference_ms\n")
            for r in rows:
                step = f"{r.train_step_ms:.17g}" if r.train_step_ms is not None else ""
                inf = f"{r.inference_ms:.17g}" if r.inference_ms is not None else ""
                f.write(
                    f"{r.q},{r.k},{r.basis_size},{r.n_out},{r.m_out_gib:.17g},"
                    f"{step},{inf}\n"
                )
    return rows
