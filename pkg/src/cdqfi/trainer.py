"""Experiment orchestration: seeded training, paired baselines, evaluation.

One epoch assembles the whole pipeline on the tape: network forward over the
full grid, constrained schedule, gauge-potential rows, dense total
Hamiltonians at the working frequency and its two finite-difference
neighbors, windowed Magnus propagation, and the causality-weighted loss.
The causality weights and the spectral-gap normalizer are computed from the
current epoch's concrete values and enter backward as constants.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import BilinearScatter, CTensor, Tensor, backward, vdot
from .config import RunConfig
from .magnus import TimeGrid, WindowPlan, evolve_sequential, evolve_windowed
from .metrics import (
    ExtremalPair,
    MetricsReport,
    extremal_pair,
    extremal_subspace_trace,
    fidelity_block,
    gap_series,
    qfi_from_states,
    qfi_via_generator,
    schrodinger_residual,
    symmetry_mismatch,
    sx_operator,
    unitarity_error,
)
from .models import initial_row, final_rows, sensitivity_direction_rows
from .network import (
    AdamState,
    NetworkShape,
    NonFiniteGradient,
    as_leaves,
    forward_agp,
    forward_lambda,
    init_params,
)
from .pauli import build_basis, build_commutator_table
from .physloss import LossBreakdown, causality_weights
from .schedule import learned_schedule, reference_schedule


@dataclass
class TrainingContext:
    """Constant tensors shared by every epoch of one run."""

    config: RunConfig
    basis: object
    grid: TimeGrid
    plan: WindowPlan
    shape: NetworkShape
    t_col: np.ndarray
    init_row: np.ndarray  # (M,)
    dctrl_rows: dict  # omega key -> (T, M): final(t) - initial
    stack_re: np.ndarray  # (M, d*d)
    stack_im: np.ndarray
    el_table: BilinearScatter
    reg_table: BilinearScatter | None
    psi0: np.ndarray  # (d,)
    pair_terminal: ExtremalPair
    gap_direction: np.ndarray  # (T,): gap of the schedule-free sensitivity direction
    probe_pair: ExtremalPair | None
    dim: int

    @property
    def omegas(self) -> tuple[float, float, float]:
        w, dw = self.config.model.omega, self.config.delta_omega
        return (w, w + dw, w - dw)


def _h_support_indices(basis, spec) -> np.ndarray:
    """Basis positions the control Hamiltonian can touch (X_i, Z_i, X_i Y_j)."""
    support = np.flatnonzero(
        np.abs(initial_row(spec, basis))
        + np.abs(final_rows(spec, basis, 0.0)[0])
        + np.abs(final_rows(spec, basis, 0.5 / spec.omega)[0])
    )
    return support


def probe_state(config: RunConfig, basis, grid: TimeGrid):
    """Initial probe per policy; the extremal policy reads the sensitivity
    direction at the first strictly positive grid time (the operator vanishes
    at t = 0), whose eigenvectors are schedule-independent."""
    spec = config.model
    dim = 2**spec.q
    if config.initial_state == "plus-product":
        return np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128), None
    stack = basis.dense_stack().reshape(basis.size, dim * dim)
    row = sensitivity_direction_rows(spec, basis, grid.times[1])[0]
    direction = (row @ stack).reshape(dim, dim)
    pair = extremal_pair(direction)
    psi0 = (pair.vec_min + pair.vec_max) / np.sqrt(2.0)
    return psi0, pair


def build_context(config: RunConfig) -> TrainingContext:
    spec = config.model
    basis = build_basis(spec.q, config.basis_k)
    grid = TimeGrid(config.n_t, spec.T)
    plan = WindowPlan(config.n_t, config.n_w)
    shape = NetworkShape(
        agp_out=basis.size,
        lambda_hidden=config.lambda_hidden,
        agp_hidden=config.agp_hidden,
    )
    dim = 2**spec.q
    stack = basis.dense_stack().reshape(basis.size, dim * dim)
    ini = initial_row(spec, basis)
    dctrl = {}
    for omega in (spec.omega, spec.omega + config.delta_omega,
                  spec.omega - config.delta_omega):
        dctrl[omega] = final_rows(spec.with_omega(omega), basis, grid.times) - ini
    support = _h_support_indices(basis, spec)
    el_raw = build_commutator_table(basis, None, support)
    el_table = BilinearScatter(
        el_raw.ii, el_raw.jj, el_raw.kk, el_raw.w_imag, basis.size, basis.size
    )
    reg_table = None
    if config.weights.w_reg != 0.0:
        reg_raw = build_commutator_table(basis)
        reg_table = BilinearScatter(
            reg_raw.ii, reg_raw.jj, reg_raw.kk, reg_raw.w_imag,
            basis.size, basis.size,
        )
    psi0, probe_pair = probe_state(config, basis, grid)
    direction_rows = sensitivity_direction_rows(spec, basis, grid.times)
    direction_dense = (direction_rows @ stack).reshape(grid.n_t, dim, dim)
    gap_direction = gap_series(direction_dense)
    pair_terminal = extremal_pair(direction_dense[-1])
    return TrainingContext(
        config=config,
        basis=basis,
        grid=grid,
        plan=plan,
        shape=shape,
        t_col=grid.times.reshape(-1, 1),
        init_row=ini,
        dctrl_rows=dctrl,
        stack_re=np.ascontiguousarray(stack.real),
        stack_im=np.ascontiguousarray(stack.imag),
        el_table=el_table,
        reg_table=reg_table,
        psi0=psi0,
        pair_terminal=pair_terminal,
        gap_direction=gap_direction,
        probe_pair=probe_pair,
        dim=dim,
    )


def _dense_ct(ctx: TrainingContext, rows: Tensor) -> CTensor:
    re = (rows @ Tensor.const(ctx.stack_re)).reshape(ctx.grid.n_t, ctx.dim, ctx.dim)
    im = (rows @ Tensor.const(ctx.stack_im)).reshape(ctx.grid.n_t, ctx.dim, ctx.dim)
    return CTensor(re, im)


def schedule_on_tape(ctx: TrainingContext, leaves):
    """(lambda, dlambda/dt) as (n_t,) tensors for the configured mode."""
    if ctx.config.schedule_mode == "reference":
        lam_np, dlam_np = reference_schedule(ctx.grid.times)
        return Tensor.const(lam_np), Tensor.const(dlam_np)
    u, du = forward_lambda(leaves, ctx.shape, ctx.t_col)
    n_t = ctx.grid.n_t
    return learned_schedule(
        ctx.grid.times, u.reshape(n_t), du.reshape(n_t),
        amplitude=ctx.config.amplitude,
    )


@dataclass
class EpochResult:
    total: Tensor
    leaves: dict
    breakdown: LossBreakdown
    frozen: dict
    lam: np.ndarray
    eta: float | None


def epoch_forward(ctx: TrainingContext, params: dict, frozen: dict | None = None) -> EpochResult:
    """Assemble the full loss for the current parameters on a fresh tape.

    `frozen` reuses a previous epoch's causality weights and gap normalizer
    (needed by finite-difference probes of the gradient, which must hold the
    stop-gradient quantities fixed).
    """
    cfg = ctx.config
    w = cfg.weights
    n_t = ctx.grid.n_t
    leaves = as_leaves(params)
    lam, dlam = schedule_on_tape(ctx, leaves)
    a_rows = forward_agp(leaves, ctx.shape, ctx.t_col)
    lam_col = lam.reshape(n_t, 1)
    dlam_col = dlam.reshape(n_t, 1)

    omega_c = cfg.model.omega
    dctrl_c = Tensor.const(ctx.dctrl_rows[omega_c])
    init_c = Tensor.const(ctx.init_row)
    h_ctrl = init_c + lam_col * dctrl_c

    # stationarity residual in coefficient space, all-real contraction chain
    c_hat = ctx.el_table(a_rows, h_ctrl)
    q_hat = dctrl_c - c_hat
    r_hat = ctx.el_table(q_hat, h_ctrl)
    el_rows = (r_hat * r_hat).mean(axis=1)  # (n_t,)

    h_tot = h_ctrl + dlam_col * a_rows
    reg_rows = None
    if w.w_reg != 0.0 and ctx.reg_table is not None:
        comm_rows = ctx.reg_table(h_tot[1:], h_tot[: n_t - 1])
        reg_rows = (comm_rows * comm_rows).mean(axis=1)  # (n_t - 1,)

    terminal_active = (w.w_eta != 0.0) or (w.w_balance != 0.0) or (w.w_phase != 0.0)
    eta_val = None
    eta_term = phase_term = bal_term = None
    if terminal_active:
        psis = {}
        psi0_ct = CTensor.const(ctx.psi0[:, None])
        for omega in ctx.omegas:
            if omega == omega_c:
                rows = h_tot
            else:
                rows = (init_c + lam_col * Tensor.const(ctx.dctrl_rows[omega])) \
                    + dlam_col * a_rows
            h_ct = _dense_ct(ctx, rows)
            psis[omega], _ = evolve_windowed(psi0_ct, h_ct, ctx.grid, ctx.plan, cfg.order)
        w0, wp, wm = ctx.omegas
        dpsi = (psis[wp] - psis[wm]) * (1.0 / (2.0 * cfg.delta_omega))
        fq = (vdot(dpsi, dpsi).re - vdot(psis[w0], dpsi).abs2()) * 4.0
        if frozen is None:
            gaps = lam.data * ctx.gap_direction
            f_q_max = float(np.trapezoid(gaps, dx=ctx.grid.dt) ** 2)
        else:
            f_q_max = frozen["f_q_max"]
        if f_q_max <= 1e-30:
            raise ValueError("degenerate protocol: vanishing sensitivity bound")
        eta = fq * (1.0 / f_q_max)
        c_min = vdot(CTensor.const(ctx.pair_terminal.vec_min[:, None]), psis[w0])
        c_max = vdot(CTensor.const(ctx.pair_terminal.vec_max[:, None]), psis[w0])
        p_min = c_min.abs2()
        p_max = c_max.abs2()
        balance = (p_min * p_max) * 4.0
        cross = (p_min * p_max + 1e-24).sqrt()
        cos_dphi = (c_max.re * c_min.re + c_max.im * c_min.im) / cross
        eta_val = float(eta.data)
        if not (-0.05 <= eta_val <= 1.05):
            raise ValueError(f"eta={eta_val:.4g} escaped its domain; dynamics broken")
        eta_term = (1.0 - eta) ** 2
        phase_term = (1.0 - cos_dphi) ** 2
        bal_term = (1.0 - balance) ** 2
    else:
        f_q_max = frozen["f_q_max"] if frozen else 0.0

    # causality weights from this epoch's concrete values (constants in backward)
    if frozen is None:
        per_np = w.w_el * el_rows.data.copy()
        if reg_rows is not None:
            per_np[: n_t - 1] += w.w_reg * reg_rows.data
        if terminal_active:
            per_np[n_t - 1] += (
                w.w_eta * float(eta_term.data)
                + w.w_phase * float(phase_term.data)
                + w.w_balance * float(bal_term.data)
            )
        weights = causality_weights(per_np, w.eps_t)
        frozen_out = {"weights": weights, "f_q_max": f_q_max}
    else:
        weights = frozen["weights"]
        frozen_out = frozen

    total = (el_rows * (w.w_el * weights)).sum()
    if reg_rows is not None:
        total = total + (reg_rows * (w.w_reg * weights[: n_t - 1])).sum()
    if terminal_active:
        terminal_sum = (
            eta_term * w.w_eta + phase_term * w.w_phase + bal_term * w.w_balance
        )
        total = total + terminal_sum * float(weights[n_t - 1])
    total = total * (1.0 / n_t)

    breakdown = LossBreakdown(
        el=float(el_rows.data.mean()),
        reg=float(reg_rows.data.mean()) if reg_rows is not None else 0.0,
        eta_term=float(eta_term.data) if terminal_active else 0.0,
        phase_term=float(phase_term.data) if terminal_active else 0.0,
        balance_term=float(bal_term.data) if terminal_active else 0.0,
        total=float(total.data),
    )
    return EpochResult(total, leaves, breakdown, frozen_out, lam.data.copy(), eta_val)


def loss_and_grads(ctx: TrainingContext, params: dict, frozen: dict | None = None):
    result = epoch_forward(ctx, params, frozen)
    backward(result.total)
    grads = {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
        for name, leaf in result.leaves.items()
    }
    return result, grads


def save_checkpoint(path, params: dict, optimizer: AdamState | None, config: RunConfig):
    payload = {
        "format": "cdqfi-checkpoint",
        "version": 1,
        "seed": config.seed,
        "config_hash": config.content_hash(),
        "q": config.model.q,
        "basis_k": config.basis_k,
        "params": {
            k: {"shape": list(v.shape), "data": v.ravel().tolist()}
            for k, v in params.items()
        },
        "optimizer": optimizer.to_json_dict() if optimizer else None,
    }
    with open(path, "w") as f:
        json.dump(payload, f)
        f.write("\n")


def load_checkpoint(path):
    with open(path) as f:
        d = json.load(f)
    if d.get("format") != "cdqfi-checkpoint" or d.get("version") != 1:
        raise ValueError("unrecognized checkpoint container")
    params = {
        k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
        for k, v in d["params"].items()
    }
    opt = AdamState.from_json_dict(d["optimizer"]) if d.get("optimizer") else None
    return params, opt, d


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    build: str
    wall_clock: dict
    files: dict
    aborted: bool
    final_metrics: dict

    def to_json_dict(self) -> dict:
        return {
            "format": "cdqfi-manifest",
            "version": 1,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "build": self.build,
            "wall_clock": self.wall_clock,
            "files": self.files,
            "aborted": self.aborted,
            "final_metrics": self.final_metrics,
        }


def train(config: RunConfig, out_dir) -> tuple[dict, RunManifest]:
    """Full-grid training; deterministic given (config, seed, build).

    Writes per-epoch loss rows, the final checkpoint, the evaluation report
    with traces and plots, and the run manifest.  Returns the trained
    parameters and the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    clock: dict = {}
    t0 = time.perf_counter()
    ctx = build_context(config)
    params = init_params(ctx.shape, config.seed)
    adam = AdamState(lr=config.lr)
    clock["setup_s"] = time.perf_counter() - t0

    config.save(out / "config.json")
    loss_path = out / "loss.csv"
    aborted = False
    t0 = time.perf_counter()
    last_good = {k: v.copy() for k, v in params.items()}
    with open(loss_path, "w") as log:
        log.write(LossBreakdown.CSV_HEADER + "\n")
        for epoch in range(1, config.epochs + 1):
            try:
                result, grads = loss_and_grads(ctx, params)
                adam.step(params, grads)
            except (NonFiniteGradient, ValueError) as err:
                aborted = True
                log.write(f"# aborted at epoch {epoch}: {err}\n")
                params = last_good
                break
            log.write(result.breakdown.csv_row(epoch) + "\n")
            if epoch % 50 == 0:
                last_good = {k: v.copy() for k, v in params.items()}
    clock["train_s"] = time.perf_counter() - t0

    ckpt_path = out / "checkpoint.json"
    save_checkpoint(ckpt_path, params, adam, config)

    t0 = time.perf_counter()
    report, traces = evaluate_protocol(config, params, ctx=ctx)
    files = write_evaluation_artifacts(out, report, traces)
    clock["evaluate_s"] = time.perf_counter() - t0

    files.update({"loss_csv": loss_path.name, "checkpoint": ckpt_path.name,
                  "config": "config.json", "manifest": "manifest.json"})
    manifest = RunManifest(
        config_hash=config.content_hash(),
        seed=config.seed,
        build=__version__,
        wall_clock=clock,
        files=files,
        aborted=aborted,
        final_metrics=report.to_json_dict(),
    )
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest.to_json_dict(), f, indent=2)
        f.write("\n")
    return params, manifest


def baseline_reference(config: RunConfig, out_dir) -> tuple[dict, RunManifest]:
    """Identical pipeline with only the stationarity loss active."""
    ref = config.with_overrides(weights=config.weights.reference_mode())
    return train(ref, out_dir)


def _const_leaves(params: dict) -> dict:
    return {k: Tensor.const(v) for k, v in params.items()}


def protocol_rows(config: RunConfig, params: dict, ctx: TrainingContext):
    """Concrete schedule and gauge-potential rows for evaluation."""
    leaves = _const_leaves(params)
    lam, dlam = schedule_on_tape(ctx, leaves)
    a_rows = forward_agp(leaves, ctx.shape, ctx.t_col)
    return lam.data, dlam.data, a_rows.data


def evaluate_protocol(
    config: RunConfig, params: dict, ctx: TrainingContext | None = None
) -> tuple[MetricsReport, dict]:
    """Run sequential + windowed evolutions and assemble the full report."""
    if ctx is None:
        ctx = build_context(config)
    grid, dim = ctx.grid, ctx.dim
    n_t = grid.n_t
    lam, dlam, a_rows = protocol_rows(config, params, ctx)
    stack = (ctx.stack_re + 1j * ctx.stack_im)

    def dense_rows(rows):
        return (rows @ stack).reshape(n_t, dim, dim)

    h_tot_rows = {}
    for omega in ctx.omegas:
        ctrl = ctx.init_row[None, :] + lam[:, None] * ctx.dctrl_rows[omega]
        h_tot_rows[omega] = ctrl + dlam[:, None] * a_rows
    h_tot_dense = {w: dense_rows(rows) for w, rows in h_tot_rows.items()}
    omega_c = config.model.omega

    spec = config.model
    sens_rows = lam[:, None] * sensitivity_direction_rows(spec, ctx.basis, grid.times)
    sens_dense = dense_rows(sens_rows)
    ctrl_dense = dense_rows(ctx.init_row[None, :] + lam[:, None] * ctx.dctrl_rows[omega_c])

    # windowed and sequential evolutions at the three frequencies
    psi_win, psi_seq = {}, {}
    props_central = None
    seq_central = None
    for omega in ctx.omegas:
        psi_col, props = evolve_windowed(
            ctx.psi0[:, None], h_tot_dense[omega], grid, ctx.plan, config.order
        )
        psi_win[omega] = psi_col[:, 0]
        seq = evolve_sequential(
            ctx.psi0, h_tot_dense[omega], grid, want_prefix=(omega == omega_c)
        )
        psi_seq[omega] = seq.psi_final
        if omega == omega_c:
            props_central = props
            seq_central = seq

    w0, wp, wm = ctx.omegas
    dw = config.delta_omega
    f_q_seq = qfi_from_states(psi_seq[w0], psi_seq[wp], psi_seq[wm], dw)
    f_q_win = qfi_from_states(psi_win[w0], psi_win[wp], psi_win[wm], dw)
    gaps = lam * ctx.gap_direction
    f_q_max = float(np.trapezoid(gaps, dx=grid.dt) ** 2)
    eta_defined = f_q_max > 1e-30
    eta_seq = f_q_seq / f_q_max if eta_defined else None
    eta_win = f_q_win / f_q_max if eta_defined else None
    eps_eta = abs(eta_win - eta_seq) if eta_defined else None

    if config.extremal_states == "time-evolved" and ctx.probe_pair is not None:
        u_t = seq_central.prefix_ops[-1]
        pair_eval = ExtremalPair(
            val_min=ctx.probe_pair.val_min,
            val_max=ctx.probe_pair.val_max,
            vec_min=u_t @ ctx.probe_pair.vec_min,
            vec_max=u_t @ ctx.probe_pair.vec_max,
            degenerate=ctx.probe_pair.degenerate,
        )
    else:
        pair_eval = ctx.pair_terminal
    block = fidelity_block(psi_seq[w0], pair_eval)

    schr, schr_flag = schrodinger_residual(
        seq_central.states, h_tot_dense[omega_c], grid
    )
    uni = unitarity_error(props_central)
    qfi_gen = qfi_via_generator(
        seq_central.prefix_ops, sens_dense, grid, ctx.psi0,
        h_samples=h_tot_dense[omega_c],
    )

    pairs = [extremal_pair(sens_dense[j]) for j in range(n_t)]
    p_ext = extremal_subspace_trace(seq_central.states, pairs)
    sx = sx_operator(spec.q)
    report = MetricsReport(
        eta=eta_seq,
        eta_windowed=eta_win,
        f_q=f_q_seq,
        f_q_max=f_q_max,
        fidelity=block.fidelity,
        p_min=block.p_min,
        p_max=block.p_max,
        cos_dphi=block.cos_dphi,
        balance=block.balance,
        schr_residual=schr,
        schr_degenerate=schr_flag,
        unitarity_error=uni,
        eps_eta=eps_eta,
        qfi_generator=qfi_gen,
        extremal_degenerate=block.degenerate,
        eta_defined=eta_defined,
        times=grid.times.tolist(),
        p_ext_trace=p_ext.tolist(),
        p_ext_degenerate=[p.degenerate for p in pairs],
        mismatch_control=symmetry_mismatch(ctrl_dense, sx).tolist(),
        mismatch_sensitivity=symmetry_mismatch(sens_dense, sx).tolist(),
        mismatch_total=symmetry_mismatch(h_tot_dense[omega_c], sx).tolist(),
    )
    traces = {
        "times": grid.times,
        "lambda": lam,
        "dlambda_dt": dlam,
        "p_ext": p_ext,
        "mismatch_control": np.asarray(report.mismatch_control),
        "mismatch_sensitivity": np.asarray(report.mismatch_sensitivity),
        "mismatch_total": np.asarray(report.mismatch_total),
    }
    return report, traces


def write_evaluation_artifacts(out_dir, report: MetricsReport, traces: dict) -> dict:
    """Emit the metrics JSON, trace CSVs, and SVG plots; returns the file map."""
    from .svgplot import line_chart

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    with open(out / "metrics.json", "w") as f:
        json.dump(report.to_json_dict(), f, indent=2)
        f.write("\n")
    files["metrics"] = "metrics.json"

    t = traces["times"]
    with open(out / "schedule.csv", "w") as f:
        f.write("t,lambda,dlambda_dt\n")
        for i in range(len(t)):
            f.write(
                f"{t[i]:.17g},{traces['lambda'][i]:.17g},{traces['dlambda_dt'][i]:.17g}\n"
            )
    files["schedule_csv"] = "schedule.csv"

    with open(out / "traces.csv", "w") as f:
        f.write("t,p_ext,mismatch_control,mismatch_sensitivity,mismatch_total\n")
        for i in range(len(t)):
            f.write(
                f"{t[i]:.17g},{traces['p_ext'][i]:.17g},"
                f"{traces['mismatch_control'][i]:.17g},"
                f"{traces['mismatch_sensitivity'][i]:.17g},"
                f"{traces['mismatch_total'][i]:.17g}\n"
            )
    files["traces_csv"] = "traces.csv"

    line_chart(
        out / "schedule.svg",
        [
            {"x": t, "y": traces["lambda"], "label": "lambda"},
            {"x": t, "y": traces["dlambda_dt"], "label": "dlambda/dt", "dashed": True},
        ],
        title="Control schedule",
        xlabel="t",
        ylabel="value",
    )
    files["schedule_svg"] = "schedule.svg"
    line_chart(
        out / "traces.svg",
        [
            {"x": t, "y": traces["p_ext"], "label": "P_ext"},
            {"x": t, "y": traces["mismatch_total"], "label": "C(H_tot)", "dashed": True},
        ],
        title="Protocol diagnostics",
        xlabel="t",
        ylabel="value",
    )
    files["traces_svg"] = "traces.svg"
    return files


def evaluate_checkpoint(config: RunConfig, checkpoint_path, out_dir=None):
    """Evaluate a stored checkpoint against a (possibly overridden) config."""
    params, _, meta = load_checkpoint(checkpoint_path)
    if meta["q"] != config.model.q or meta["basis_k"] != config.basis_k:
        raise ValueError(
            f"checkpoint was trained at q={meta['q']}, k={meta['basis_k']}; "
            f"config asks for q={config.model.q}, k={config.basis_k}"
        )
    report, traces = evaluate_protocol(config, params)
    if out_dir is not None:
        write_evaluation_artifacts(out_dir, report, traces)
    return report, traces
