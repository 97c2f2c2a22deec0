"""Experiment runners behind the command line interface.

Each ``run_<name>(cfg)`` writes CSV files into ``cfg.out`` and returns a small
summary dict. Every CSV starts with a comment line carrying the config hash
and the seed.

Replica ensembles are split into fixed chunks; chunk ``j`` always integrates
replicas ``j*chunk .. (j+1)*chunk - 1`` with their own noise streams, so the
output does not depend on how many worker threads process the chunks.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, linalg, spectral
from .config import as_matrix_spec, matrix_dim
from .errors import ConfigError, ValidationError
from .io import write_csv
from .model import DoubleWell, LennardJones, Quadratic, TwoTemperatureSystem, aep_rate
from .simulate import (
    EnsembleNoise,
    IntegratorSpec,
    PhaseState,
    euler_maruyama_overdamped,
    max_scaled_dt,
    rk4_gradient_flow,
    simulate_controlled,
    simulate_scaled,
)


def _chunks(total, size):
    return [(lo, min(size, total - lo)) for lo in range(0, total, size)]


def run_chunked(fn, total, size, workers=1):
    """Apply ``fn(first, count)`` to consecutive replica chunks, results in chunk order."""
    parts = _chunks(total, size)
    if workers <= 1 or len(parts) == 1:
        return [fn(lo, m) for lo, m in parts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: fn(*p), parts))


def _fmt(v):
    return f"{v:g}"


def _vector(value, n, path):
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return np.full(n, float(a))
    if a.shape != (n,):
        raise ConfigError(f"{path}: expected a scalar or a length-{n} list")
    return a


def _replica_rng(seed, index, purpose):
    """Generator for non-Brownian randomness (initial conditions, oracle starts)."""
    ss = np.random.SeedSequence(entropy=[seed, purpose], spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# linear model: relative entropy decay


def run_ou_kl(cfg):
    p = cfg.params
    n = matrix_dim(p.k, matrix_dim(p.gamma))
    k = as_matrix_spec(p.k, n, "params.k")
    gamma = as_matrix_spec(p.gamma, n, "params.gamma")
    sigma0 = as_matrix_spec(p.sigma0, 2 * n, "params.sigma0")
    out = Path(cfg.out)
    stamp = cfg.stamp()
    times = np.linspace(0.0, p.t_max, p.n_times)
    rows = []
    for alpha in p.alphas:
        try:
            model = spectral.LinearModel(k, gamma, alpha, p.beta)
        except ValidationError as exc:
            raise ConfigError(f"params: {exc}")
        pair = spectral.assemble(model)
        series = analysis.kl_decay_curve(pair, sigma0, times)
        write_csv(out / f"kl_alpha_{_fmt(alpha)}.csv", ["t", "kl"], np.column_stack([series.times, series.values]), stamp)
        try:
            window = analysis.kl_window(series, *p.fit_window)
            rate, _, r2 = analysis.fit_exponential_rate(series, window)
        except analysis.DataError:
            rate, r2 = math.nan, math.nan
        rows.append([alpha, rate, r2, spectral.decay_rate(pair), series.values[-1]])
    write_csv(out / "rates.csv", ["alpha", "fitted_rate", "r_squared", "spectral_rate", "kl_final"], rows, stamp)
    return {"rates": np.array(rows)}


# --------------------------------------------------------------------------
# linear model: optimal temperature ratio


def run_ratio(cfg):
    p = cfg.params
    n = matrix_dim(p.k, matrix_dim(p.gamma))
    k = as_matrix_spec(p.k, n, "params.k")
    gamma = as_matrix_spec(p.gamma, n, "params.gamma")
    try:
        spectral.LinearModel(k, gamma, 1.0, p.beta)
    except ValidationError as exc:
        raise ConfigError(f"params: {exc}")
    out = Path(cfg.out)
    stamp = cfg.stamp()
    lo, hi = p.alpha_range
    grid = np.linspace(lo, hi, p.n_grid)
    rows = []
    for a in grid:
        ev = linalg.eigenvalues(spectral.drift_matrix(k, a * gamma))
        re = np.sort(ev.real)[::-1]
        rows.append(np.concatenate([[a, re[0]], re]))
    header = ["alpha", "abscissa"] + [f"re{i}" for i in range(2 * n)]
    write_csv(out / "abscissa_vs_alpha.csv", header, rows, stamp)

    alpha_star, rate = spectral.optimal_ratio_search(k, gamma, (lo, hi), p.tol, p.n_grid)
    a_star = spectral.drift_matrix(k, alpha_star * gamma)
    summary = {
        "alpha_search": alpha_star,
        "rate_search": rate,
        "abscissa_search": -0.5 * rate,
        # -tr(A)/(2n): no eigenvalue arrangement can push the abscissa below it
        "abscissa_bound": -0.5 * spectral.trace_rate_bound(a_star),
    }
    try:
        kd, gd, _ = spectral.diagonalize_commuting(k, gamma)
        summary["alpha_closed_form"] = spectral.optimal_ratio_commuting(kd, gd)
    except spectral.CommutationError:
        pass
    keys = list(summary)
    write_csv(out / "ratio_summary.csv", keys, [[summary[key] for key in keys]], stamp)
    return summary


# --------------------------------------------------------------------------
# bistable sampling


def tridiagonal(n, diag, off):
    return diag * np.eye(n) + off * (np.eye(n, k=1) + np.eye(n, k=-1))


def run_bistable(cfg):
    p = cfg.params
    n = p.d + 1
    pot = DoubleWell(p.d, p.k)
    gamma = tridiagonal(n, p.gamma_diag, p.gamma_off)
    x0 = _vector(p.init_x, n, "params.init_x")
    y0 = _vector(p.init_y, n, "params.init_y")
    spec = IntegratorSpec("baoab_controlled", p.integrator.dt, p.integrator.n_steps, p.integrator.thin)
    try:
        systems = {
            "controlled": TwoTemperatureSystem.from_friction(gamma, p.beta_bar, p.beta),
            "uncontrolled": TwoTemperatureSystem.from_friction(gamma, p.beta, p.beta),
        }
    except ValidationError as exc:
        raise ConfigError(f"params: {exc}")
    out = Path(cfg.out)
    stamp = cfg.stamp()
    lag_dt = spec.dt * spec.thin
    summary = {}
    counts = {}
    for label, system in systems.items():

        def chunk(first, m, system=system):
            init = PhaseState(np.tile(x0, (m, 1)), np.tile(y0, (m, 1)))
            noise = EnsembleNoise(cfg.seed, n, m, first=first)
            return simulate_controlled(init, system, pot, spec, noise)

        trajs = run_chunked(chunk, p.replicas, p.chunk, cfg.workers)
        x = np.concatenate([t.x for t in trajs], axis=1)
        y = np.concatenate([t.y for t in trajs], axis=1)
        trajs[0].replica(0).to_csv(out / f"trajectory_{label}.csv", stamp)

        q = x[:, :, 0]
        edges, dens = analysis.histogram_marginal(q.ravel(), 0, p.bins, tuple(p.hist_range))
        write_csv(out / f"q_hist_{label}.csv", ["bin_left", "bin_right", "density"], np.column_stack([edges[:-1], edges[1:], dens]), stamp)

        max_lag = min(p.max_lag, len(q) - 1)
        acf = np.mean([analysis.autocorrelation(y[:, r, 0], max_lag) for r in range(p.replicas)], axis=0) if max_lag >= 0 and len(q) > 1 else np.ones(1)
        write_csv(out / f"acf_{label}.csv", ["lag", "acf"], np.column_stack([lag_dt * np.arange(acf.size), acf]), stamp)

        counts[label] = np.array([analysis.count_transitions(q[:, r], p.band) for r in range(p.replicas)])
        left = float(np.mean(q < 0))
        summary[f"{label}_left_mass"] = left
        summary[f"{label}_mean_transitions"] = float(counts[label].mean())
    rows = np.column_stack([np.arange(p.replicas), counts["controlled"], counts["uncontrolled"]])
    write_csv(out / "transitions.csv", ["replica", "controlled", "uncontrolled"], rows, stamp)
    summary["fraction_controlled_more"] = float(np.mean(counts["controlled"] > counts["uncontrolled"]))
    summary["counts"] = counts
    return summary


# --------------------------------------------------------------------------
# Lennard-Jones cooling


def lj_grid_start(n_particles, dim, spacing, noise, rng):
    """Particles on a cubic grid of the given spacing, perturbed by N(0, noise^2)."""
    side = math.ceil(n_particles ** (1.0 / dim) - 1e-9)
    idx = np.array(np.unravel_index(np.arange(n_particles), (side,) * dim)).T
    pos = spacing * idx.astype(float)
    return (pos + noise * rng.standard_normal(pos.shape)).ravel()


def lj_random_start(n_particles, dim, sig, rng, min_dist=0.9):
    """Uniform positions in a box, rejecting overlaps closer than ``min_dist * sig``."""
    box = 1.2 * sig * n_particles ** (1.0 / dim)
    iu = np.triu_indices(n_particles, 1)
    while True:
        pos = rng.uniform(0.0, box, (n_particles, dim))
        r = np.linalg.norm(pos[:, None] - pos[None], axis=-1)[iu]
        if r.min() >= min_dist * sig:
            return pos.ravel()


def energy_fluctuation(v):
    """Last-quartile spread of an energy series, linear and in decades.

    Returns ``(std V, std log10|V|)`` over the last quarter of the records.
    """
    v = np.asarray(v, dtype=float)
    tail = v[3 * len(v) // 4 :]
    mag = np.log10(np.maximum(np.abs(tail), 1e-300))
    return tail.std(axis=0), mag.std(axis=0)


def run_lj_cool(cfg):
    p = cfg.params
    pot = LennardJones(p.n_particles, p.dim, p.eps, p.sig)
    n = pot.n
    gamma = p.gamma * np.eye(n)
    spec = IntegratorSpec("baoab_controlled", p.integrator.dt, p.integrator.n_steps, p.integrator.thin)
    out = Path(cfg.out)
    stamp = cfg.stamp()
    x0 = np.stack([lj_grid_start(p.n_particles, p.dim, p.init_spacing * p.sig, p.init_noise, _replica_rng(cfg.seed, r, 1)) for r in range(p.replicas)])

    oracle_best = math.nan
    if p.oracle_starts > 0:
        starts = np.stack([lj_random_start(p.n_particles, p.dim, p.sig, _replica_rng(cfg.seed, s, 2)) for s in range(p.oracle_starts)])
        ospec = IntegratorSpec("rk4_gradient_flow", p.oracle_dt, p.oracle_steps, max(p.oracle_steps, 1))
        final = rk4_gradient_flow(starts, pot, np.eye(n), ospec).x[-1]
        e = pot.energy(final)
        write_csv(out / "oracle.csv", ["start", "energy"], np.column_stack([np.arange(p.oracle_starts), e]), stamp)
        oracle_best = float(e.min())

    summary_rows = []
    runs = {}
    for beta in p.betas:
        system = TwoTemperatureSystem.from_friction(gamma, p.beta_bar, beta)

        def chunk(first, m, system=system):
            init = PhaseState(x0[first : first + m], np.zeros((m, n)))
            return simulate_controlled(init, system, pot, spec, EnsembleNoise(cfg.seed, n, m, first=first))

        trajs = run_chunked(chunk, p.replicas, p.chunk, cfg.workers)
        x = np.concatenate([t.x for t in trajs], axis=1)
        v = pot.energy(x)
        times = trajs[0].times
        tag = _fmt(beta)
        write_csv(out / f"energy_beta_{tag}.csv", ["t"] + [f"v{r}" for r in range(p.replicas)], np.column_stack([times, v]), stamp)
        coords = [f"x{i}" for i in range(n)]
        write_csv(out / f"final_beta_{tag}.csv", ["replica"] + coords, np.column_stack([np.arange(p.replicas), x[-1]]), stamp)
        sd, sd_log = energy_fluctuation(v)
        lq_mean = v[3 * len(v) // 4 :].mean(axis=0)
        for r in range(p.replicas):
            summary_rows.append([beta, r, v[-1, r], lq_mean[r], sd[r], sd_log[r], oracle_best])
        runs[beta] = {"energy": v, "final": x[-1], "times": times}
    header = ["beta", "replica", "final_energy", "lq_mean", "lq_std", "lq_log10_std", "oracle_best"]
    write_csv(out / "lj_summary.csv", header, summary_rows, stamp)
    return {"runs": runs, "oracle_best": oracle_best, "potential": pot}


# --------------------------------------------------------------------------
# temperature-separation limits


def _limits_potential(spec, n_default):
    if spec.kind == "quadratic":
        n = matrix_dim(spec.k, n_default)
        return Quadratic(as_matrix_spec(spec.k, n, "params.potential.k"))
    return DoubleWell(spec.d, spec.coupling)


def run_limits(cfg):
    """Coupled runs of the eps-scaled dynamics against their limit.

    All runs share one Brownian path per replica on the grid of the finest
    step; the step for each eps is the largest multiple of that grid which
    still satisfies the stability rule, and errors are compared on the common
    time points. The reference is the gradient flow (fixed simulation
    temperature) or the overdamped equation (fixed target temperature), both
    integrated on the finest grid.
    """
    p = cfg.params
    pot = _limits_potential(p.potential, matrix_dim(p.gamma))
    n = pot.n
    gamma = as_matrix_spec(p.gamma, n, "params.gamma")
    try:
        if p.regime == "fixed_sim_temp":
            noise_matrix = linalg.sqrtm_spd(2.0 * gamma / p.beta_bar)
        else:
            noise_matrix = linalg.sqrtm_spd(2.0 * gamma / p.beta)
    except ValidationError as exc:
        raise ConfigError(f"params.gamma: {exc}")
    x0 = _vector(p.init_x, n, "params.init_x")
    y0 = _vector(p.init_y, n, "params.init_y")
    eps_list = sorted(p.eps, reverse=True)
    base_dt = max_scaled_dt(gamma, min(eps_list))
    n_base = int(math.floor(p.horizon / base_dt + 1e-9))
    plan = []
    for eps in eps_list:
        m = max(1, int(math.floor(max_scaled_dt(gamma, eps) / base_dt * (1 + 1e-12))))
        plan.append((eps, m, n_base // m))

    if p.regime == "fixed_sim_temp":
        ref_spec = IntegratorSpec("rk4_gradient_flow", base_dt, n_base, 1)
        ref_single = rk4_gradient_flow(x0, pot, gamma, ref_spec).x

    def chunk(first, count):
        errs = []
        if p.regime == "fixed_sim_temp":
            ref = np.broadcast_to(ref_single[:, None, :], (n_base + 1, count, n))
        else:
            ref_spec = IntegratorSpec("euler_maruyama_overdamped", base_dt, n_base, 1)
            noise = EnsembleNoise(cfg.seed, n, count, base_dt=base_dt, first=first)
            ref = euler_maruyama_overdamped(np.tile(x0, (count, 1)), pot, gamma, noise_matrix, ref_spec, noise).x
        for eps, m, steps in plan:
            spec = IntegratorSpec("scaled_underdamped", m * base_dt, steps, 1)
            noise = EnsembleNoise(cfg.seed, n, count, base_dt=base_dt, first=first)
            init = PhaseState(np.tile(x0, (count, 1)), np.tile(y0, (count, 1)))
            tr = simulate_scaled(init, pot, gamma, noise_matrix, eps, p.regime, spec, noise)
            diff = tr.x - ref[: m * steps + 1 : m]
            errs.append(np.linalg.norm(diff, axis=-1).max(axis=0))
        return np.array(errs)

    errs = np.concatenate(run_chunked(chunk, p.replicas, p.chunk, cfg.workers), axis=1)
    rms = np.sqrt(np.mean(errs**2, axis=1))
    out = Path(cfg.out)
    stamp = cfg.stamp()
    eps_arr = np.array([e for e, _, _ in plan])
    dts = np.array([m * base_dt for _, m, _ in plan])
    write_csv(out / "limits.csv", ["eps", "dt", "rms_sup_error"], np.column_stack([eps_arr, dts, rms]), stamp)
    rep_rows = [[eps_arr[i], r, errs[i, r]] for i in range(len(plan)) for r in range(p.replicas)]
    write_csv(out / "limits_replicas.csv", ["eps", "replica", "sup_error"], rep_rows, stamp)
    summary = {"eps": eps_arr, "rms": rms, "errors": errs}
    if len(plan) >= 4:
        slope = analysis.eps_scaling_slope(eps_arr, rms)
        write_csv(out / "limits_fit.csv", ["slope"], [[slope]], stamp)
        summary["slope"] = slope
    return summary


# --------------------------------------------------------------------------
# entropy production


def run_aep(cfg):
    p = cfg.params
    n = matrix_dim(p.k, matrix_dim(p.gamma))
    k = as_matrix_spec(p.k, n, "params.k")
    gamma = as_matrix_spec(p.gamma, n, "params.gamma")
    sigma0 = as_matrix_spec(p.sigma0, 2 * n, "params.sigma0")
    try:
        pot = Quadratic(k)
        if p.b is not None:
            b = as_matrix_spec(p.b, n, "params.b")
            sigma = linalg.sqrtm_spd(2.0 * gamma / p.beta_bar)
            system = TwoTemperatureSystem(gamma, sigma, p.beta_bar, p.beta, b)
        else:
            m = None if p.m is None else as_matrix_spec(p.m, n, "params.m")
            system = TwoTemperatureSystem.from_friction(gamma, p.beta_bar, p.beta, m=m)
    except ValidationError as exc:
        raise ConfigError(f"params: {exc}")
    rate = aep_rate(system)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    mc, se = analysis.aep_monte_carlo(system, p.n_samples, rng)
    times = np.linspace(0.0, p.t_max, p.n_times)
    report = analysis.fir_check(system, pot, sigma0, times)
    out = Path(cfg.out)
    stamp = cfg.stamp()
    write_csv(out / "aep.csv", ["rate_closed_form", "rate_monte_carlo", "rate_se", "fir_passed", "kl_monotone", "min_slack"],
              [[rate, mc, se, float(report.passed), float(report.monotone), report.min_slack]], stamp)
    write_csv(out / "fir.csv", ["t", "kl", "bound", "slack"], np.column_stack([report.times, report.kl, report.bound, report.slack]), stamp)
    return {"rate": rate, "mc": mc, "se": se, "report": report}


RUNNERS = {
    "ou_kl": run_ou_kl,
    "ratio": run_ratio,
    "bistable": run_bistable,
    "lj_cool": run_lj_cool,
    "limits": run_limits,
    "aep": run_aep,
}


def run(cfg):
    return RUNNERS[cfg.experiment](cfg)
