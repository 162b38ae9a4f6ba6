"""Experiment runners. Each returns named tables of flat rows; :func:`run` writes them."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np
from scipy import stats

from ..bounds import compute_q_bounds, eliminate_actions, q_bounds_from_sample
from ..cvar_core import (
    DistributionOracle,
    RiskParams,
    SortedSample,
    aux_cvar_bounds,
    aux_cvar_bounds_from_samples,
    brown_bounds,
    ecdf_concentration_bounds,
    empirical_cvar,
    gmm_moments,
    ks_distance,
    oracle_cvar,
    thomas_lower_bound,
    thomas_upper_bound,
)
from ..discrepancy import DiscrepancyTable, build_discrepancy_table, epsilon_hat, model_fingerprint
from ..environments import load_scripts, make_environment
from ..errors import ConfigError
from ..pomdp_core import ORIGINAL, SIMPLIFIED, OpenLoopSequence, gen_belief_trajectories, returns_from_batch
from .io import emit
from .spec import ExperimentSpec, ResultRow

log = logging.getLogger(__name__)

DEMO_GMM = {
    "means": (0.2, -0.2, -0.5, 0.5, 0.0),
    "variances": (0.5, 0.2, 0.1, 0.1, 0.3),
    "weights": (0.3, 0.2, 0.05, 0.05, 0.4),
}

WARMUP_REP = 10**6  # seed index of the discarded warm-up run
DEFAULT_REPS = {"timing": 30, "gmm-demo": 100, "coverage-mc": 1000}


def thomas_suite() -> dict[str, DistributionOracle]:
    """The seven distributions of the Thomas-comparison suite."""
    return {
        "beta(2,2)": DistributionOracle.beta(2, 2),
        "beta(0.5,0.5)": DistributionOracle.beta(0.5, 0.5),
        "beta(2,5)": DistributionOracle.beta(2, 5),
        "beta(5,2)": DistributionOracle.beta(5, 2),
        "beta(10,2)": DistributionOracle.beta(10, 2),
        "beta(2,10)": DistributionOracle.beta(2, 10),
        "laplace(0,1)": DistributionOracle.laplace(0.0, 1.0),
    }


def demo_distributions() -> tuple[DistributionOracle, DistributionOracle]:
    """Truncated five-component GMM on [-1, 1] and its moment-matched truncated Normal."""
    g = DistributionOracle.truncated_gmm(**DEMO_GMM)
    mu, var = gmm_moments(**DEMO_GMM)
    return g, DistributionOracle.truncated_normal(mu, float(np.sqrt(var)))


def rep_rng(spec: ExperimentSpec, rep: int) -> np.random.Generator:
    # rep 0 uses the root seed itself so single runs match direct API calls
    ss = np.random.SeedSequence(spec.seed) if rep == 0 else np.random.SeedSequence([spec.seed, rep])
    return np.random.default_rng(ss)


def n_reps(spec: ExperimentSpec) -> int:
    return int(spec.reps) if spec.reps is not None else DEFAULT_REPS.get(spec.kind, 1)


def _pmap(spec: ExperimentSpec, fn, items):
    items = list(items)
    if spec.parallel > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=spec.parallel) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _row(spec: ExperimentSpec, rep: int, metrics: dict) -> dict:
    return ResultRow(spec.kind, spec.config_hash(), rep, spec.seed, metrics).flat()


# ---------------------------------------------------------------- environment helpers


def environment_models(spec: ExperimentSpec):
    simp = make_environment(spec.environment, SIMPLIFIED, config_path=spec.env_config)
    orig = make_environment(spec.environment, ORIGINAL, config_path=spec.env_config)
    return orig, simp


def action_scripts(spec: ExperimentSpec, model) -> dict[str, list[int]]:
    scripts = spec.scripts if spec.scripts is not None else load_scripts(spec.environment)
    return {name: [model.action_id(a) for a in acts] for name, acts in scripts.items()}


def fit_script(ids: list[int], horizon: int | None) -> list[int]:
    """Truncate or extend (repeating the last action) to ``horizon + 1`` actions."""
    if horizon is None:
        return list(ids)
    n = horizon + 1
    return list(ids[:n]) + [ids[-1]] * max(0, n - len(ids))


def initial_belief(spec: ExperimentSpec, model):
    # tabular models carry one exactly weighted particle per state and ignore n_p
    return model.initial_belief(None if hasattr(model, "exact_table") else spec.n_p)


def load_or_build_table(spec: ExperimentSpec, model) -> DiscrepancyTable:
    if spec.table_path is not None:
        table = DiscrepancyTable.from_json(spec.table_path)
        want = model_fingerprint(model)
        if table.metadata.get("model_hash") not in (None, want):
            raise ConfigError(f"table {spec.table_path} was built for a different {model.name} configuration")
        return table
    if hasattr(model, "exact_table"):
        return model.exact_table()
    log.info("no table given; building %d x %d in memory", spec.n_delta, spec.n_z)
    return build_discrepancy_table(model, model.default_proposal(), spec.n_delta, spec.n_z, seed=spec.seed)


# ---------------------------------------------------------------- build-table


def run_build_table(spec: ExperimentSpec) -> dict[str, list[dict]]:
    model = make_environment(spec.environment, SIMPLIFIED, config_path=spec.env_config)
    t0 = time.perf_counter()
    table = build_discrepancy_table(model, model.default_proposal(), spec.n_delta, spec.n_z, seed=spec.seed)
    secs = time.perf_counter() - t0
    path = Path(spec.table_path) if spec.table_path else Path(spec.out_dir) / f"{spec.environment}-table.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_json(path)
    d = table.delta
    row = _row(
        spec,
        0,
        {
            "environment": spec.environment,
            "n_delta": table.size,
            "n_z": spec.n_z,
            "delta_mean": float(d.mean()),
            "delta_sd": float(d.std()),
            "delta_min": float(d.min()),
            "delta_max": float(d.max()),
            "skipped": table.metadata.get("skipped", 0),
            "seconds": secs,
            "path": str(path),
        },
    )
    return {"table": [row]}


# ---------------------------------------------------------------- bound evaluation and sweeps


def _bound_metrics(res) -> dict:
    d = res.diagnostics
    return {
        "lower": res.lower,
        "upper": res.upper,
        "q_hat": res.q_hat,
        "alpha": res.alpha,
        "delta": res.delta,
        "n_b": res.n_b,
        "epsilon": res.epsilon,
        "eta": res.eta,
        "eps_prime": res.eps_prime,
        "branch_upper": str(res.branch_upper),
        "branch_lower": str(res.branch_lower),
        "guarantee_lower": res.guarantee_lower,
        "guarantee_upper": res.guarantee_upper,
        "guarantee_union": d.get("guarantee_union"),
        "informative": res.informative,
        "d_min": res.return_bounds.d_min,
        "d_max": res.return_bounds.d_max,
        "return_source": str(res.return_bounds.source),
        "eps_self": d.get("eps_self"),
        "eps_table": d.get("eps_table"),
        "eps_knn": d.get("eps_knn"),
        "D_proxy": d.get("D_proxy"),
        "fallback_particles": d.get("fallback_particles"),
        "eps_terms": d.get("eps_terms"),
    }


def _bounds_task(spec: ExperimentSpec, table: DiscrepancyTable, task):
    rep, value = task
    model = make_environment(spec.environment, SIMPLIFIED, config_path=spec.env_config)
    scripts = action_scripts(spec, model)
    alpha, n_b, horizon = spec.alpha, spec.n_b, spec.horizon
    if spec.kind == "sweep-alpha":
        alpha = float(value)
    elif spec.kind == "sweep-nsamples":
        n_b = int(value)
    elif spec.kind == "sweep-horizon":
        horizon = int(value)
    params = RiskParams(alpha, spec.delta)
    rows, steps, results = [], [], {}
    for name, ids in scripts.items():
        ids = fit_script(ids, horizon)
        h = len(ids) - 1
        t0 = time.perf_counter()
        res = compute_q_bounds(
            initial_belief(spec, model),
            ids[0],
            OpenLoopSequence(ids),
            params,
            h,
            n_b,
            model,
            table,
            spec.k,
            rep_rng(spec, rep),
            trivial_return_bounds=spec.trivial_return_bounds,
            normalization=spec.normalization,
            discount=spec.discount,
        )
        secs = time.perf_counter() - t0
        results[name] = res
        m = {"environment": spec.environment, "script": name, "horizon": h, "grid_value": value, "seconds": secs}
        m.update(_bound_metrics(res))
        rows.append(_row(spec, rep, m))
        cum = np.minimum(np.cumsum(res.diagnostics["eps_terms"]), 1.0)
        for t, (term, c) in enumerate(zip(res.diagnostics["eps_terms"], cum)):
            steps.append(
                _row(spec, rep, {"script": name, "grid_value": value, "step": t, "term": term, "cumulative": float(c)})
            )
    retained, eliminated = eliminate_actions(results)
    for r in rows:
        r["eliminated"] = r["script"] in eliminated
    summary = {"grid_value": value, "retained": retained, "eliminated": eliminated}
    if {"safe", "dangerous"} <= set(results):
        summary["separated"] = results["dangerous"].lower > results["safe"].upper
    return rows, steps, _row(spec, rep, summary)


def run_bounds(spec: ExperimentSpec) -> dict[str, list[dict]]:
    model = make_environment(spec.environment, SIMPLIFIED, config_path=spec.env_config)
    table = load_or_build_table(spec, model)
    grid = (None,) if spec.kind == "open-loop-eval" else spec.effective_grid()
    tasks = [(rep, v) for rep in range(n_reps(spec)) for v in grid]
    out = _pmap(spec, partial(_bounds_task, spec, table), tasks)
    bounds = [r for rows, _, _ in out for r in rows]
    steps = [s for _, st, _ in out for s in st]
    summary = [s for _, _, s in out]
    return {"bounds": bounds, "eps-steps": steps, "summary": summary}


# ---------------------------------------------------------------- timing


def _time_once(spec, orig, simp, table, ids, n_b, rep):
    params = RiskParams(spec.alpha, spec.delta)
    h = len(ids) - 1
    pol = OpenLoopSequence(ids)
    b_s = initial_belief(spec, simp)
    b_o = initial_belief(spec, orig)
    simp.reset_counters()
    rng = rep_rng(spec, rep)
    t0 = time.perf_counter()
    batch = gen_belief_trajectories(b_s, pol, h, n_b, simp, SIMPLIFIED, rng, first_action=ids[0])
    ret = returns_from_batch(batch, simp, spec.discount)
    est = epsilon_hat(batch, table, spec.k, simp, spec.normalization)
    res = q_bounds_from_sample(ret, params, est.value)
    t_s = time.perf_counter() - t0
    leaked = simp.density_calls[ORIGINAL]
    rng = rep_rng(spec, rep)
    t0 = time.perf_counter()
    batch_o = gen_belief_trajectories(b_o, pol, h, n_b, orig, ORIGINAL, rng, first_action=ids[0])
    ret_o = returns_from_batch(batch_o, orig, spec.discount)
    lo_o, hi_o = thomas_lower_bound(ret_o, params), thomas_upper_bound(ret_o, params)
    t_o = time.perf_counter() - t0
    return {
        "t_simplified": t_s,
        "t_original": t_o,
        "ratio": t_o / t_s,
        "original_density_calls_simplified": int(leaked),
        "simplified_lower": res.lower,
        "simplified_upper": res.upper,
        "original_lower": lo_o,
        "original_upper": hi_o,
        "epsilon": est.value,
    }


def _ci(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float)
    m = float(v.mean())
    if v.size < 2:
        return m, float("nan"), float("nan")
    lo, hi = stats.t.interval(0.95, v.size - 1, loc=m, scale=stats.sem(v))
    return m, float(lo), float(hi)


def compare_timing(spec: ExperimentSpec) -> dict[str, list[dict]]:
    """Wall time per bound evaluation: original-model Thomas bounds vs simplified-model bounds.

    Both variants replay identical seeds; one warm-up repetition is discarded.
    Always sequential so the two measurements do not compete for cores.
    """
    orig, simp = environment_models(spec)
    table = load_or_build_table(spec, simp)
    scripts = action_scripts(spec, simp)
    only = spec.options.get("timing_scripts")
    if only:
        scripts = {k: v for k, v in scripts.items() if k in only}
    reps_rows, summary = [], []
    for value in spec.effective_grid():
        n_b = int(value) if spec.timing_sweep == "n_b" else spec.n_b
        horizon = int(value) if spec.timing_sweep == "horizon" else spec.horizon
        for name, ids in scripts.items():
            ids = fit_script(ids, horizon)
            _time_once(spec, orig, simp, table, ids, n_b, WARMUP_REP)
            ratios, ts, to = [], [], []
            leaked = 0
            for rep in range(n_reps(spec)):
                m = _time_once(spec, orig, simp, table, ids, n_b, rep)
                leaked += m["original_density_calls_simplified"]
                ratios.append(m["ratio"])
                ts.append(m["t_simplified"])
                to.append(m["t_original"])
                m.update(script=name, grid_value=value, horizon=len(ids) - 1, n_b=n_b)
                reps_rows.append(_row(spec, rep, m))
            mean, lo, hi = _ci(ratios)
            summary.append(
                _row(
                    spec,
                    -1,
                    {
                        "environment": spec.environment,
                        "script": name,
                        "grid_value": value,
                        "horizon": len(ids) - 1,
                        "n_b": n_b,
                        "reps": len(ratios),
                        "ratio_mean": mean,
                        "ratio_ci_low": lo,
                        "ratio_ci_high": hi,
                        "ratio_of_means": float(np.mean(to) / np.mean(ts)),
                        "t_simplified_mean": float(np.mean(ts)),
                        "t_original_mean": float(np.mean(to)),
                        "original_density_calls_simplified": leaked,
                    },
                )
            )
    return {"reps": reps_rows, "summary": summary}


# ---------------------------------------------------------------- GMM demo


def sensitivity_curve(alpha: float = 0.5, epsilons=None) -> list[dict]:
    """Exact auxiliary-variable bounds on ``CVaR_alpha`` of a truncated N(0,1) from ``G = min(F + eps, 1)``."""
    f = DistributionOracle.truncated_normal(0.0, 1.0, -1.0, 1.0)
    truth = oracle_cvar(f, alpha)
    if epsilons is None:
        epsilons = list(np.linspace(0.0, 0.5, 20, endpoint=False)) + [0.5, 0.6, 0.8]
    rows = []
    for eps in epsilons:
        g = DistributionOracle.cdf_shift(f, float(eps))
        res = aux_cvar_bounds(
            alpha, float(eps), (-1.0, 1.0, -1.0, 1.0), lambda b, g=g: oracle_cvar(g, b), oracle_cvar(g, 1.0)
        )
        rows.append(
            {
                "epsilon": float(eps),
                "alpha": alpha,
                "lower": res.lower,
                "upper": res.upper,
                "truth": truth,
                "contained": bool(res.lower <= truth <= res.upper),
                "branch_upper": str(res.branch.upper),
                "branch_lower": str(res.branch.lower),
            }
        )
    return rows


def _demo_task(spec, gmm, tn, eps, truth, task):
    n, rep = task
    rng = rep_rng(spec, rep * 1_000_003 + n)
    t0 = time.perf_counter()
    x = gmm.sample(n, rng)
    t1 = time.perf_counter()
    c_hat = empirical_cvar(SortedSample.from_values(x, -1.0, 1.0), spec.alpha)
    t2 = time.perf_counter()
    y = tn.sample(n, rng)
    t3 = time.perf_counter()
    b = aux_cvar_bounds_from_samples(SortedSample.from_values(y, -1.0, 1.0), spec.alpha, eps, spec.delta)
    t4 = time.perf_counter()
    return {
        "n": n,
        "gmm_cvar_hat": c_hat,
        "lower": b.lower,
        "upper": b.upper,
        "eps_prime": b.eps_prime,
        "truth": truth,
        "contained": bool(b.lower <= truth <= b.upper),
        "t_gmm_sample": t1 - t0,
        "t_gmm_total": t2 - t0,
        "t_tn_sample": t3 - t2,
        "t_tn_total": t4 - t2,
    }


def run_gmm_demo(spec: ExperimentSpec) -> dict[str, list[dict]]:
    gmm, tn = demo_distributions()
    eps = ks_distance(gmm, tn)
    truth = oracle_cvar(gmm, spec.alpha)
    grid = [int(n) for n in spec.effective_grid()]
    reps = n_reps(spec)
    # warm up both samplers so the first timed call does not pay one-off costs
    _demo_task(spec, gmm, tn, eps, truth, (grid[0], 0))
    tasks = [(n, rep) for n in grid for rep in range(reps)]
    trials = [_row(spec, rep, m) for (n, rep), m in zip(tasks, _pmap(spec, partial(_demo_task, spec, gmm, tn, eps, truth), tasks))]
    summary = []
    for n in grid:
        sub = [r for r in trials if r["n"] == n]
        tg = np.array([r["t_gmm_total"] for r in sub])
        tt = np.array([r["t_tn_total"] for r in sub])
        sg = np.array([r["t_gmm_sample"] for r in sub])
        st = np.array([r["t_tn_sample"] for r in sub])
        summary.append(
            _row(
                spec,
                -1,
                {
                    "n": n,
                    "trials": len(sub),
                    "contained": int(sum(r["contained"] for r in sub)),
                    "epsilon": eps,
                    "truth": truth,
                    "surrogate_cvar": oracle_cvar(tn, spec.alpha),
                    "lower_mean": float(np.mean([r["lower"] for r in sub])),
                    "upper_mean": float(np.mean([r["upper"] for r in sub])),
                    "gmm_cvar_hat_mean": float(np.mean([r["gmm_cvar_hat"] for r in sub])),
                    "sampling_ratio": float(sg.sum() / st.sum()),
                    "total_ratio": float(tg.sum() / tt.sum()),
                },
            )
        )
    alpha_s = float(spec.options.get("sensitivity_alpha", 0.5))
    sens = [_row(spec, 0, r) for r in sensitivity_curve(alpha_s)]
    return {"trials": trials, "summary": summary, "sensitivity": sens}


# ---------------------------------------------------------------- Thomas comparison


def run_thomas_compare(spec: ExperimentSpec) -> dict[str, list[dict]]:
    alphas = tuple(spec.options.get("alphas", (0.05, 0.1, 0.25)))
    rows = []
    for name, dist in thomas_suite().items():
        for n in spec.effective_grid():
            n = int(n)
            for rep in range(n_reps(spec)):
                x = dist.sample(n, rep_rng(spec, rep * 7919 + n))
                s = SortedSample.from_values(x, dist.lo, dist.hi)
                for a in alphas:
                    p = RiskParams(a, spec.delta)
                    lo, up = ecdf_concentration_bounds(s, p)
                    tl, tu = thomas_lower_bound(s, p), thomas_upper_bound(s, p)
                    rows.append(
                        _row(
                            spec,
                            rep,
                            {
                                "distribution": name,
                                "n": n,
                                "alpha": a,
                                "delta": spec.delta,
                                "ecdf_lower": lo,
                                "ecdf_upper": up,
                                "thomas_lower": tl,
                                "thomas_upper": tu,
                                "max_abs_diff": max(abs(lo - tl), abs(up - tu)),
                            },
                        )
                    )
    return {"rows": rows}


# ---------------------------------------------------------------- coverage


def coverage_suite() -> dict[str, DistributionOracle]:
    return {
        "beta(2,5)": DistributionOracle.beta(2, 5),
        "truncated-normal": DistributionOracle.truncated_normal(0.0, 1.0, -1.0, 1.0),
        "uniform": DistributionOracle.uniform(0.0, 1.0),
    }


def _coverage_cell(spec, task):
    name, n, alpha = task
    suite = coverage_suite()
    dist = suite[name]
    trials = n_reps(spec)
    eps_aux = float(spec.options.get("aux_epsilon", 0.05))
    deltas = tuple(spec.options.get("deltas", (0.05, 0.1)))
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, list(suite).index(name), n, round(alpha * 1e6)]))
    truth = oracle_cvar(dist, alpha)
    xs = np.sort(np.asarray(dist.ppf(rng.random((trials, n))), dtype=float), axis=1)
    g = DistributionOracle.cdf_shift(dist, eps_aux)
    ys = np.sort(np.asarray(g.ppf(rng.random((trials, n))), dtype=float), axis=1)
    rows = []
    for delta in deltas:
        p = RiskParams(alpha, delta)
        fails = dict.fromkeys(
            ["brown_lower", "brown_upper", "thomas_upper", "thomas_lower", "ecdf_lower", "ecdf_upper", "aux_lower", "aux_upper"], 0
        )
        for i in range(trials):
            s = SortedSample(xs[i], dist.lo, dist.hi)
            bl, bu = brown_bounds(s, p)
            el, eu = ecdf_concentration_bounds(s, p)
            y = SortedSample(ys[i], dist.lo, dist.hi)
            aux = aux_cvar_bounds_from_samples(y, alpha, eps_aux, delta)
            fails["brown_lower"] += bl > truth
            fails["brown_upper"] += bu < truth
            fails["thomas_upper"] += thomas_upper_bound(s, p) < truth
            fails["thomas_lower"] += thomas_lower_bound(s, p) > truth
            fails["ecdf_lower"] += el > truth
            fails["ecdf_upper"] += eu < truth
            fails["aux_lower"] += aux.lower > truth
            fails["aux_upper"] += aux.upper < truth
        limit = delta + 3.0 * np.sqrt(delta * (1.0 - delta) / trials)
        for bound, f in fails.items():
            rate = f / trials
            rows.append(
                {
                    "distribution": name,
                    "n": n,
                    "alpha": alpha,
                    "delta": delta,
                    "bound": bound,
                    "trials": trials,
                    "failures": int(f),
                    "failure_rate": rate,
                    "limit": float(limit),
                    "ok": bool(rate <= limit),
                }
            )
    return rows


def run_coverage(spec: ExperimentSpec) -> dict[str, list[dict]]:
    alphas = tuple(spec.options.get("alphas", (0.1, 0.5)))
    tasks = [(d, int(n), a) for d in coverage_suite() for n in spec.effective_grid() for a in alphas]
    cells = _pmap(spec, partial(_coverage_cell, spec), tasks)
    return {"cells": [_row(spec, 0, r) for cell in cells for r in cell]}


# ---------------------------------------------------------------- dispatch

RUNNERS = {
    "build-table": run_build_table,
    "open-loop-eval": run_bounds,
    "sweep-horizon": run_bounds,
    "sweep-alpha": run_bounds,
    "sweep-nsamples": run_bounds,
    "timing": compare_timing,
    "gmm-demo": run_gmm_demo,
    "thomas-compare": run_thomas_compare,
    "coverage-mc": run_coverage,
}


def run(spec: ExperimentSpec, write: bool = True) -> dict[str, list[dict]]:
    """Validate, execute and (optionally) write CSV/JSON outputs for one experiment."""
    spec.validate()
    tables = RUNNERS[spec.kind](spec)
    if write:
        emit(spec.kind, spec.out_dir, tables)
    return tables
