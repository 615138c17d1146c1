"""Reproducible experiment harness.

Every experiment kind maps a config to per-trial rows plus a summary
block.  Trial randomness derives from hashing (experiment seed, setting
index, trial index) into independent seed sequences, so results are
byte-identical across re-runs and worker counts; trials are embarrassingly
parallel and assembled in index order.  All exported timings are modeled
from fixed per-operation costs rather than measured, keeping output files
deterministic.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from beliefplan.calibration import (
    PredictionBatch,
    calibration_verdict,
    reliability_report,
)
from beliefplan.core import (
    GroundPredicate,
    Relation,
    classify,
    fuse_observation,
    state_uncertainty_independent,
)
from beliefplan.mrf import (
    PredicateMrf,
    conditional_uncertainty,
    correlation_edge,
    enumerate_beliefs,
    loopy_bp,
    unary_potentials,
)
from beliefplan.planner import (
    Goal,
    PlannerOptions,
    convergence_bound,
    plan_under_uncertainty,
)
from beliefplan.scene import (
    NoiseConfig,
    PlanningEnvironment,
    generate_scene,
    perceive_with_labels,
    scene_to_json,
)
from beliefplan.threshold import (
    FitError,
    SweepSample,
    fit_alpha_pooled,
    fit_success,
    fit_time,
    lambert_optimum,
    optimize_threshold,
    plateau_relative_change,
)

EXPERIMENT_KINDS = (
    "calibration",
    "alpha-fit",
    "convergence",
    "threshold-sweep",
    "plan-benchmark",
    "mrf-check",
)

REFERENCE_OPERATING_TAU = 0.73  # conventional operating point quoted with the canonical fit
BP_DEVIATION_TOL = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    trials: int = 20
    samples: int = 10_000  # calibration stream length
    steps: int = 4  # observation rounds per decay episode
    tau_plan: float = 0.7
    alpha: float = 0.3
    noise_flip: float = 0.1
    noise_sd: float = 0.8
    miscal_gamma: float = 1.0
    n_objects: int = 4
    stack_bias: float = 0.4
    max_retries: int = 3
    taus: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    refine: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        for name in ("trials", "samples", "steps", "max_retries", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not (0.0 < self.tau_plan < 1.0):
            raise ValueError(f"tau_plan must lie in (0, 1), got {self.tau_plan}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        for t in self.taus:
            if not (0.0 < t < 1.0):
                raise ValueError(f"sweep threshold must lie in (0, 1), got {t}")

    def noise(self, exact_reduction: bool = False) -> NoiseConfig:
        return NoiseConfig(
            base_flip_rate=self.noise_flip,
            logit_noise_sd=self.noise_sd,
            miscal_gamma=self.miscal_gamma,
            look_gain=self.alpha,
            push_gain=self.alpha,
            exact_reduction=exact_reduction,
        )


def config_from_file(path: str | Path) -> dict:
    """Load config overrides from a JSON file of field: value pairs."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    valid = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - valid
    if unknown:
        raise ValueError(f"unknown config fields in {path}: {sorted(unknown)}")
    if "taus" in doc:
        doc["taus"] = tuple(doc["taus"])
    return doc


@dataclass
class ExperimentReport:
    kind: str
    header: tuple[str, ...]
    rows: list[tuple]
    summary: dict


# ---------------------------------------------------------------------------
# statistics


def wilson_ci(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    if not (0 <= successes <= trials):
        raise ValueError(f"successes must lie in [0, {trials}], got {successes}")
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = p + z2 / (2.0 * trials)
    margin = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
    # at p in {0, 1} the margin equals the slack exactly; clamp the sqrt rounding
    return (max(0.0, (center - margin) / denom), min(1.0, (center + margin) / denom))


def unimodal_rise_fall(values: Sequence[float], tol: float = 1e-9) -> bool:
    """True when the sequence rises to an interior peak then falls away.

    Plateaus are tolerated; monotone sequences are not rise-then-fall.
    """
    vals = [float(v) for v in values]
    if len(vals) < 3:
        return False
    peak = max(range(len(vals)), key=lambda i: vals[i])
    rise = all(vals[i + 1] >= vals[i] - tol for i in range(peak))
    fall = all(vals[i + 1] <= vals[i] + tol for i in range(peak, len(vals) - 1))
    shaped = vals[peak] > vals[0] + tol and vals[peak] > vals[-1] + tol
    return rise and fall and shaped


def cohens_d(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Effect size with pooled sample (n-1) standard deviation."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(ys) < 2:
        raise ValueError("both samples need at least 2 values")
    var_x = float(np.var(xs, ddof=1))
    var_y = float(np.var(ys, ddof=1))
    pooled = math.sqrt(
        ((len(xs) - 1) * var_x + (len(ys) - 1) * var_y) / (len(xs) + len(ys) - 2)
    )
    if pooled == 0.0:
        raise ValueError("pooled standard deviation is zero; effect size undefined")
    return (float(xs.mean()) - float(ys.mean())) / pooled


# ---------------------------------------------------------------------------
# per-trial seeding


def _trial_seeds(config_seed: int, setting_idx: int, trial_idx: int) -> tuple[int, int]:
    ss = np.random.SeedSequence([config_seed, setting_idx, trial_idx])
    scene_seed, perception_seed = ss.generate_state(2, np.uint32)
    return int(scene_seed), int(perception_seed)


def default_goal(scene) -> Goal:
    """Deterministic three-object restacking goal for benchmark episodes."""
    ids = scene.object_ids()
    a, b, c = ids[0], ids[1], ids[2]
    return Goal(
        frozenset(
            {
                GroundPredicate(Relation.ON, (a, b)),
                GroundPredicate(Relation.ON, (b, c)),
            }
        )
    )


def _decay_trace(
    scene, cfg: NoiseConfig, perception_seed: int, *,
    steps: int | None = None,
    tau_plan: float | None = None,
    step_cap: int | None = None,
) -> tuple[list[float], int]:
    """Full-attention observation sweeps: U trace and info-round count.

    Each round focuses every object once and re-observes, so the
    per-predicate reduction law applies to the whole state.  Runs a fixed
    number of rounds, or until no predicate stays uncertain at tau_plan
    (bounded by step_cap).
    """
    env = PlanningEnvironment(scene, cfg, perception_seed)
    belief = env.observe()
    trace = [state_uncertainty_independent(belief)]
    rounds = 0
    while True:
        if steps is not None and rounds >= steps:
            break
        if tau_plan is not None:
            if not classify(belief, tau_plan).uncertain:
                break
            if step_cap is not None and rounds >= step_cap:
                break
        for obj in env.object_ids():
            env.apply_info("look_closer", obj)
        belief = fuse_observation(belief, env.observe())
        trace.append(state_uncertainty_independent(belief))
        rounds += 1
    return trace, rounds


# ---------------------------------------------------------------------------
# experiment units (module-level for process pools)


def _calibration_unit(config: ExperimentConfig, trial_idx: int):
    scene_seed, perception_seed = _trial_seeds(config.seed, 0, trial_idx)
    scene = generate_scene(config.n_objects, config.stack_bias, scene_seed)
    state, labels = perceive_with_labels(scene, config.noise(), perception_seed)
    return [(p, labels[pred]) for pred, p in state.items()]


def _alpha_unit(config: ExperimentConfig, trial_idx: int):
    scene_seed, perception_seed = _trial_seeds(config.seed, 0, trial_idx)
    scene = generate_scene(config.n_objects, config.stack_bias, scene_seed)
    trace, rounds = _decay_trace(
        scene, config.noise(exact_reduction=True), perception_seed, steps=config.steps
    )
    n_objs = len(scene.object_ids())
    modeled = 2.0 + 1.5 * (rounds + 1) + 4.0 * rounds * n_objs
    return trace, modeled


def _convergence_unit(config: ExperimentConfig, trial_idx: int):
    scene_seed, perception_seed = _trial_seeds(config.seed, 0, trial_idx)
    scene = generate_scene(config.n_objects, config.stack_bias, scene_seed)
    cfg = config.noise(exact_reduction=True)
    env = PlanningEnvironment(scene, cfg, perception_seed)
    u0 = state_uncertainty_independent(env.observe())
    k_bound = convergence_bound(config.tau_plan, config.alpha, u0)
    trace, k_emp = _decay_trace(
        scene, cfg, perception_seed, tau_plan=config.tau_plan, step_cap=k_bound + 2
    )
    return u0, k_emp, k_bound, trace


def _sweep_unit(config: ExperimentConfig, setting_idx: int, trial_idx: int):
    scene_seed, perception_seed = _trial_seeds(config.seed, setting_idx, trial_idx)
    scene = generate_scene(config.n_objects, config.stack_bias, scene_seed)
    env = PlanningEnvironment(scene, config.noise(), perception_seed)
    episode = plan_under_uncertainty(
        env,
        default_goal(scene),
        tau_plan=config.taus[setting_idx],
        max_retries=config.max_retries,
        options=PlannerOptions(refine_with_mrf=config.refine),
    )
    return int(episode.success), episode.modeled_time_ms


def _benchmark_unit(config: ExperimentConfig, trial_idx: int):
    scene_seed, perception_seed = _trial_seeds(config.seed, 0, trial_idx)
    scene = generate_scene(config.n_objects, config.stack_bias, scene_seed)
    out = []
    for policy, info_enabled in (("info_on", True), ("info_off", False)):
        env = PlanningEnvironment(scene, config.noise(), perception_seed)
        episode = plan_under_uncertainty(
            env,
            default_goal(scene),
            tau_plan=config.tau_plan,
            max_retries=config.max_retries,
            options=PlannerOptions(refine_with_mrf=config.refine, info_enabled=info_enabled),
        )
        out.append(
            (
                policy,
                int(episode.success),
                episode.info_action_count,
                len(episode.plan) if episode.plan is not None else -1,
                len(episode.iterations),
                episode.modeled_time_ms,
            )
        )
    return out


def _binary_entropy(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)


def _mrf_unit(config: ExperimentConfig, trial_idx: int):
    scene_seed, _ = _trial_seeds(config.seed, 0, trial_idx)
    rng = np.random.default_rng([scene_seed, trial_idx])
    n = int(rng.integers(2, 11))
    preds = tuple(GroundPredicate(Relation.CLEAR, (f"n{k:02d}",)) for k in range(n))
    confs = rng.uniform(0.05, 0.95, size=n)
    unary = np.array([unary_potentials(float(p)) for p in confs])
    edges = []
    if rng.uniform() >= 0.15:  # keep some graphs edgeless for the equality case
        order = rng.permutation(n)
        pairs = set()
        for idx in range(1, n):
            a, b = int(order[idx]), int(order[int(rng.integers(idx))])
            pairs.add((min(a, b), max(a, b)))
        for _ in range(int(rng.integers(0, n // 2 + 1))):  # chords close cycles
            a, b = rng.choice(n, size=2, replace=False)
            pairs.add((int(min(a, b)), int(max(a, b))))
        for i, j in sorted(pairs):
            rho = float(rng.uniform(0.1, 0.7)) * (1 if rng.uniform() < 0.5 else -1)
            edges.append(correlation_edge(i, j, rho))
    mrf = PredicateMrf(preds, unary, tuple(edges))
    exact = enumerate_beliefs(mrf)
    bp = loopy_bp(mrf)
    max_dev = float(np.max(np.abs(bp.node_marginals - exact.node_marginals)))
    u_dep = conditional_uncertainty(exact, mrf)
    # baseline uses the joint's own marginals so edgeless graphs land on
    # exact equality (conditioning on nothing changes nothing)
    u_indep = sum(_binary_entropy(float(p)) for p in exact.node_marginals[:, 1])
    return n, len(edges), int(bp.converged), max_dev, u_dep, u_indep


def _run_unit(args):
    config, setting_idx, trial_idx = args
    if config.kind == "calibration":
        return _calibration_unit(config, trial_idx)
    if config.kind == "alpha-fit":
        return _alpha_unit(config, trial_idx)
    if config.kind == "convergence":
        return _convergence_unit(config, trial_idx)
    if config.kind == "threshold-sweep":
        return _sweep_unit(config, setting_idx, trial_idx)
    if config.kind == "plan-benchmark":
        return _benchmark_unit(config, trial_idx)
    return _mrf_unit(config, trial_idx)


def _map_units(config: ExperimentConfig, units: list[tuple]) -> list:
    args = [(config, s, t) for s, t in units]
    if config.workers == 1:
        return [_run_unit(a) for a in args]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(_run_unit, args, chunksize=max(1, len(args) // (4 * config.workers))))


# ---------------------------------------------------------------------------
# experiment drivers


def _predicates_per_scene(n_objects: int) -> int:
    return n_objects + 3 * n_objects * (n_objects - 1)


def _run_calibration(config: ExperimentConfig) -> ExperimentReport:
    per_scene = _predicates_per_scene(config.n_objects)
    n_scenes = math.ceil(config.samples / per_scene)
    results = _map_units(config, [(0, t) for t in range(n_scenes)])
    pairs = [pair for chunk in results for pair in chunk][: config.samples]
    batch = PredictionBatch([p for p, _ in pairs], [y for _, y in pairs])
    rel = reliability_report(batch)
    summary = {
        "n_samples": len(pairs),
        "n_scenes": n_scenes,
        "ece": rel.ece,
        "mce": rel.mce,
        "brier": rel.brier,
        "verdict": calibration_verdict(rel, 0.02),
        "miscal_gamma": config.miscal_gamma,
        "modeled_time_ms": 1.0 + 0.01 * len(pairs),
        "checks": {
            "ece_within_tol": rel.ece <= 0.02,
            "brier_within_tol": rel.brier <= 0.26,
        },
    }
    rows = [(float(p), int(y)) for p, y in pairs]
    return ExperimentReport("calibration", ("confidence", "label"), rows, summary)


def _run_alpha_fit(config: ExperimentConfig) -> ExperimentReport:
    results = _map_units(config, [(0, t) for t in range(config.trials)])
    rows = []
    traces = []
    modeled_total = 0.0
    for episode_id, (trace, modeled) in enumerate(results):
        traces.append(trace)
        modeled_total += modeled
        for step, u in enumerate(trace):
            rows.append((episode_id, step, float(u), "observe" if step == 0 else "look_closer"))
    fit = fit_alpha_pooled(traces)
    summary = {
        "alpha_configured": config.alpha,
        "alpha_hat": fit.alpha_hat,
        "r_squared": fit.r_squared,
        "n_episodes": len(traces),
        "n_dropped": fit.n_dropped,
        "steps_per_episode": config.steps,
        "modeled_time_ms": modeled_total,
        "checks": {
            "alpha_within_band": abs(fit.alpha_hat - config.alpha) <= 0.05,
            "r_squared_ok": fit.r_squared >= 0.85,
        },
    }
    return ExperimentReport(
        "alpha-fit", ("episode_id", "step", "U", "action_kind"), rows, summary
    )


def _run_convergence(config: ExperimentConfig) -> ExperimentReport:
    results = _map_units(config, [(0, t) for t in range(config.trials)])
    rows = []
    within = 0
    within_plus_one = 0
    gaps = []
    for trial_idx, (u0, k_emp, k_bound, _) in enumerate(results):
        gap_pct = 100.0 * (k_bound - k_emp) / k_bound if k_bound > 0 else 0.0
        rows.append((trial_idx, float(u0), int(k_emp), int(k_bound), float(gap_pct)))
        within += k_emp <= k_bound
        within_plus_one += k_emp <= k_bound + 1
        gaps.append(gap_pct)
    summary = {
        "n_trials": len(rows),
        "alpha": config.alpha,
        "tau_plan": config.tau_plan,
        "frac_within_bound": within / len(rows),
        "frac_within_bound_plus_one": within_plus_one / len(rows),
        "mean_gap_pct": float(np.mean(gaps)),
        "mean_k_empirical": float(np.mean([r[2] for r in rows])),
        "mean_k_bound": float(np.mean([r[3] for r in rows])),
        "modeled_time_ms": sum(2.0 + 5.5 * r[2] for r in rows),
        "checks": {"all_within_bound_plus_one": within_plus_one == len(rows)},
    }
    return ExperimentReport(
        "convergence", ("trial", "u0", "k_empirical", "k_bound", "gap_pct"), rows, summary
    )


def _run_threshold_sweep(config: ExperimentConfig) -> ExperimentReport:
    units = [(s, t) for s in range(len(config.taus)) for t in range(config.trials)]
    results = _map_units(config, units)
    rows = []
    samples = []
    for setting_idx, tau in enumerate(config.taus):
        chunk = [
            results[i] for i, (s, _) in enumerate(units) if s == setting_idx
        ]
        successes = sum(r[0] for r in chunk)
        mean_ms = float(np.mean([r[1] for r in chunk]))
        rate = successes / len(chunk)
        rows.append((float(tau), float(rate), mean_ms, len(chunk)))
        samples.append(SweepSample(float(tau), rate, mean_ms, len(chunk)))
    summary: dict = {
        "n_trials_per_tau": config.trials,
        "tau_grid": list(config.taus),
        "modeled_time_ms": float(sum(r[2] * r[3] for r in rows)),
    }
    try:
        s_fit = fit_success(samples, "exponential")
        t_fit = fit_time(samples, "linear")
        optimum = optimize_threshold(s_fit, t_fit)
        shortcut = lambert_optimum(s_fit)
        summary.update(
            {
                "success_fit": {
                    "form": s_fit.form,
                    "params": list(s_fit.params),
                    "r_squared": s_fit.r_squared,
                },
                "time_fit": {
                    "form": t_fit.form,
                    "params": list(t_fit.params),
                    "r_squared": t_fit.r_squared,
                },
                "tau_star_numeric": optimum.tau,
                "tau_star_at_endpoint": optimum.at_endpoint,
                "efficiency_at_optimum": optimum.efficiency,
                "tau_star_one_over_rate": shortcut,
                "tau_reference_nominal": REFERENCE_OPERATING_TAU,
                # three candidate operating points rarely coincide; flag it
                "reference_points_consistent": (
                    abs(optimum.tau - REFERENCE_OPERATING_TAU) <= 0.02
                    and abs(optimum.tau - shortcut) <= 0.02
                ),
                "plateau_relative_change": plateau_relative_change(s_fit),
                "checks": {
                    "unimodal_rise_fall": unimodal_rise_fall([r[1] for r in rows]),
                    "exponential_fit_ok": s_fit.r_squared >= 0.85,
                },
            }
        )
    except (FitError, ValueError) as err:
        summary["fit_error"] = str(err)
        summary["checks"] = {"unimodal_rise_fall": False, "exponential_fit_ok": False}
    return ExperimentReport(
        "threshold-sweep", ("tau", "success_rate", "mean_time_ms", "trials"), rows, summary
    )


def _run_plan_benchmark(config: ExperimentConfig) -> ExperimentReport:
    results = _map_units(config, [(0, t) for t in range(config.trials)])
    rows = []
    on_successes = off_successes = 0
    on_times, off_times, on_infos = [], [], []
    for trial_idx, pair in enumerate(results):
        for policy, success, infos, plan_len, rounds, modeled in pair:
            rows.append((trial_idx, policy, success, infos, plan_len, rounds, modeled))
            if policy == "info_on":
                on_successes += success
                on_times.append(modeled)
                on_infos.append(infos)
            else:
                off_successes += success
                off_times.append(modeled)
    n = len(results)
    try:
        time_effect = cohens_d(on_times, off_times)
    except ValueError:  # degenerate: all modeled times equal
        time_effect = None
    summary = {
        "n_trials": n,
        "success_rate_info_on": on_successes / n,
        "success_rate_info_off": off_successes / n,
        "wilson_info_on": list(wilson_ci(on_successes, n)),
        "wilson_info_off": list(wilson_ci(off_successes, n)),
        "mean_info_actions": float(np.mean(on_infos)),
        "mean_time_ms_info_on": float(np.mean(on_times)),
        "mean_time_ms_info_off": float(np.mean(off_times)),
        "time_effect_cohens_d": time_effect,
        "modeled_time_ms": float(np.sum(on_times) + np.sum(off_times)),
        "checks": {"info_gathering_helps": on_successes > off_successes},
    }
    return ExperimentReport(
        "plan-benchmark",
        ("trial", "policy", "success", "info_actions", "plan_length", "rounds", "modeled_time_ms"),
        rows,
        summary,
    )


def _run_mrf_check(config: ExperimentConfig) -> ExperimentReport:
    results = _map_units(config, [(0, t) for t in range(config.trials)])
    rows = []
    ok = 0
    tightened = 0
    equality_matches_edges = 0
    edgeless = 0
    for trial_idx, (n, n_edges, converged, max_dev, u_dep, u_indep) in enumerate(results):
        rows.append((trial_idx, n, n_edges, converged, float(max_dev), float(u_dep), float(u_indep)))
        ok += converged and max_dev <= BP_DEVIATION_TOL
        tightened += u_dep <= u_indep + 1e-9
        equal = abs(u_dep - u_indep) <= 1e-9
        equality_matches_edges += equal == (n_edges == 0)
        edgeless += n_edges == 0
    summary = {
        "n_trials": len(rows),
        "frac_converged_within_tol": ok / len(rows),
        "deviation_tol": BP_DEVIATION_TOL,
        "frac_tightened": tightened / len(rows),
        "n_edgeless": edgeless,
        "mean_max_marginal_dev": float(np.mean([r[4] for r in rows])),
        "modeled_time_ms": sum(1.0 + 0.5 * r[1] for r in rows),
        "checks": {
            "tightening_holds": tightened == len(rows),
            "equality_iff_edgeless": equality_matches_edges == len(rows),
        },
    }
    return ExperimentReport(
        "mrf-check",
        ("trial", "n_nodes", "n_edges", "converged", "max_marginal_dev", "u_dep", "u_indep"),
        rows,
        summary,
    )


_DRIVERS = {
    "calibration": _run_calibration,
    "alpha-fit": _run_alpha_fit,
    "convergence": _run_convergence,
    "threshold-sweep": _run_threshold_sweep,
    "plan-benchmark": _run_plan_benchmark,
    "mrf-check": _run_mrf_check,
}


def run(config: ExperimentConfig) -> ExperimentReport:
    """Execute one experiment; deterministic in the config."""
    return _DRIVERS[config.kind](config)


# ---------------------------------------------------------------------------
# export


def _fmt_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def _sanitize(value):
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(format(float(value), ".9g"))
    return value


def rows_to_csv(header: Iterable[str], rows: Iterable[tuple]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def summary_to_json(summary: dict) -> str:
    return json.dumps(_sanitize(summary), indent=2, sort_keys=True) + "\n"


def export(report: ExperimentReport, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write a report's rows and summary; returns the created paths."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt == "csv":
        rows_path = out / f"{report.kind}_rows.csv"
        rows_path.write_text(rows_to_csv(report.header, report.rows))
        paths.append(rows_path)
        summary_path = out / f"{report.kind}_summary.json"
        summary_path.write_text(summary_to_json(report.summary))
        paths.append(summary_path)
    else:
        doc = {
            "kind": report.kind,
            "header": list(report.header),
            "rows": [list(r) for r in report.rows],
            "summary": report.summary,
        }
        path = out / f"{report.kind}.json"
        path.write_text(json.dumps(_sanitize(doc), indent=2, sort_keys=True) + "\n")
        paths.append(path)
    return paths


def generate_scene_files(
    count: int, n_objects: int, stack_bias: float, seed: int, out_dir: str | Path
) -> list[Path]:
    """Write a batch of seeded scene JSON files."""
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(count):
        scene_seed, _ = _trial_seeds(seed, 0, k)
        scene = generate_scene(n_objects, stack_bias, scene_seed)
        path = out / f"scene_{seed}_{k:04d}.json"
        path.write_text(scene_to_json(scene) + "\n")
        paths.append(path)
    return paths
