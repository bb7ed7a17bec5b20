"""Config-driven experiment runner: builds games, runs solvers, emits CSV reports.

A run executes one solver over a list of seeds, writes one trajectory CSV
and one policy JSON per seed plus ``summary.csv``, and renders the curves
to a figure alongside the delimited output.  Configs are JSON with a
strict schema: unknown keys are errors, not warnings, so hyperparameter
typos cannot silently invalidate a reproduction.  Identical config and
seed produce byte-identical CSV output.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .density import (JointPolicy, density_from_json, density_to_json,
                      kl)
from .dynamics import (CSV_HEADER, DynamicsConfig, Trajectory,
                       write_trajectory_csv)
from .dynamics import run_dynamics
from .equilibrium import cross_play, qre_solve, soft_optimal
from .errors import ConfigError
from .games import (MatrixGame, TabularSG, bilinear_kernel, chain_mdp,
                    load_matrix_game, load_tabular_sg, matching_pennies,
                    polynomial_kernel, random_zero_sum, rock_paper_scissors,
                    saddle_kernel, single_state_sg)
from .param_policy import (ParamTrainConfig, discretize_policy, train)
from .tabular import Algorithm1Config, run_algorithm1
from .density import Support

SOLVERS = ("dynamics", "algorithm1", "param_policy")
THREADS_ENV = "PORL_DYN_THREADS"


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _dataclass_from(obj: dict, cls, where: str):
    fields = {f.name for f in dataclasses.fields(cls)}
    _check_keys(obj, fields, where)
    try:
        return cls(**obj)
    except TypeError as exc:
        raise ConfigError(f"bad {where} payload: {exc}")


# ---------------------------------------------------------------------------
# game registry

MATRIX_GAMES = {
    "matching_pennies": (matching_pennies, set()),
    "rock_paper_scissors": (rock_paper_scissors, set()),
    "random_zero_sum": (random_zero_sum, {"d1", "d2", "seed", "r_max"}),
}

KERNEL_GAMES = {
    "bilinear": (bilinear_kernel, {"dim", "scale", "half_width"}),
    "saddle": (saddle_kernel,
               {"dim", "scale", "center_1", "center_2", "half_width"}),
    "polynomial": (polynomial_kernel, {"terms", "half_width"}),
}

TABULAR_GAMES = {
    "chain": (chain_mdp, {"n_states", "gamma", "goal_reward"}),
}


def continuous_objectives(name: str, params: dict):
    """1-D single-agent objectives for the parametric solver."""
    if name == "quadratic_well":
        _check_keys(params, {"center", "scale"}, f"objective {name!r}")
        c = float(params.get("center", 0.0))
        s = float(params.get("scale", 1.0))
        return (lambda a: -s * ((a - c) ** 2).sum(axis=-1),
                lambda a: -2.0 * s * (a - c))
    raise ConfigError(f"unknown continuous objective {name!r}")


def build_game(spec: dict):
    """Resolve a game spec {name, ...params} or {path, type} to a game object."""
    if not isinstance(spec, dict):
        raise ConfigError("game spec must be an object")
    if "path" in spec:
        _check_keys(spec, {"path", "type"}, "game spec")
        path = Path(spec["path"])
        if not path.exists():
            raise ConfigError(f"game file does not exist: {path}")
        kind = spec.get("type", "matrix")
        if kind == "matrix":
            return load_matrix_game(path)
        if kind == "tabular":
            return load_tabular_sg(path)
        raise ConfigError(f"unknown game file type {kind!r}")
    if "name" not in spec:
        raise ConfigError("game spec needs a 'name' or a 'path'")
    name = spec["name"]
    params = {k: v for k, v in spec.items() if k != "name"}
    if name in MATRIX_GAMES:
        builder, allowed = MATRIX_GAMES[name]
        _check_keys(params, allowed, f"game {name!r}")
        return builder(**params)
    if name in KERNEL_GAMES:
        builder, allowed = KERNEL_GAMES[name]
        _check_keys(params, allowed | {"resolution"}, f"game {name!r}")
        resolution = params.pop("resolution", None)
        if resolution is None:
            raise ConfigError(f"kernel game {name!r} needs a 'resolution'")
        return builder(**params).discretize(resolution)
    if name in TABULAR_GAMES:
        builder, allowed = TABULAR_GAMES[name]
        _check_keys(params, allowed, f"game {name!r}")
        return builder(**params)
    raise ConfigError(f"unknown game {name!r}")


def build_game_for(config: "ExperimentConfig"):
    """Build the config's game, adapted to its solver."""
    if config.solver == "param_policy":
        return None  # the objective registry is resolved inside the run
    game = build_game(config.game_spec)
    if config.solver == "algorithm1" and isinstance(game, MatrixGame):
        game = single_state_sg(game)
    if config.solver == "dynamics" and isinstance(game, TabularSG):
        raise ConfigError("the dynamics solver needs a matrix/kernel game")
    return game


# ---------------------------------------------------------------------------
# experiment config

@dataclass(frozen=True)
class ExperimentConfig:
    game_spec: dict
    solver: str
    payload: dict
    reference: str | dict
    output_dir: Path
    seeds: tuple[int, ...]
    raw: dict

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


TOP_KEYS = {"game", "solver", "dynamics", "algorithm1", "param_policy",
            "reference", "output_dir", "seeds"}


def parse_config(obj: dict) -> ExperimentConfig:
    _check_keys(obj, TOP_KEYS, "config")
    solver = obj.get("solver")
    if solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}, got {solver!r}")
    payload_keys = [k for k in SOLVERS if k in obj]
    if payload_keys != [solver]:
        raise ConfigError(
            f"config must carry exactly the payload section {solver!r}")
    if "game" not in obj:
        raise ConfigError("config needs a 'game' section")
    seeds = obj.get("seeds")
    if not isinstance(seeds, list) or not seeds or \
            not all(isinstance(s, int) for s in seeds):
        raise ConfigError("'seeds' must be a non-empty list of integers")
    reference = obj.get("reference", "none")
    if isinstance(reference, dict):
        _check_keys(reference, {"path"}, "reference")
        if not Path(reference["path"]).exists():
            raise ConfigError(f"reference path does not exist: {reference['path']}")
    elif reference not in ("qre", "none"):
        raise ConfigError("reference must be 'qre', 'none' or {'path': ...}")
    if "output_dir" not in obj:
        raise ConfigError("config needs an 'output_dir'")
    return ExperimentConfig(
        game_spec=obj["game"],
        solver=solver,
        payload=dict(obj[solver]),
        reference=reference,
        output_dir=Path(obj["output_dir"]),
        seeds=tuple(seeds),
        raw=obj,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file does not exist: {path}")
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
    return parse_config(obj)


# ---------------------------------------------------------------------------
# reference resolution

def _resolve_reference(config: ExperimentConfig, game, alpha: float,
                       fallback_alpha: float | None = None):
    ref = config.reference
    if ref == "none":
        return None
    if isinstance(ref, dict):
        return load_joint_policy(ref["path"])
    # 'qre': solve at the run's temperature; zero-temperature runs fall back
    # to the first positive alpha available so the reference stays defined
    a = alpha if alpha > 0 else (fallback_alpha or 0.0)
    if a <= 0:
        raise ConfigError("reference 'qre' needs a positive alpha somewhere")
    if config.solver == "dynamics":
        return qre_solve(game, a).policy
    if config.solver == "algorithm1":
        if game.n_states == 1 and game.gamma == 0.0:
            mg = game.state_game(game.rewards[0])
            sol = qre_solve(mg, a)
            return {game.states[0]: sol.policy}
        raise ConfigError(
            "reference 'qre' for tabular games is only defined for "
            "single-state gamma=0 games; supply a reference path instead")
    # param_policy: the discretized soft-optimal density of the objective
    resolution = config.payload.get("reference_resolution", 512)
    support = Support.box([(-1.0, 1.0)], resolution)
    q_fn, _ = continuous_objectives(
        config.game_spec.get("name", ""),
        {k: v for k, v in config.game_spec.items() if k != "name"})
    return soft_optimal(q_fn(support.centers), a, support)


# ---------------------------------------------------------------------------
# running

@dataclass(frozen=True)
class RunReport:
    config_hash: str
    output_dir: Path
    seed_csvs: dict[int, Path]
    final_kl_mean: float
    final_kl_se: float
    final_expl_mean: float
    final_expl_se: float
    warnings: tuple[str, ...] = ()


def _mean_se(xs: list[float]) -> tuple[float, float]:
    arr = np.asarray(xs, dtype=float)
    mean = float(arr.mean())
    se = 0.0 if arr.size == 1 else float(arr.std(ddof=1) / np.sqrt(arr.size))
    return mean, se


def _max_workers(n_jobs: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer")
        if cap < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        return min(cap, n_jobs)
    return min(n_jobs, os.cpu_count() or 1)


def _run_one_seed(config: ExperimentConfig, game, reference,
                  seed: int) -> Trajectory:
    if config.solver == "dynamics":
        if not isinstance(game, MatrixGame):
            raise ConfigError("the dynamics solver needs a matrix/kernel game")
        dyn = _dataclass_from({**config.payload, "seed": seed},
                              DynamicsConfig, "dynamics")
        return run_dynamics(game, dyn, reference=reference)
    if config.solver == "algorithm1":
        cfg = _dataclass_from(config.payload, Algorithm1Config, "algorithm1")
        _, _, traj = run_algorithm1(game, cfg, reference=reference)
        return traj
    return _run_param_seed(config, reference, seed)


def _run_param_seed(config: ExperimentConfig, reference,
                    seed: int) -> Trajectory:
    payload = dict(config.payload)
    resolution = payload.pop("reference_resolution", 512)
    cfg = _dataclass_from({**payload, "seed": seed}, ParamTrainConfig,
                          "param_policy")
    if cfg.action_dim != 1:
        raise ConfigError("harness param runs are 1-D (reference is a 1-D grid)")
    name = config.game_spec.get("name", "")
    params = {k: v for k, v in config.game_spec.items() if k != "name"}
    q_fn, q_grad = continuous_objectives(name, params)
    support = Support.box([(-1.0, 1.0)], resolution)
    grid_q = q_fn(support.centers)
    if isinstance(reference, tuple):
        # a saved single-player policy file loads as a 1-tuple
        if len(reference) != 1:
            raise ConfigError("param_policy reference must be single-player")
        reference = reference[0]
    if reference is not None and not reference.support.matches(support):
        raise ConfigError(
            "param_policy reference must live on the run's (-1,1) grid "
            f"at resolution {resolution}")

    from .dynamics import TrajectoryPoint
    from .density import entropy as density_entropy

    points: list[TrajectoryPoint] = []

    def record(step: int, theta):
        disc = discretize_policy(theta, resolution)
        klr = kl(reference, disc) if reference is not None else float("nan")
        w = disc.values * support.measures
        exp_q = float((w * grid_q).sum())
        points.append(TrajectoryPoint(
            t=step, kl_ref=klr, exploitability=float(grid_q.max() - exp_q),
            entropy_1=density_entropy(disc), entropy_2=0.0, value=exp_q))

    from .param_policy import SquashedGaussian

    theta0 = SquashedGaussian(np.zeros(cfg.action_dim), np.zeros(cfg.action_dim))
    record(0, theta0)
    theta = train(q_fn, q_grad, cfg, theta0=theta0, callback=record)
    if points[-1].t != cfg.gradient_steps:
        record(cfg.gradient_steps, theta)
    final = (discretize_policy(theta, resolution),)
    return Trajectory(tuple(points), final, b_observed=float("nan"),
                      eta_bound=float("nan"), warnings=())


def run(config: ExperimentConfig) -> RunReport:
    """Execute the configured solver for every seed and write the reports.

    Writes ``seed_<s>.csv`` and ``seed_<s>_policy.json`` per seed, then
    ``summary.csv`` and a rendered ``curves.png``.  All validation happens
    before any output file is created.
    """
    game = build_game_for(config)
    alpha = float(config.payload.get("alpha", 0.0))
    reference = _resolve_reference(config, game, alpha)
    config.output_dir.mkdir(parents=True, exist_ok=True)

    def job(seed: int):
        traj = _run_one_seed(config, game, reference, seed)
        csv_path = config.output_dir / f"seed_{seed}.csv"
        write_trajectory_csv(traj, csv_path)
        _write_policy_json(traj.final_policy,
                           config.output_dir / f"seed_{seed}_policy.json")
        return seed, csv_path, traj

    with ThreadPoolExecutor(max_workers=_max_workers(len(config.seeds))) as ex:
        results = list(ex.map(job, config.seeds))
    results.sort(key=lambda r: config.seeds.index(r[0]))

    final_kl = [t.points[-1].kl_ref for _, _, t in results]
    final_expl = [t.points[-1].exploitability for _, _, t in results]
    kl_mean, kl_se = _mean_se(final_kl)
    expl_mean, expl_se = _mean_se(final_expl)
    warnings = tuple(w for _, _, t in results for w in t.warnings)

    summary = config.output_dir / "summary.csv"
    with open(summary, "w") as fh:
        fh.write("config_hash,n_seeds,final_kl_mean,final_kl_se,"
                 "final_exploitability_mean,final_exploitability_se\n")
        fh.write(f"{config.config_hash},{len(config.seeds)},{kl_mean!r},"
                 f"{kl_se!r},{expl_mean!r},{expl_se!r}\n")

    seed_tables = {s: load_trajectory_csv(p) for s, p, _ in results}
    plotting.plot_run_curves(seed_tables, config.output_dir / "curves.png")

    return RunReport(
        config_hash=config.config_hash,
        output_dir=config.output_dir,
        seed_csvs={s: p for s, p, _ in results},
        final_kl_mean=kl_mean, final_kl_se=kl_se,
        final_expl_mean=expl_mean, final_expl_se=expl_se,
        warnings=warnings,
    )


SWEEPABLE = {
    "dynamics": {f.name for f in dataclasses.fields(DynamicsConfig)},
    "algorithm1": {f.name for f in dataclasses.fields(Algorithm1Config)},
    "param_policy": {f.name for f in dataclasses.fields(ParamTrainConfig)},
}


def sweep(base: ExperimentConfig, axis: str, values: list) -> list[RunReport]:
    """One run per axis value; writes ``sweep_<axis>.csv`` plus a figure.

    The final metric is the KL to the reference when one is configured,
    else the exploitability.
    """
    allowed = SWEEPABLE[base.solver] - {"seed"}
    if axis not in allowed:
        raise ConfigError(
            f"unknown sweep axis {axis!r} for solver {base.solver!r}; "
            f"choose one of {sorted(allowed)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    base_alpha = float(base.payload.get("alpha", 0.0))
    positive_alphas = [base_alpha] if base_alpha > 0 else []
    if axis == "alpha":
        positive_alphas += [float(v) for v in values if float(v) > 0]
    fallback_alpha = min(positive_alphas) if positive_alphas else None

    reports = []
    rows = []
    for value in values:
        raw = json.loads(json.dumps(base.raw))
        raw[base.solver][axis] = value
        raw["output_dir"] = str(Path(base.raw["output_dir"]) / f"{axis}_{value}")
        cfg = parse_config(raw)
        game = build_game_for(cfg)
        alpha = float(cfg.payload.get("alpha", 0.0))
        reference = _resolve_reference(cfg, game, alpha,
                                       fallback_alpha=fallback_alpha)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)

        def job(seed, cfg=cfg, game=game, reference=reference):
            traj = _run_one_seed(cfg, game, reference, seed)
            path = cfg.output_dir / f"seed_{seed}.csv"
            write_trajectory_csv(traj, path)
            return seed, path, traj

        with ThreadPoolExecutor(max_workers=_max_workers(len(cfg.seeds))) as ex:
            results = list(ex.map(job, cfg.seeds))
        results.sort(key=lambda r: cfg.seeds.index(r[0]))
        finals = [t.points[-1] for _, _, t in results]
        metric = [p.kl_ref if reference is not None else p.exploitability
                  for p in finals]
        m_mean, m_se = _mean_se(metric)
        kl_mean, kl_se = _mean_se([p.kl_ref for p in finals])
        e_mean, e_se = _mean_se([p.exploitability for p in finals])
        rows.append((value, m_mean, m_se))
        reports.append(RunReport(
            config_hash=cfg.config_hash, output_dir=cfg.output_dir,
            seed_csvs={s: p for s, p, _ in results},
            final_kl_mean=kl_mean, final_kl_se=kl_se,
            final_expl_mean=e_mean, final_expl_se=e_se,
            warnings=tuple(w for _, _, t in results for w in t.warnings)))

    table = base.output_dir / f"sweep_{axis}.csv"
    base.output_dir.mkdir(parents=True, exist_ok=True)
    with open(table, "w") as fh:
        fh.write("axis_value,final_metric_mean,final_metric_se\n")
        for value, mean, se in rows:
            fh.write(f"{value},{mean!r},{se!r}\n")
    plotting.plot_sweep(axis, [float(v) for v, _, _ in rows],
                        [m for _, m, _ in rows], [s for _, _, s in rows],
                        base.output_dir / f"sweep_{axis}.png")
    return reports


# ---------------------------------------------------------------------------
# cross-play

def crossplay_report(game: MatrixGame, policies: dict[str, JointPolicy],
                     output_path) -> list[tuple[str, str, float]]:
    """Full pairwise cross-play table as CSV rows (row_alg, col_alg, score)."""
    if len(policies) < 2:
        raise ConfigError("cross-play needs at least two named policies")
    names = list(policies)
    rows = []
    for a in names:
        for b in names:
            if a == b:
                continue
            try:
                table = cross_play(game, policies[a], policies[b])
            except Exception as exc:
                raise type(exc)(f"cross-play failed for pair ({a}, {b}): {exc}")
            rows.append((a, b, float(table[0, 1])))
    if game.zero_sum:
        scores = {(a, b): s for a, b, s in rows}
        for (a, b), s in scores.items():
            if abs(s + scores[(b, a)]) > 1e-10:
                raise AssertionError(
                    f"zero-sum cross-play antisymmetry violated for ({a},{b})")
    with open(output_path, "w") as fh:
        fh.write("row_alg,col_alg,score_mean\n")
        for a, b, s in rows:
            fh.write(f"{a},{b},{s!r}\n")
    return rows


# ---------------------------------------------------------------------------
# report / policy IO

def load_trajectory_csv(path) -> dict[str, np.ndarray]:
    return load_csv(path, expected_header=CSV_HEADER)


def load_csv(path, expected_header: str | None = None) -> dict[str, np.ndarray]:
    """Parse a report CSV back into float columns (first column may be text)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty CSV: {path}")
    header = lines[0].split(",")
    if expected_header is not None and lines[0] != expected_header:
        raise ValueError(f"unexpected header in {path}: {lines[0]!r}")
    cols: dict[str, list] = {h: [] for h in header}
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError(f"ragged CSV row in {path}: {ln!r}")
        for h, val in zip(header, parts):
            try:
                cols[h].append(float(val))
            except ValueError:
                cols[h].append(val)
    return {
        h: (np.array(v) if v and isinstance(v[0], float) else v)
        for h, v in cols.items()
    }


def _write_policy_json(policy, path) -> None:
    with open(path, "w") as fh:
        json.dump(policy_to_json(policy), fh)


def policy_to_json(policy) -> dict:
    if isinstance(policy, dict):
        return {"states": {s: policy_to_json(j) for s, j in policy.items()}}
    return {"players": [density_to_json(d) for d in policy]}


def policy_from_json(obj: dict):
    if "states" in obj:
        return {s: policy_from_json(j) for s, j in obj["states"].items()}
    return tuple(density_from_json(d) for d in obj["players"])


def load_joint_policy(path):
    with open(path) as fh:
        return policy_from_json(json.load(fh))


def save_joint_policy(policy, path) -> None:
    _write_policy_json(policy, path)
