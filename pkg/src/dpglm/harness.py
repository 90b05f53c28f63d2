"""Experiment harness: instance generation, sweeps, and report summaries.

Configs are flat ``key=value`` text files (``#`` comments allowed; arrays as
comma lists). A run produces one CSV row per (axis point x seed) with the
fixed header

    algorithm,n,d,rank,epsilon,delta,b_used,seed,excess_risk,empirical_risk,runtime_ms,schedule_json

and is byte-reproducible given the config and seeds except for the
``runtime_ms`` column, which reports wall-clock time.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, save_dataset
from .instances import (
    PopulationOracle,
    design_rank,
    gen_lipschitz_hard,
    gen_regression,
    gen_smooth_hard,
    lipschitz_hard_auto_params,
    smooth_hard_auto_params,
)
from .losses import (
    GlmLoss,
    absolute_loss,
    empirical_risk,
    lipschitz_on_ball,
    scaled_squared_loss,
    squared_loss,
)
from .mechanisms import (
    NON_PRIVATE,
    PrivacyBudget,
    gaussian_sigma2_output_perturbation,
)
from .optim import jl_method, noisy_gd, output_perturbation
from .rng import RngHandle
from .schedules import flagship_grid_size, output_perturbation_lambda, schedule_noisy_gd
from .selection import boost, flagship_pipeline, make_base_algorithm, private_grid_search

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "RESULT_HEADER",
    "cmd_gen",
    "cmd_run",
    "cmd_report",
    "build_instance",
    "run_single",
]

RESULT_HEADER = [
    "algorithm",
    "n",
    "d",
    "rank",
    "epsilon",
    "delta",
    "b_used",
    "seed",
    "excess_risk",
    "empirical_risk",
    "runtime_ms",
    "schedule_json",
]

_KNOWN_ALGORITHMS = (
    "noisy-gd",
    "noisy-gd-nonprivate",
    "output-pert-smooth",
    "output-pert-lipschitz",
    "jl-smooth",
    "jl-lipschitz",
    "flagship",
)


@dataclass
class ExperimentConfig:
    instance: str = "regression"
    algorithm: str = "noisy-gd"
    loss: str = "squared"
    loss_h: float = 2.0
    n_values: tuple = (256,)
    d_values: tuple = (10,)
    epsilon_values: tuple = (1.0,)
    delta: float = 1e-5
    ball_radius: float | str = 1.0
    seeds: tuple = (0,)
    beta: float = 0.1
    threads: int = 1
    out: str | None = None
    max_grad_evals: float = 1e9
    # instance parameters
    w_star_norm: float = 1.0
    noise_std: float = 0.1
    x_bound: float = 1.0
    y_bound: float = 1.0
    signal_dim: int | None = None
    auto_adversarial: bool = True
    d_prime: int | None = None
    p_mass: float | None = None
    b_bias: float | None = None
    minimizer_norm: float = 1.0
    alpha_mass: float | None = None
    beta_shape: float | None = None
    comparator_norm: float = 1.0
    p_norm: float = 2.0
    raw: dict = field(default_factory=dict)


_BOOLS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_values(text: str) -> tuple:
    return tuple(float(v) if "." in v or "e" in v.lower() else int(v) for v in text.split(","))


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    cfg.raw = dict(pairs)

    def pop_float(key, default=None):
        return float(pairs.pop(key)) if key in pairs else default

    def pop_int(key, default=None):
        return int(pairs.pop(key)) if key in pairs else default

    cfg.instance = pairs.pop("instance", cfg.instance)
    cfg.algorithm = pairs.pop("algorithm", cfg.algorithm)
    cfg.loss = pairs.pop("loss", cfg.loss)
    cfg.loss_h = pop_float("loss_h", cfg.loss_h)
    if "n_list" in pairs:
        cfg.n_values = tuple(int(v) for v in pairs.pop("n_list").split(","))
    elif "n" in pairs:
        cfg.n_values = (int(pairs.pop("n")),)
    if "d_list" in pairs:
        cfg.d_values = tuple(int(v) for v in pairs.pop("d_list").split(","))
    elif "d" in pairs:
        cfg.d_values = (int(pairs.pop("d")),)
    if "epsilon_list" in pairs:
        cfg.epsilon_values = _parse_values(pairs.pop("epsilon_list"))
    elif "epsilon" in pairs:
        cfg.epsilon_values = (float(pairs.pop("epsilon")),)
    cfg.delta = pop_float("delta", cfg.delta)
    if "ball_radius" in pairs:
        raw = pairs.pop("ball_radius")
        cfg.ball_radius = raw if raw == "adaptive" else float(raw)
    if "seed_list" in pairs:
        cfg.seeds = tuple(int(v) for v in pairs.pop("seed_list").split(","))
    elif "seeds" in pairs:
        cfg.seeds = tuple(range(int(pairs.pop("seeds"))))
    cfg.beta = pop_float("beta", cfg.beta)
    cfg.threads = pop_int("threads", cfg.threads)
    cfg.out = pairs.pop("out", cfg.out)
    cfg.max_grad_evals = pop_float("max_grad_evals", cfg.max_grad_evals)
    cfg.w_star_norm = pop_float("w_star_norm", cfg.w_star_norm)
    cfg.noise_std = pop_float("noise_std", cfg.noise_std)
    cfg.x_bound = pop_float("x_bound", cfg.x_bound)
    cfg.y_bound = pop_float("y_bound", cfg.y_bound)
    cfg.signal_dim = pop_int("signal_dim", cfg.signal_dim)
    if "auto_adversarial" in pairs:
        cfg.auto_adversarial = _BOOLS[pairs.pop("auto_adversarial").lower()]
    cfg.d_prime = pop_int("d_prime", cfg.d_prime)
    cfg.p_mass = pop_float("p_mass", cfg.p_mass)
    cfg.b_bias = pop_float("b_bias", cfg.b_bias)
    cfg.minimizer_norm = pop_float("minimizer_norm", cfg.minimizer_norm)
    cfg.alpha_mass = pop_float("alpha_mass", cfg.alpha_mass)
    cfg.beta_shape = pop_float("beta_shape", cfg.beta_shape)
    cfg.comparator_norm = pop_float("comparator_norm", cfg.comparator_norm)
    cfg.p_norm = pop_float("p_norm", cfg.p_norm)
    if pairs:
        raise ValueError(f"unknown config keys: {sorted(pairs)}")
    if not cfg.n_values or not cfg.d_values or not cfg.epsilon_values or not cfg.seeds:
        raise ValueError("sweep axes and seeds must be non-empty")
    _check_compatibility(cfg)
    return cfg


def _check_compatibility(cfg: ExperimentConfig) -> None:
    algo = cfg.algorithm
    base = algo
    for prefix in ("boost(", "grid-search("):
        if algo.startswith(prefix) and algo.endswith(")"):
            base = algo[len(prefix) : -1]
    if base not in _KNOWN_ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")
    lipschitz_algos = {"output-pert-lipschitz", "jl-lipschitz"}
    if base in lipschitz_algos and cfg.loss != "absolute":
        raise ValueError(f"{base} requires the absolute loss")
    if base not in lipschitz_algos and cfg.loss == "absolute":
        raise ValueError(f"{base} requires a smooth loss")
    if cfg.ball_radius == "adaptive" and not (
        algo == "flagship" or algo.startswith("grid-search(")
    ):
        raise ValueError("ball_radius=adaptive needs flagship or grid-search(...)")


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def make_loss(cfg: ExperimentConfig, y_bound: float) -> GlmLoss:
    if cfg.loss == "squared":
        return squared_loss(y_bound)
    if cfg.loss == "scaled-squared":
        return scaled_squared_loss(cfg.loss_h, y_bound)
    if cfg.loss == "absolute":
        return absolute_loss(y_bound)
    raise ValueError(f"unknown loss {cfg.loss!r}")


def build_instance(
    cfg: ExperimentConfig, n: int, d: int, epsilon: float, rng: RngHandle
) -> tuple[Dataset, PopulationOracle, dict]:
    """Instantiate the configured generator at one axis point."""
    if cfg.instance == "regression":
        dataset, oracle = gen_regression(
            d, n, cfg.w_star_norm, cfg.noise_std, cfg.x_bound, rng, signal_dim=cfg.signal_dim
        )
        meta = {"generator": "regression", "w_star_norm": cfg.w_star_norm,
                "noise_std": cfg.noise_std, "signal_dim": cfg.signal_dim or d}
        return dataset, oracle, meta
    if cfg.instance == "smooth-hard":
        if cfg.auto_adversarial or cfg.d_prime is None:
            params = smooth_hard_auto_params(
                n, epsilon, d, cfg.x_bound, cfg.minimizer_norm, cfg.y_bound
            )
        else:
            params = {"d_prime": cfg.d_prime, "p_mass": cfg.p_mass, "b_bias": cfg.b_bias}
        signs = np.where(rng.uniform(size=params["d_prime"]) < 0.5, -1.0, 1.0)
        dataset, oracle, realized = gen_smooth_hard(
            params["d_prime"], params["p_mass"], params["b_bias"], signs,
            n, cfg.y_bound, cfg.x_bound, d=d,
        )
        meta = {"generator": "smooth-hard", **params, **realized}
        return dataset, oracle, meta
    if cfg.instance == "lipschitz-hard":
        if cfg.alpha_mass is None or cfg.beta_shape is None or cfg.d_prime is None:
            params = lipschitz_hard_auto_params(n, epsilon, d)
        else:
            params = {
                "d_prime": cfg.d_prime,
                "alpha_mass": cfg.alpha_mass,
                "beta_shape": cfg.beta_shape,
            }
        dataset, _, oracle = gen_lipschitz_hard(
            params["d_prime"], params["alpha_mass"], params["beta_shape"],
            cfg.comparator_norm, cfg.p_norm, n, cfg.x_bound, rng, d=d,
        )
        meta = {"generator": "lipschitz-hard", **params,
                "comparator_norm": cfg.comparator_norm, "p_norm": cfg.p_norm}
        return dataset, oracle, meta
    raise ValueError(f"unknown instance kind {cfg.instance!r}")


def estimate_gradient_evals(cfg: ExperimentConfig) -> float:
    """Coarse upper bound on per-point gradient evaluations for the guardrail.

    T = n full-batch sweeps (n^2 point gradients) dominate the simple paths,
    and the single-sample path runs n^2 steps; selection pipelines multiply
    the training calls by the candidate/chunk count.
    """
    cells = len(cfg.d_values) * len(cfg.epsilon_values) * len(cfg.seeds)
    total = 0.0
    for n in cfg.n_values:
        per_run = float(n) ** 2
        if cfg.algorithm == "flagship" or cfg.algorithm.startswith(("grid-search", "boost")):
            per_run *= 16
        total += per_run * cells
    return total


def run_single(
    cfg: ExperimentConfig, n: int, d: int, epsilon: float, seed: int, point_index: int
) -> dict:
    """Execute one (axis point, seed) cell and return the result row."""
    rng = RngHandle(seed, stream=point_index)
    data_rng, train_rng = rng.child(0), rng.child(1)
    start = time.perf_counter()
    dataset, oracle, _ = build_instance(cfg, n, d, epsilon, data_rng)
    loss = make_loss(cfg, dataset.y_bound)
    budget = (
        NON_PRIVATE
        if cfg.algorithm == "noisy-gd-nonprivate"
        else PrivacyBudget(epsilon, cfg.delta)
    )
    radius = cfg.ball_radius if cfg.ball_radius != "adaptive" else None
    model, b_used = _dispatch(cfg, loss, dataset, budget, radius, train_rng)
    runtime_ms = (time.perf_counter() - start) * 1000.0
    excess = oracle.excess(model.w)
    row = {
        "algorithm": cfg.algorithm,
        "n": n,
        "d": d,
        "rank": design_rank(dataset),
        "epsilon": budget.epsilon,
        "delta": budget.delta,
        "b_used": b_used,
        "seed": seed,
        "excess_risk": excess,
        "empirical_risk": model.diagnostics.get(
            "empirical_risk", empirical_risk(loss, model.w, dataset.features, dataset.labels)
        ),
        "runtime_ms": runtime_ms,
        "schedule_json": model.schedule.to_json(),
    }
    return row


def _dispatch(cfg, loss, dataset, budget, radius, rng):
    algo = cfg.algorithm
    if algo in ("noisy-gd", "noisy-gd-nonprivate"):
        schedule = schedule_noisy_gd(
            loss.effective_smoothness(dataset.x_bound),
            loss.y_norm,
            radius,
            dataset.n,
            dataset.d,
            budget,
        )
        return noisy_gd(loss, dataset, schedule, rng, budget=budget), radius
    if algo in ("output-pert-smooth", "output-pert-lipschitz"):
        variant = algo.rsplit("-", 1)[1]
        return output_perturbation(loss, dataset, radius, budget, variant, rng), radius
    if algo in ("jl-smooth", "jl-lipschitz"):
        variant = algo.rsplit("-", 1)[1]
        return jl_method(loss, dataset, radius, budget, variant, rng), radius
    if algo.startswith("boost(") and algo.endswith(")"):
        base = make_base_algorithm(algo[6:-1], loss, dataset.x_bound)
        model = boost(base, loss, dataset, radius, budget, cfg.beta, rng)
        return model, radius
    if algo.startswith("grid-search(") and algo.endswith(")"):
        grid = flagship_grid_size(loss, dataset.x_bound, dataset.n, budget.epsilon)
        inner = algo[12:-1]
        sigma2_for_bound = None
        if inner == "output-pert-smooth":
            per_candidate = (
                budget.split(2)[0].split(grid)[0] if budget.is_private else NON_PRIVATE
            )
            n_train = dataset.n // 2

            def sigma2_for_bound(radius):
                lam = output_perturbation_lambda(
                    loss, dataset.x_bound, radius, n_train, per_candidate, "smooth"
                )
                g = lipschitz_on_ball(loss, dataset.x_bound, radius)
                return gaussian_sigma2_output_perturbation(
                    g, dataset.x_bound, lam, n_train, per_candidate, "smooth"
                )

        base = make_base_algorithm(inner, loss, dataset.x_bound, grid_size=grid,
                                   sigma2_for_bound=sigma2_for_bound,
                                   bound_delta=min(budget.delta or cfg.beta, cfg.beta))
        model, report = private_grid_search(base, loss, dataset, grid, budget, cfg.beta, rng)
        return model, model.diagnostics["selected_ball"]
    if algo == "flagship":
        model, report = flagship_pipeline(loss, dataset, budget, cfg.beta, rng)
        return model, model.diagnostics["selected_ball"]
    raise ValueError(f"unknown algorithm {algo!r}")


def cmd_gen(config_path, out_path) -> Path:
    """Generate the configured instance (first axis point) and write CSV + metadata."""
    cfg = load_config(config_path)
    n, d, eps = cfg.n_values[0], cfg.d_values[0], cfg.epsilon_values[0]
    seed = cfg.seeds[0]
    rng = RngHandle(seed, stream=0).child(0)
    dataset, _, meta = build_instance(cfg, n, d, eps, rng)
    meta.update({"seed": seed, "rank": design_rank(dataset)})
    out = Path(out_path)
    save_dataset(dataset, out, meta)
    return out


def cmd_run(config_path, out_path=None, threads=None, base_seed=None) -> str:
    """Run the sweep and return the CSV text (also written to ``out`` if set)."""
    cfg = load_config(config_path)
    if threads is not None:
        cfg.threads = threads
    if base_seed is not None:
        cfg.seeds = tuple(int(base_seed) + s for s in range(len(cfg.seeds)))
    predicted = estimate_gradient_evals(cfg)
    if predicted > cfg.max_grad_evals:
        raise RuntimeError(
            f"sweep predicts {predicted:.3g} gradient evaluations, above the cap "
            f"{cfg.max_grad_evals:.3g}; raise max_grad_evals to proceed"
        )
    tasks = []
    index = 0
    for n in cfg.n_values:
        for d in cfg.d_values:
            for eps in cfg.epsilon_values:
                for seed in cfg.seeds:
                    tasks.append((n, d, eps, seed, index))
                    index += 1
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(lambda t: run_single(cfg, *t), tasks))
    else:
        rows = [run_single(cfg, *t) for t in tasks]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RESULT_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format_cell(row[k]) for k in RESULT_HEADER})
    text = buf.getvalue()
    target = out_path or cfg.out
    if target:
        Path(target).write_text(text)
    return text


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def cmd_report(csv_path, out_path=None) -> str:
    """Summarize a results CSV: median excess risk vs n and log-log slopes."""
    with open(csv_path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_HEADER:
            raise ValueError(
                f"unexpected CSV schema: {reader.fieldnames}; expected {RESULT_HEADER}"
            )
        rows = list(reader)
    groups: dict[tuple, dict[int, list[float]]] = {}
    for row in rows:
        key = (row["algorithm"], int(row["d"]), float(row["epsilon"]))
        groups.setdefault(key, {}).setdefault(int(row["n"]), []).append(
            float(row["excess_risk"])
        )
    lines = []
    summary_rows = []
    for key in sorted(groups, key=str):
        algorithm, d, epsilon = key
        by_n = groups[key]
        ns = sorted(by_n)
        medians = [float(np.median(by_n[n])) for n in ns]
        lines.append(f"[{algorithm} d={d} eps={epsilon:g}]")
        for n, med in zip(ns, medians):
            lines.append(f"  n={n}: median_excess={med:.6g}")
            summary_rows.append(
                {"algorithm": algorithm, "d": d, "epsilon": epsilon, "n": n, "median_excess": med}
            )
        if len(ns) >= 2 and all(m > 0 for m in medians):
            slope = float(np.polyfit(np.log(ns), np.log(medians), 1)[0])
            lines.append(f"  loglog_slope={slope:.4f}")
        else:
            slope = math.nan
            lines.append("  loglog_slope=undefined")
        for row in summary_rows:
            if row["algorithm"] == algorithm and row["d"] == d and row["epsilon"] == epsilon:
                row["loglog_slope"] = slope
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=["algorithm", "d", "epsilon", "n", "median_excess", "loglog_slope"],
                lineterminator="\n",
            )
            writer.writeheader()
            for row in summary_rows:
                writer.writerow(row)
    return text
