"""Benchmark scenarios and the driver that turns a config into CSV output."""

import configparser
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import report
from .integrators import PRESETS, dense_reference, diagnose, preset, run
from .lowrank import LowRankState, TruncationPolicy, evaluate
from .model import invariant_density
from .rte import Linesource2dModel, SlabRteModel, linesource_init, planesource_init
from .vlasov import VlasovModel, bump_on_tail_init

OUT_DIR_ENV = "CONSBUG_OUT_DIR"


@dataclass(frozen=True)
class Scenario:
    """Model size, time stepping and rank settings of one benchmark.

    Exactly one of ``cfl`` (``dt = model.cfl_dt(cfl)``) and ``dt`` is set.
    ``fixed_rank = (conservative, non_conservative)`` switches to fixed-rank
    runs (``theta_bar`` is then ignored). ``substeps`` overrides the K/L and
    S tableaus of every preset.
    """

    name: str
    kind: str
    n_x: int
    n_v: int
    t_end: float
    theta_bar: float = 0.05
    rank: int = 2
    cfl: float | None = 0.9
    dt: float | None = None
    fixed_rank: tuple | None = None
    substeps: str | None = None
    preset: str = "cons_bug_euler"


SCENARIOS = {
    s.name: s
    for s in [
        Scenario("planesource", "planesource", 1500, 500, 1.0),
        Scenario("planesource_small", "planesource", 200, 100, 1.0),
        # for linesource n_v is the SH degree N
        Scenario("linesource", "linesource", 250, 30, 1.0, rank=4),
        Scenario("linesource_small", "linesource", 80, 8, 0.5, rank=4),
        Scenario(
            "bump_on_tail", "bump_on_tail", 128, 128, 40.0, theta_bar=0.0, cfl=None,
            dt=0.01, fixed_rank=(27, 25), substeps="rk4", preset="cons_midp_bug_rk4",
        ),
        Scenario(
            "bump_on_tail_small", "bump_on_tail", 64, 64, 20.0, theta_bar=0.0, cfl=None,
            dt=0.02, fixed_rank=(12, 10), substeps="rk4", preset="cons_midp_bug_rk4",
        ),
    ]
}


def build_model(scenario):
    # pulses stay away from the edges, so outflow ghost cells lose no mass
    if scenario.kind == "planesource":
        return SlabRteModel(scenario.n_x, scenario.n_v, boundary="outflow")
    if scenario.kind == "linesource":
        return Linesource2dModel(scenario.n_x, scenario.n_v, boundary="outflow")
    if scenario.kind == "bump_on_tail":
        return VlasovModel(scenario.n_x, scenario.n_v)
    raise ValueError(f"unknown scenario kind {scenario.kind!r}")


def initial_state(scenario, model, rank, conservative):
    if scenario.kind == "planesource":
        return planesource_init(model, rank)
    if scenario.kind == "linesource":
        return linesource_init(model, rank)
    return bump_on_tail_init(model, rank, conservative=conservative)


def time_grid(scenario, model, t_end):
    """``(dt, n_steps)`` with ``n_steps * dt == t_end`` and ``dt`` not above the nominal step."""
    nominal = scenario.dt if scenario.dt is not None else model.cfl_dt(scenario.cfl)
    n = max(math.ceil(t_end / nominal - 1e-9), 0)
    return (t_end / n if n else nominal), n


# -- config files -------------------------------------------------------------------

_KEYS = {
    "scenario": str,
    "preset": str,
    "name": str,
    "t_end": float,
    "theta_bar": float,
    "rank": int,
    "max_rank": int,
    "variant": str,
    "kl_tableau": str,
    "s_tableau": str,
    "conservative": "bool",
    "stage_field": str,
    "out_dir": str,
    "seed": int,
}


def parse_config(text):
    """Parse ``key = value`` lines (``#`` comments allowed) into a typed dict."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string("[run]\n" + text)
    section = cp["run"]
    out = {}
    for key in section:
        if key not in _KEYS:
            raise ValueError(f"unknown config key {key!r}")
        kind = _KEYS[key]
        out[key] = section.getboolean(key) if kind == "bool" else kind(section[key])
    if "scenario" not in out:
        raise ValueError("config must set 'scenario'")
    return out


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))


def resolve(cfg):
    """Scenario, preset name, integrator config and initial rank for a parsed config."""
    try:
        scenario = SCENARIOS[cfg["scenario"]]
    except KeyError:
        raise ValueError(
            f"unknown scenario {cfg['scenario']!r}; expected one of {tuple(SCENARIOS)}"
        ) from None
    name = cfg.get("preset", scenario.preset)
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {tuple(PRESETS)}")
    overrides = {}
    if scenario.substeps:
        overrides["kl_tableau"] = scenario.substeps
        overrides["s_tableau"] = scenario.substeps
    for key in ("variant", "kl_tableau", "s_tableau", "conservative", "stage_field"):
        if key in cfg:
            overrides[key] = cfg[key]
    config = preset(name, **overrides)
    theta_bar = cfg.get("theta_bar", scenario.theta_bar)
    rank = cfg.get("rank", scenario.rank)
    max_rank = cfg.get("max_rank")
    if scenario.fixed_rank is not None:
        rank = cfg.get("rank", scenario.fixed_rank[0 if config.conservative else 1])
        max_rank = cfg.get("max_rank", rank)
    policy = TruncationPolicy(theta_bar, max_rank=max_rank)
    return scenario, name, replace(config, policy=policy), rank


def output_dir(cli_value=None, cfg=None):
    if cli_value:
        return Path(cli_value)
    if os.environ.get(OUT_DIR_ENV):
        return Path(os.environ[OUT_DIR_ENV])
    if cfg and cfg.get("out_dir"):
        return Path(cfg["out_dir"])
    return Path.cwd()


def _dense_state(Y):
    Q, R = np.linalg.qr(Y)
    return LowRankState(Q, R, np.eye(Y.shape[1]))


def run_scenario(cfg, out_dir=None, reference=False):
    """Run a parsed config and write ``<name>_<preset>_diag.csv`` and ``_final.csv``.

    With ``reference=True`` the full-rank system is integrated with dense
    RK4 instead and the files are tagged ``reference``.
    Returns ``(diag_path, final_path, records)``.
    """
    scenario, preset_name, config, rank = resolve(cfg)
    model = build_model(scenario)
    t_end = cfg.get("t_end", scenario.t_end)
    dt, n_steps = time_grid(scenario, model, t_end)
    state = initial_state(scenario, model, rank, config.conservative)
    tag = "reference" if reference else preset_name
    name = cfg.get("name", scenario.name)

    if reference:
        Y = evaluate(state)
        records = []
        ref = None
        for n in range(n_steps + 1):
            if n:
                Y = dense_reference(model, Y, dt, 1, "rk4")
            final = _dense_state(Y)
            rec = diagnose(model, final, n, n * dt, ref)
            ref = rec.invariants if ref is None else ref
            records.append(rec)
    else:
        final, records = run(model, state, dt, n_steps, config)

    out = Path(out_dir) if out_dir is not None else output_dir(None, cfg)
    out.mkdir(parents=True, exist_ok=True)
    diag_path = out / f"{name}_{tag}_diag.csv"
    final_path = out / f"{name}_{tag}_final.csv"
    report.write_diagnostics(diag_path, records, model.invariant_names)
    report.write_final(final_path, *final_profile(scenario, model, final))
    return diag_path, final_path, records


def final_profile(scenario, model, state):
    """Column names and columns of the final spatial profile."""
    if scenario.kind == "planesource":
        return ["x", "phi"], [model.x, invariant_density(model, state)[:, 0]]
    if scenario.kind == "linesource":
        xx, yy = np.meshgrid(model.x, model.x, indexing="ij")
        return ["x", "y", "phi"], [xx.ravel(), yy.ravel(), invariant_density(model, state)[:, 0]]
    w = model.velocity_weights
    Y = state.X @ (state.S @ (state.V.T @ np.column_stack([w, w * model.v])))
    E = model.electric_field(state)
    return ["x", "phi", "momentum", "E"], [model.x, Y[:, 0], Y[:, 1], E]
