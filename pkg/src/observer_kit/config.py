"""Loading and saving of the JSON documents the command line works with.

Config layout (all node indices 0-based, matrices row-major)::

    {
      "system": {"n": 2, "A": [[..], [..]],
                 "outputs": [{"H": [[..]]}, {"H": [[..]]}]},
      "graph":  {"N": 2, "edges": [{"from": 0, "to": 1, "weight": 1.0}, ..]},
      "params": {"alpha": 1.0,
                 "g": [1.0, 1.0],                  # optional
                 "margins": {"epsilon": 0.9, "gamma": 1.1},  # optional
                 "rank_rtol": 1e-10,               # optional
                 "seed": 0,                        # optional
                 "sim": {"t_final": 10.0, "dt": 1e-3, ...}}  # optional
    }

An edge (from, to, weight) means information flows from ``from`` to
``to``; the loader stores the weight at adjacency[to][from].
"""

import json
from dataclasses import dataclass

import numpy as np

from .decomp import SystemModel
from .errors import ConfigError, DimensionError
from .graph import Digraph
from .sim import SimulationConfig
from .synth import ObserverDesign, SynthesisParams


@dataclass
class LoadedConfig:
    model: SystemModel
    graph: Digraph
    params: SynthesisParams
    sim_settings: dict
    seed: int


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing '{key}' in {where} section")
    return mapping[key]


def load_config(path):
    """Parse and validate a config file into model, graph and parameters."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    system = _require(doc, "system", "config")
    graph_sec = _require(doc, "graph", "config")
    params_sec = _require(doc, "params", "config")

    try:
        A = np.asarray(_require(system, "A", "system"), dtype=float)
        outputs = [
            np.asarray(_require(block, "H", "system.outputs"), dtype=float)
            for block in _require(system, "outputs", "system")
        ]
        model = SystemModel(A=A, outputs=tuple(outputs))
    except (TypeError, ValueError, DimensionError) as exc:
        raise ConfigError(f"bad system section: {exc}") from exc
    if "n" in system and int(system["n"]) != model.n:
        raise ConfigError(
            f"system.n = {system['n']} disagrees with A, which is {model.n}x{model.n}"
        )

    node_count = int(_require(graph_sec, "N", "graph"))
    if node_count != model.node_count:
        raise ConfigError(
            f"graph.N = {node_count} but the system has {model.node_count} output blocks"
        )
    try:
        edges = [
            (int(e["from"]), int(e["to"]), float(e["weight"]))
            for e in _require(graph_sec, "edges", "graph")
        ]
        g_net = Digraph.from_edges(node_count, edges)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad graph section: {exc}") from exc

    margins = params_sec.get("margins") or {}
    try:
        params = SynthesisParams(
            alpha=float(_require(params_sec, "alpha", "params")),
            g=params_sec.get("g"),
            epsilon_margin=float(margins.get("epsilon", 0.9)),
            gamma_margin=float(margins.get("gamma", 1.1)),
            rank_rtol=float(params_sec.get("rank_rtol", 1e-10)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad params section: {exc}") from exc
    if params.g is not None and params.g.shape != (node_count,):
        raise ConfigError(f"params.g must hold {node_count} weights")

    sim_settings = params_sec.get("sim") or {}
    if not isinstance(sim_settings, dict):
        raise ConfigError("params.sim must be an object")
    seed = int(params_sec.get("seed", 0))
    return LoadedConfig(
        model=model, graph=g_net, params=params,
        sim_settings=sim_settings, seed=seed,
    )


def build_sim_config(loaded, t_final=None, dt=None, seed=None):
    """Simulation settings from the config file with CLI overrides applied."""
    settings = dict(loaded.sim_settings)
    if t_final is not None:
        settings["t_final"] = t_final
    if dt is not None:
        settings["dt"] = dt
    settings.setdefault("t_final", 10.0)
    settings.setdefault("dt", 1e-3)
    fit_window = settings.get("fit_window")
    try:
        return SimulationConfig(
            t_final=float(settings["t_final"]),
            dt=float(settings["dt"]),
            x0=settings.get("x0"),
            xhat0=settings.get("xhat0"),
            seed=int(seed if seed is not None else settings.get("seed", loaded.seed)),
            record_stride=int(settings.get("record_stride", 1)),
            fit_window=tuple(fit_window) if fit_window is not None else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sim settings: {exc}") from exc


def save_design(design, path):
    with open(path, "w") as fh:
        json.dump(design.to_dict(), fh, indent=2)
        fh.write("\n")


def load_design(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read design {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"design {path} is not valid JSON: {exc}") from exc
    return ObserverDesign.from_dict(doc)
