"""Experiment configuration: strict JSON schema, version 1.

Unknown fields are rejected with the offending field path so typos fail
loudly instead of silently running a different experiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .graphs import (
    DegreeDistribution,
    Graph,
    make_transitive,
    read_graph,
    sample_configuration_model,
)
from .seeding import derive_rng

__all__ = ["ExperimentConfig", "load_config", "build_graph"]

_TASK_KINDS = ("density", "tracked_cluster", "occupancy", "tau_coal", "nhat")
_CONVENTIONS = ("per_edge_unit", "total_unit")


@dataclass
class ExperimentConfig:
    graph: dict
    rate_convention: str
    times: list[float]
    replicates: int
    master_seed: int
    outputs: str
    tasks: list[dict]
    schema: int = 1

    def as_dict(self) -> dict:
        return {
            "schema": self.schema,
            "graph": self.graph,
            "rate_convention": self.rate_convention,
            "times": self.times,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "outputs": self.outputs,
            "tasks": self.tasks,
        }


def _expect_keys(obj: dict, path: str, required: dict, optional: dict | None = None):
    optional = optional or {}
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown field")
    for key, kind in required.items():
        if key not in obj:
            raise ConfigError(f"{path}.{key}" if path else key, "missing field")
        _check_type(obj[key], kind, f"{path}.{key}" if path else key)
    for key, kind in optional.items():
        if key in obj:
            _check_type(obj[key], kind, f"{path}.{key}" if path else key)


def _check_type(value, kind, path):
    if kind == "int" and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ConfigError(path, "expected an integer")
    if kind == "number" and not isinstance(value, (int, float)):
        raise ConfigError(path, "expected a number")
    if kind == "str" and not isinstance(value, str):
        raise ConfigError(path, "expected a string")
    if kind == "list" and not isinstance(value, list):
        raise ConfigError(path, "expected a list")
    if kind == "dict" and not isinstance(value, dict):
        raise ConfigError(path, "expected an object")
    if kind == "bool" and not isinstance(value, bool):
        raise ConfigError(path, "expected a boolean")


def validate_config(raw: dict) -> ExperimentConfig:
    _expect_keys(
        raw,
        "",
        {
            "schema": "int",
            "graph": "dict",
            "times": "list",
            "replicates": "int",
            "master_seed": "int",
            "outputs": "str",
            "tasks": "list",
        },
        {"rate_convention": "str"},
    )
    if raw["schema"] != 1:
        raise ConfigError("schema", f"unsupported schema version {raw['schema']}")
    _validate_graph(raw["graph"])
    convention = raw.get("rate_convention", "per_edge_unit")
    if convention not in _CONVENTIONS:
        raise ConfigError("rate_convention", f"unknown convention {convention!r}")
    times = raw["times"]
    if not times or any(not isinstance(t, (int, float)) for t in times):
        raise ConfigError("times", "expected a nonempty list of numbers")
    if any(t < 0 for t in times) or any(
        b < a for a, b in zip(times, times[1:])
    ):
        raise ConfigError("times", "must be sorted and nonnegative")
    if raw["replicates"] < 1:
        raise ConfigError("replicates", "must be >= 1")
    if not raw["tasks"]:
        raise ConfigError("tasks", "need at least one task")
    for i, task in enumerate(raw["tasks"]):
        _validate_task(task, f"tasks[{i}]")
    return ExperimentConfig(
        graph=raw["graph"],
        rate_convention=convention,
        times=[float(t) for t in times],
        replicates=raw["replicates"],
        master_seed=raw["master_seed"],
        outputs=raw["outputs"],
        tasks=raw["tasks"],
    )


def _validate_graph(graph: dict):
    kinds = [k for k in ("family", "path", "cm") if k in graph]
    if len(kinds) != 1:
        raise ConfigError("graph", "need exactly one of family/path/cm")
    if "family" in graph:
        _expect_keys(graph, "graph", {"family": "str", "params": "list"})
    elif "path" in graph:
        _expect_keys(graph, "graph", {"path": "str"})
    else:
        _expect_keys(graph, "graph", {"cm": "dict"})
        _expect_keys(
            graph["cm"],
            "graph.cm",
            {"degrees": "list", "n": "int"},
            {"require_connected": "bool", "seed": "int"},
        )


def _validate_task(task: dict, path: str):
    _expect_keys(
        task,
        path,
        {"task": "str"},
        {"replicates": "int", "sites": "list", "times": "list"},
    )
    if task["task"] not in _TASK_KINDS:
        raise ConfigError(f"{path}.task", f"unknown task {task['task']!r}")
    if "replicates" in task and task["replicates"] < 1:
        raise ConfigError(f"{path}.replicates", "must be >= 1")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    # a manifest embeds its config verbatim; accept it for exact re-runs
    if isinstance(raw, dict) and "config" in raw and "schema" not in raw:
        raw = raw["config"]
    return validate_config(raw)


def build_graph(cfg_graph: dict, master_seed: int) -> Graph:
    if "family" in cfg_graph:
        return make_transitive(cfg_graph["family"], *cfg_graph["params"])
    if "path" in cfg_graph:
        return read_graph(cfg_graph["path"])
    cm = cfg_graph["cm"]
    dist = DegreeDistribution.from_pairs([(d, p) for d, p in cm["degrees"]])
    rng = derive_rng(cm.get("seed", master_seed), "graph_gen", 0)
    return sample_configuration_model(
        dist, cm["n"], rng, require_connected=cm.get("require_connected", False)
    )
