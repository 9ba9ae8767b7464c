"""Index movement forecasting on stock prediction networks."""

import json
import os

from . import _core
from ._core import (
    InputError,
    LookaheadError,
    NetpredError,
    ParseError,
    WindowError,
    adjusted_rand_index,
    combine_edge_weight,
    influence_from_accuracies,
    macro_f1,
    pearson_correlation,
    rbf_similarity,
)

__all__ = [
    "InputError",
    "LookaheadError",
    "NetpredError",
    "ParseError",
    "WindowError",
    "ablate",
    "adjusted_rand_index",
    "build_graph",
    "combine_edge_weight",
    "evaluate",
    "forecast",
    "influence_from_accuracies",
    "macro_f1",
    "pearson_correlation",
    "rbf_similarity",
    "sweep_lambda",
    "synthesize",
]


def _config(config):
    if isinstance(config, (str, os.PathLike)):
        path = os.fspath(config)
        with open(path) as f:
            return f.read(), os.path.dirname(os.path.abspath(path))
    return json.dumps(config), ""


def synthesize(directory, **spec):
    """Writes a planted market into `directory` and returns its ground truth."""
    os.makedirs(directory, exist_ok=True)
    return json.loads(_core.write_synthetic_market(json.dumps(spec), os.fspath(directory)))


def build_graph(config, day):
    text, base = _config(config)
    return json.loads(_core.build_graph(text, day, base))


def forecast(config, day):
    text, base = _config(config)
    return json.loads(_core.forecast(text, day, base))


def evaluate(config):
    text, base = _config(config)
    return json.loads(_core.evaluate(text, base))


def sweep_lambda(config, values):
    """Returns rows of the lambda sweep as dictionaries."""
    text, base = _config(config)
    lines = _core.sweep_lambda(text, list(values), base).strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, line.split(",")))) for line in lines[1:]]


def ablate(config, variant):
    text, base = _config(config)
    return json.loads(_core.ablate(text, variant, base))
