"""Python access to the interleaf core: instruction parsing, token layout,
geometry, statistics, and the convert/report/audit pipeline."""

import json as _json
import os as _os

from ._interleaf import (
    Error,
    StageUnavailable,
    ValidationError,
    __version__,
    clopper_pearson,
    fill_template,
    iou,
    normalize,
    pad_and_clamp,
    parse_instruction,
    plan_mixture,
    render,
    synth,
    token_count,
)
from . import _interleaf

__all__ = [
    "Error", "StageUnavailable", "ValidationError", "__version__", "audit",
    "clopper_pearson", "convert", "fill_template", "iou", "normalize",
    "pad_and_clamp", "parse_instruction", "plan_mixture", "render", "report",
    "synth", "token_count",
]


def convert(manifest, out, config):
    """Run the pipeline. `config` is a config document (dict) with the same
    keys as a --config file. Returns (exit_code, report dict)."""
    code, rep = _interleaf._convert(_os.fspath(manifest), _os.fspath(out), _json.dumps(config))
    return code, _json.loads(rep)


def report(run_dir):
    return _json.loads(_interleaf._report(_os.fspath(run_dir)))


def audit(run_dir, n=200, seed=0):
    return _json.loads(_interleaf._audit(_os.fspath(run_dir), n, seed))
