# Copyright 2026 The lbforecast Authors
# SPDX-License-Identifier: Apache-2.0

"""Python bindings for the lbforecast C++ core.

Configs are passed as JSON text using the same schema as the lbf-bench CLI.
Tensors cross the boundary as float64 numpy arrays.
"""

import json as _json

from ._core import (
    ConfigError,
    DegenerateInputError,
    DimensionError,
    Error,
    OrderingError,
    ParameterError,
    ShapeError,
    SingularityError,
    StateError,
    TaylorCache,
    TraceError,
    add_noise,
    bench_csv,
    canonical_config,
    ddim_step,
    estimate_x0,
    flops_full_step,
    pearson,
    psnr,
    rel_error,
    run_report_json,
    spearman,
    ssim,
    trace_eval_csv,
)
from ._core import run as _run

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "DimensionError",
    "Error",
    "OrderingError",
    "ParameterError",
    "ShapeError",
    "SingularityError",
    "StateError",
    "TaylorCache",
    "TraceError",
    "add_noise",
    "bench_csv",
    "canonical_config",
    "ddim_step",
    "estimate_x0",
    "flops_full_step",
    "pearson",
    "psnr",
    "rel_error",
    "run",
    "run_report_json",
    "spearman",
    "ssim",
    "trace_eval_csv",
]


def run(config=None):
    """Run one sampling policy. `config` is a dict or JSON string."""
    if config is None:
        config = {}
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run(config)
