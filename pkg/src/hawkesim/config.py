"""Load and dump model specs as JSON or TOML.

Schema (all rates per unit time, no implicit unit conversion):

    {
      "dims": {"d": 2, "dstar": 2},
      "lambda_bar": [0.5, 0.5],
      "kernels": [[{"family": "exponential", "alpha": 2.0}, ...], ...],
      "marks":  [{"family": "exponential", "params": [2.0, 3.333]}, ...],
      "claims": [{"family": "exponential", "params": [0.5, 0.4]}, ...],
      "premium": [8.0, 8.0]
    }

kernels[l][j] acts on receiving component l from emitting component j.
Mark/claim params are point-mass values for family "deterministic" and
rates for family "exponential". A tabulated kernel is
{"family": "tabulated", "table": {"times": [...], "values": [...], "c": ...}}.
"""
from __future__ import annotations

import json
from pathlib import Path

from .model import (
    DecayKernel,
    DeterministicLaw,
    Dimensions,
    ExponentialKernel,
    ExponentialLaw,
    ModelSpec,
    TabulatedKernel,
    VectorLaw,
)


def _law_from_dict(obj: dict) -> VectorLaw:
    family = obj["family"].lower()
    params = obj["params"]
    if family == "deterministic":
        return DeterministicLaw(params)
    if family == "exponential":
        return ExponentialLaw(params)
    raise ValueError(f"unknown law family {obj['family']!r}")


def _law_to_dict(law: VectorLaw) -> dict:
    if isinstance(law, DeterministicLaw):
        return {"family": "deterministic", "params": list(law.values)}
    if isinstance(law, ExponentialLaw):
        return {"family": "exponential", "params": list(law.rates)}
    raise ValueError(f"cannot serialize law {type(law).__name__}")


def _kernel_from_dict(obj: dict) -> DecayKernel:
    family = obj["family"].lower()
    scale = float(obj.get("scale", 1.0))
    if family == "exponential":
        return ExponentialKernel(float(obj["alpha"]), scale)
    if family == "tabulated":
        table = obj["table"]
        return TabulatedKernel(table["times"], table["values"], float(table["c"]), scale)
    raise ValueError(f"unknown kernel family {obj['family']!r}")


def _kernel_to_dict(kernel: DecayKernel) -> dict:
    if isinstance(kernel, ExponentialKernel):
        return {"family": "exponential", "alpha": kernel.alpha, "scale": kernel.scale}
    if isinstance(kernel, TabulatedKernel):
        return {
            "family": "tabulated",
            "scale": kernel.scale,
            "table": {
                "times": list(kernel.times),
                "values": list(kernel.values),
                "c": kernel.norm,
            },
        }
    raise ValueError(f"cannot serialize kernel {type(kernel).__name__}")


def spec_from_dict(obj: dict) -> ModelSpec:
    dims = Dimensions(int(obj["dims"]["d"]), int(obj["dims"]["dstar"]))
    return ModelSpec(
        dims=dims,
        lambda_bar=obj["lambda_bar"],
        kernels=[[_kernel_from_dict(k) for k in row] for row in obj["kernels"]],
        marks=[_law_from_dict(m) for m in obj["marks"]],
        claims=[_law_from_dict(c) for c in obj["claims"]],
        premium=obj["premium"],
    )


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "dims": {"d": spec.dims.d, "dstar": spec.dims.dstar},
        "lambda_bar": list(spec.lambda_bar),
        "kernels": [[_kernel_to_dict(k) for k in row] for row in spec.kernels],
        "marks": [_law_to_dict(m) for m in spec.marks],
        "claims": [_law_to_dict(c) for c in spec.claims],
        "premium": list(spec.premium),
    }


def load_spec(path) -> ModelSpec:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        obj = tomllib.loads(text)
    else:
        obj = json.loads(text)
    return spec_from_dict(obj)


def dump_spec(spec: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")


def bundled_config_path(name: str) -> Path:
    """Path of a parameter file shipped with the package."""
    here = Path(__file__).parent / "configs" / f"{name}.json"
    if not here.exists():
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return here


def load_bundled(name: str) -> ModelSpec:
    return load_spec(bundled_config_path(name))
