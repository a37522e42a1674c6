"""Experiment configuration: a YAML tree with a fixed schema.

Unknown keys are rejected at every level, so a misspelled option fails loudly
instead of silently falling back to a default.
"""

import copy
import hashlib
import json
from dataclasses import dataclass

import yaml


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 0,
    "output_dir": "out",
    "potential": {
        "n": 1,
        "k": 2,
        # V(x) = -x^4 + x^6: degenerate maximum at 0, wells at -4/27
        "coefficients": [[[4], -1.0], [[6], 1.0]],
        "e_c": None,
        "x0": None,
        "box": None,
    },
    "spectral": {
        "eps": 0.05,
        "T": None,
        "T_factor": 0.8,
        "period_safety": 1.05,
        "h_min": 1.0 / 400.0,
        "h_max": 1.0 / 60.0,
        "h_points": 12,
        "dx_factor": 10.0,
        "wall_margin": 10.0,
        "boundary_tol": 1e-10,
        "reject_rel": 1e-3,
        "workers": 4,
        "exponent_tol": 0.05,
        "ratio_range": [0.8, 1.25],
    },
    "expand": {
        "profile": "bump",
        "T": 1.0,
        "R": 1.0,
        "b00": 1.0,
        "m0": None,
        "lambda_min": 100.0,
        "lambda_max": 10000.0,
        "per_decade": 12,
        "order": 2,
        "exponent_tol": 0.03,
        "exponent_tol_integer": 0.1,
        "log_factor": 5.0,
        "coefficient_rtol": 0.03,
        "residual_rtol": 1e-5,
    },
    "dynamics": {
        "jet_t_grid": [0.05, 0.1, 0.15, 0.2, 0.25],
        "jet_directions": 3,
        "jet_tol": 1e-6,
        "intermediate_tol": 1e-10,
        "s2k_t_grid": [0.05, 0.1, 0.2],
        "s2k_radii": [0.02, 0.04, 0.06, 0.08, 0.1, 0.12],
        "s2k_tol": 1e-4,
        "orbit_energies": [-0.02, 0.02],
        "orbit_t_max": 40.0,
        "orbit_seeds": 4,
    },
    "identities": {
        "E_cases": [[1, 0.75], [1, 0.9], [3, 2.0], [3, 2.5]],
        "E_even_cases": [[2, 1.5], [2, 2.5], [4, 2.5], [4, 3.5]],
        "E_rtol": 1e-6,
        "E_even_atol": 1e-9,
        "s_cases": [[2, 1], [3, 1], [4, 3]],
        "s_zero_cases": [[2, 2]],
        "s_atol": 1e-8,
        "q_cases": [[2, 1], [3, 1]],
        "q_rtol": 1e-6,
        "catalog_cases": [[1, 2], [2, 2], [3, 3], [4, 2]],
        "catalog_span": 3,
    },
}

_TOLERANCE_KEYS = {
    ("spectral", "boundary_tol"), ("spectral", "reject_rel"), ("spectral", "exponent_tol"),
    ("dynamics", "jet_tol"), ("dynamics", "intermediate_tol"), ("dynamics", "s2k_tol"),
    ("identities", "E_rtol"), ("identities", "E_even_atol"), ("identities", "s_atol"),
    ("identities", "q_rtol"), ("expand", "exponent_tol"), ("expand", "exponent_tol_integer"),
    ("expand", "coefficient_rtol"), ("expand", "residual_rtol"),
}
_NONEMPTY_KEYS = {
    ("dynamics", "jet_t_grid"), ("dynamics", "s2k_t_grid"), ("dynamics", "s2k_radii"),
    ("dynamics", "orbit_energies"), ("potential", "coefficients"),
}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def _validate(tree):
    for sec, key in _TOLERANCE_KEYS:
        v = tree[sec][key]
        if not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"{sec}.{key} must be a positive number")
    for sec, key in _NONEMPTY_KEYS:
        if not tree[sec][key]:
            raise ConfigError(f"{sec}.{key} must be nonempty")
    sp = tree["spectral"]
    if not (0 < sp["h_min"] < sp["h_max"]) or sp["h_points"] < 2:
        raise ConfigError("spectral h grid must satisfy 0 < h_min < h_max with >= 2 points")
    if sp["eps"] <= 0:
        raise ConfigError("spectral.eps must be positive")
    ex = tree["expand"]
    if not (0 < ex["lambda_min"] < ex["lambda_max"]) or ex["per_decade"] < 1:
        raise ConfigError("expand lambda grid is empty")
    if ex["profile"] not in ("bump", "gaussian"):
        raise ConfigError(f"unsupported profile {ex['profile']!r}")
    if int(tree["potential"]["n"]) < 1 or int(tree["potential"]["k"]) < 2:
        raise ConfigError("potential needs n >= 1 and k >= 2")


@dataclass
class ExperimentConfig:
    tree: dict

    @classmethod
    def from_mapping(cls, mapping=None):
        tree = _merge(DEFAULTS, mapping or {})
        _validate(tree)
        return cls(tree)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_mapping(data)

    def dump(self):
        return yaml.safe_dump(self.tree, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dump())

    def canonical(self):
        return json.dumps(self.tree, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def with_overrides(self, **sections):
        """Copy with some keys replaced, e.g. ``with_overrides(seed=3, expand={'order': 4})``."""
        return ExperimentConfig.from_mapping(_merge(self.tree, sections))

    def __getitem__(self, key):
        return self.tree[key]

    def potential(self):
        from .geometry import HomogeneousPotential
        import numpy as np

        pt = self.tree["potential"]
        table = [(tuple(e), float(c)) for e, c in pt["coefficients"]]
        box = None
        if pt["box"] is not None:
            box = (np.asarray(pt["box"][0], float), np.asarray(pt["box"][1], float))
        return HomogeneousPotential.from_table(table, int(pt["n"]), int(pt["k"]),
                                               e_c=pt["e_c"], x0=pt["x0"], box=box)
