"""Run reports: per-check records with provenance, serialized deterministically."""

import json
import platform
from dataclasses import asdict, dataclass, field

PROVENANCE = ("paper-formula", "oracle", "trivial")


def _plain(x):
    """JSON-safe scalars: complex split, numpy types unwrapped, floats kept exact."""
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if hasattr(x, "item") and not isinstance(x, (list, tuple, dict)):
        return _plain(x.item())
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, float) and x != x:
        return "nan"
    return x


@dataclass
class CheckRecord:
    name: str
    expected: object
    observed: object
    tolerance: object
    passed: bool
    provenance: str
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"provenance must be one of {PROVENANCE}")
        self.passed = bool(self.passed)


@dataclass
class RunReport:
    command: str
    config_hash: str
    seed: int
    records: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def add(self, name, expected, observed, tolerance, passed, provenance, note=""):
        rec = CheckRecord(name, expected, observed, tolerance, passed, provenance, note)
        self.records.append(rec)
        return rec

    def check_close(self, name, expected, observed, rtol=None, atol=None, provenance="oracle",
                    note=""):
        err = abs(observed - expected)
        ok = True
        if rtol is not None:
            ok = ok and err <= rtol * abs(expected)
        if atol is not None:
            ok = ok and err <= atol
        tol = {"rtol": rtol} if atol is None else {"atol": atol} if rtol is None else {
            "rtol": rtol, "atol": atol}
        return self.add(name, expected, observed, tol, ok, provenance, note)

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def failed(self):
        return [r.name for r in self.records if not r.passed]

    @staticmethod
    def environment():
        import numpy
        import scipy

        from ._accel import USE_NUMBA
        return {"python": platform.python_version(), "numpy": numpy.__version__,
                "scipy": scipy.__version__, "numba_kernels": USE_NUMBA}

    def to_dict(self):
        return _plain({
            "command": self.command,
            "status": "pass" if self.passed else "fail",
            "config_hash": self.config_hash,
            "seed": self.seed,
            "environment": self.environment(),
            "records": [asdict(r) for r in self.records],
            "diagnostics": self.diagnostics,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_lines(self):
        out = []
        for r in self.records:
            out.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  expected={_short(r.expected)} "
                       f"observed={_short(r.observed)} [{r.provenance}]")
        out.append(f"status: {'pass' if self.passed else 'fail'} ({len(self.records)} checks)")
        return out


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, complex):
        return f"{v.real:.6g}{v.imag:+.6g}j"
    return str(v)
