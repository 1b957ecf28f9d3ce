"""Pass/fail records shared by the verification routines and the CLI."""
from __future__ import annotations

import math


def check(statistic: str, value, threshold, passed: bool, **extra) -> dict:
    """One ``{statistic, value, threshold, pass}`` record (JSON friendly)."""
    rec = {"statistic": statistic, "value": _plain(value), "threshold": _plain(threshold), "pass": bool(passed)}
    rec.update({k: _plain(v) for k, v in extra.items()})
    return rec


def all_pass(checks) -> bool:
    return all(c["pass"] for c in checks)


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v
