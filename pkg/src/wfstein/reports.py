"""Ratio reports and their CSV / JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field


def fmt(x) -> str:
    """17 significant digits, '.' decimal separator; integers stay integers."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


@dataclass
class RatioReport:
    """Empirical constant estimate over a seeded suite.

    ``ratios`` holds one value per suite member, ``sup_ratio`` their maximum.
    ``stability`` (if set) is the max/min quotient of sup ratios across a grid
    refinement.  Members whose ratio is 0/0 are recorded in ``flags``.
    """

    name: str
    seeds: list
    ratios: list
    regime: str = "none"
    bound: float | None = None
    stability: float | None = None
    stability_limit: float | None = None
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def sup_ratio(self) -> float:
        finite = [r for r in self.ratios if not math.isnan(r)]
        return max(finite) if finite else 0.0

    @property
    def passed(self) -> bool:
        sup = self.sup_ratio
        if not math.isfinite(sup):
            return False
        if self.bound is not None and sup > self.bound:
            return False
        if self.stability is not None and self.stability_limit is not None:
            if not self.stability <= self.stability_limit:
                return False
        return bool(self.meta.get("contract_ok", True))

    def rows(self) -> list:
        out = []
        keys = sorted(self.extra)
        for i, (seed, ratio) in enumerate(zip(self.seeds, self.ratios)):
            out.append([seed, ratio] + [self.extra[k][i] for k in keys])
        out.sort(key=lambda row: tuple(_sort_key(v) for v in row))
        return out

    def header(self) -> list:
        return ["seed", "ratio"] + sorted(self.extra)

    def summary(self) -> dict:
        doc = {
            "name": self.name,
            "regime": self.regime,
            "members": len(self.ratios),
            "sup_ratio": self.sup_ratio,
            "passed": self.passed,
        }
        if self.bound is not None:
            doc["bound"] = self.bound
        if self.stability is not None:
            doc["stability"] = self.stability
        if self.flags:
            doc["flags"] = list(self.flags)
        doc.update(self.meta)
        return doc


def _sort_key(v):
    return (0, v) if isinstance(v, (int, float)) else (1, str(v))


def refinement_stability(coarse: RatioReport, fine: RatioReport) -> float:
    """max/min of the two sup ratios (1.0 means identical)."""
    a, b = coarse.sup_ratio, fine.sup_ratio
    if a == b:
        return 1.0
    if min(a, b) <= 0:
        return math.inf
    return max(a, b) / min(a, b)


def ratio(num: float, den: float, flags: list | None = None, label=None) -> float:
    """num/den with 0/0 treated as a passing 0 and recorded."""
    if den == 0:
        if num == 0:
            if flags is not None:
                flags.append(f"0/0 at {label}" if label is not None else "0/0")
            return 0.0
        return math.inf
    return num / den


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return fmt(obj)
    return obj
