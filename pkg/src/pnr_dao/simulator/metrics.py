"""Run metrics and their CSV / text-table renderings.

A report is a flat list of ``(section, key, value)`` rows. Values are
strings already, with rationals fixed at six decimals, so rendering is a
pure layout step and CSV -> report -> CSV round-trips byte for byte.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import UnknownFormat
from ..gas_model import GasConfig, Layer, OpKind, batch_efficiency, fmt, usd_of

COLUMNS = ("section", "key", "value")


@dataclass
class MetricsCollector:
    """Counters the engine bumps while a scenario runs."""

    member_timeline: list[tuple[int, int]] = field(default_factory=list)
    votes_cast: int = 0
    votes_rejected: Counter = field(default_factory=Counter)
    actions_ok: int = 0
    actions_rejected: Counter = field(default_factory=Counter)
    deviations: int = 0
    onboard_attempts: int = 0
    sybil_detections: int = 0
    disclosures: int = 0
    gas_by_layer: dict = field(default_factory=lambda: {Layer.L1: 0, Layer.L2: 0})
    ops: Counter = field(default_factory=Counter)
    batch_elements: int = 0
    batch_gas: int = 0
    conservation_checks: int = 0
    conservation_violations: int = 0
    residual_escrow: int = 0

    def members_now(self, t: int, count: int) -> None:
        last = self.member_timeline[-1][1] if self.member_timeline else 0
        if count != last:
            if self.member_timeline and self.member_timeline[-1][0] == t:
                self.member_timeline[-1] = (t, count)
            else:
                self.member_timeline.append((t, count))


@dataclass
class MetricsReport:
    rows: list[tuple[str, str, str]] = field(default_factory=list)

    def add(self, section: str, key: str, value) -> None:
        if isinstance(value, Fraction):
            value = fmt(value)
        self.rows.append((section, str(key), str(value)))

    def section(self, name: str) -> dict[str, str]:
        return {k: v for s, k, v in self.rows if s == name}

    def value(self, section: str, key: str) -> str:
        return self.section(section)[key]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_table(self) -> str:
        rows = [COLUMNS, *self.rows]
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        sep = "+".join("-" * (w + 2) for w in widths)
        lines = [f"+{sep}+"]
        for n, r in enumerate(rows):
            lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |")
            if n == 0:
                lines.append(f"+{sep}+")
        lines.append(f"+{sep}+")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "MetricsReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"metrics CSV must start with header {','.join(COLUMNS)}")
        return cls([tuple(r) for r in reader if r])

    @classmethod
    def from_table(cls, text: str) -> "MetricsReport":
        rows = []
        for line in text.splitlines():
            if not line.startswith("|"):
                continue
            cells = tuple(c.strip() for c in line.strip("|").split("|"))
            rows.append(cells)
        if not rows or rows[0] != COLUMNS:
            raise ValueError("not a metrics table")
        return cls(rows[1:])


def report(metrics: MetricsReport, format: str = "csv") -> str:
    if format == "csv":
        return metrics.to_csv()
    if format in ("table", "text-table"):
        return metrics.to_table()
    raise UnknownFormat(f"unknown report format {format!r}")


def build_report(c: MetricsCollector, *, gas: GasConfig, deal_statuses: dict[str, str],
                 reputation: dict[str, int], deterrence: dict[str, tuple[int, bool]]) -> MetricsReport:
    r = MetricsReport()
    for t, count in c.member_timeline:
        r.add("members", f"t={t}", count)
    if c.votes_cast or c.votes_rejected:
        r.add("votes", "cast", c.votes_cast)
        for reason in sorted(c.votes_rejected):
            r.add("votes", f"rejected.{reason}", c.votes_rejected[reason])
    if c.actions_ok or c.actions_rejected:
        r.add("actions", "ok", c.actions_ok)
        for reason in sorted(c.actions_rejected):
            r.add("actions", f"rejected.{reason}", c.actions_rejected[reason])
        if c.deviations:
            r.add("actions", "deviations", c.deviations)
    for status, n in sorted(Counter(deal_statuses.values()).items()):
        r.add("deals", status, n)
    for name in sorted(reputation):
        r.add("reputation", name, reputation[name])
    if c.ops:
        for op in sorted(c.ops, key=lambda o: o.value):
            r.add("ops", op.value, c.ops[op])
        for layer in (Layer.L1, Layer.L2):
            g = c.gas_by_layer[layer]
            r.add("cost", f"{layer.value}.gas", g)
            r.add("cost", f"{layer.value}.usd", usd_of(g, gas.networks[layer]))
    if c.batch_elements:
        individual = gas.table.base[OpKind.BATCH_UPDATE]
        r.add("batch", "elements", c.batch_elements)
        r.add("batch", "gas", c.batch_gas)
        r.add("batch", "efficiency_pct",
              batch_efficiency(individual, c.batch_elements, c.batch_gas))
    for name in sorted(deterrence):
        margin, ok = deterrence[name]
        r.add("deterrence", f"{name}.margin", margin)
        r.add("deterrence", f"{name}.satisfied", str(ok).lower())
    if c.onboard_attempts:
        r.add("sybil", "detections", c.sybil_detections)
    if c.disclosures:
        r.add("disclosures", "count", c.disclosures)
    if c.conservation_checks:
        r.add("conservation", "checks", c.conservation_checks)
        r.add("conservation", "violations", c.conservation_violations)
        r.add("conservation", "residual_terminal_escrow", c.residual_escrow)
    return r
