"""Run reports and their CSV/JSON export.

CSV layout: one header row, then one row per flow followed by one row per
leg. Every row carries the run metadata; columns that do not apply to a row
type are left empty. Column order is ``CSV_COLUMNS``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


@dataclass
class FlowMetrics:
    flow_id: str
    offered_sdus: int
    offered_bytes: int
    delivered_sdus: int
    delivered_bytes: int
    goodput_bps: float
    latency_p50_ns: int | None
    latency_p95_ns: int | None
    latency_p99_ns: int | None
    loss_fraction: float
    lost_sdus: int
    reorder_skipped: int
    in_flight_sdus: int
    switch_count: int
    duplicate_discards: int
    late_discards: int
    reordering_timeouts: int
    retransmissions: int
    copies_sent: int
    final_mode: str
    decisions: dict = field(default_factory=dict)


@dataclass
class LegMetrics:
    leg_id: str
    rat: str
    utilization: float
    packets_in: int
    delivered: int
    drops_channel: int
    drops_linkdown: int
    drops_overflow: int
    prop_delay_ns: int


@dataclass
class RunMeta:
    scenario: str
    scenario_hash: str
    seed: int
    policy: str
    sim_duration_ns: int
    epoch_ns: int
    events_processed: int
    directives_applied: int = 0
    directives_rejected: int = 0
    policy_failures: int = 0


@dataclass
class MetricsReport:
    meta: RunMeta
    flows: list[FlowMetrics]
    legs: list[LegMetrics]

    def flow(self, flow_id: str) -> FlowMetrics:
        return next(f for f in self.flows if f.flow_id == flow_id)

    def leg(self, leg_id: str) -> LegMetrics:
        return next(l for l in self.legs if l.leg_id == leg_id)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(RunMeta(**d["meta"]), [FlowMetrics(**f) for f in d["flows"]],
                   [LegMetrics(**l) for l in d["legs"]])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def check(self) -> list[str]:
        """Invariant violations (empty when the report is consistent)."""
        bad = []
        for f in self.flows:
            if not 0.0 <= f.loss_fraction <= 1.0:
                bad.append(f"{f.flow_id}: loss_fraction {f.loss_fraction}")
            if f.delivered_sdus > f.offered_sdus or f.delivered_bytes > f.offered_bytes:
                bad.append(f"{f.flow_id}: delivered exceeds offered")
            if f.offered_sdus != f.delivered_sdus + f.lost_sdus + f.in_flight_sdus:
                bad.append(f"{f.flow_id}: conservation broken")
        for l in self.legs:
            if not 0.0 <= l.utilization <= 1.0:
                bad.append(f"{l.leg_id}: utilization {l.utilization}")
        return bad


_META = ["seed", "scenario", "scenario_hash", "policy", "sim_duration_ns"]
_FLOW = [f.name for f in fields(FlowMetrics) if f.name not in ("flow_id", "decisions")]
_LEG = [f.name for f in fields(LegMetrics) if f.name != "leg_id"]
CSV_COLUMNS = ["record", "id"] + _META + _FLOW + _LEG


def csv_rows(report: MetricsReport) -> list[dict]:
    meta = {k: getattr(report.meta, k) for k in _META}
    rows = []
    for f in report.flows:
        row = {"record": "flow", "id": f.flow_id, **meta}
        row.update({k: getattr(f, k) for k in _FLOW})
        rows.append(row)
    for l in report.legs:
        row = {"record": "leg", "id": l.leg_id, **meta}
        row.update({k: getattr(l, k) for k in _LEG})
        rows.append(row)
    return rows


def to_csv(reports) -> str:
    if isinstance(reports, MetricsReport):
        reports = [reports]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        for row in csv_rows(r):
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as e:
        raise OSError(e.errno, f"cannot write metrics to {path}: {e.strerror}") from None


def export_metrics(report: MetricsReport, format: str, path) -> None:
    """Write ``report`` as ``csv`` or ``json`` to ``path``."""
    if format not in ("csv", "json"):
        raise ValueError(f"unknown metrics format {format!r} (csv|json)")
    path = Path(path)
    _write(path, to_csv(report) if format == "csv" else report.to_json())


def load_metrics_json(path) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text()))
