"""Kit-vs-clinic agreement study: paired CSV in, difference/summary tables out.

Input rows alternate a "Kit" and a "Clinic" reading per patient ID. The
output reproduces the reference difference table (one row per patient,
eleven absolute differences) and the per-metric Exact/Incorrect/Near
summary, plus one bar chart per metric as deterministic SVG.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ConflictError, PairingError, ParseError, ValidationError
from .model import (
    DEFAULT_NEAR_TOLERANCE,
    SUMMARY_METRICS,
    AgreementSummary,
    DifferenceRow,
    EcgFeatures,
    MetricCounts,
    VitalSample,
    compare_reading,
    summarize_agreement,
)

PAIRS_HEADER = ["Setup", "ID", "SpO2", "Temp", "S_BP", "D_BP", "HR", "ECG", "P", "Q", "R", "S", "T"]
DIFF_HEADER = ["ID", "SpO2", "Temp", "S_BP", "D_BP", "HR", "ECG", "P", "Q", "R", "S", "T"]
SUMMARY_HEADER = ["Metric", "Total", "Exact", "Incorrect", "Near"]

KIT = "kit"
CLINIC = "clinic"


@dataclass(frozen=True)
class PairedReadingSet:
    pairs: tuple[tuple[str, VitalSample, VitalSample], ...]

    def __post_init__(self):
        ids = [pid for pid, _, _ in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValidationError("patient ids must be unique")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class ValidationReport:
    differences: tuple[DifferenceRow, ...]
    summary: AgreementSummary
    near_tolerance: int


def _id_sort_key(pid: str):
    return (0, int(pid)) if pid.isdigit() else (1, pid)


def load_paired_csv(path: str | Path) -> PairedReadingSet:
    """Parse alternating Kit/Clinic rows into per-patient pairs.

    The header must match the documented 13-column layout
    (case-insensitive). Every ID needs exactly one Kit and one Clinic row.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return PairedReadingSet(pairs=())
        if [h.strip().lower() for h in header] != [h.lower() for h in PAIRS_HEADER]:
            raise ParseError(
                f"header {header!r} does not match {','.join(PAIRS_HEADER)}", row=1
            )
        readings: dict[tuple[str, str], VitalSample] = {}
        order: list[str] = []
        for line_no, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(PAIRS_HEADER):
                raise ParseError(f"expected {len(PAIRS_HEADER)} columns", row=line_no)
            setup = cells[0].strip().lower()
            if setup not in (KIT, CLINIC):
                raise ParseError(f"setup must be Kit or Clinic, got {cells[0]!r}", row=line_no, column=1)
            pid = cells[1].strip()
            if not pid:
                raise ParseError("empty patient ID", row=line_no, column=2)
            values = []
            for col, cell in enumerate(cells[2:], start=3):
                try:
                    values.append(int(cell.strip()))
                except ValueError as exc:
                    raise ParseError(
                        f"non-integer cell {cell!r}", row=line_no, column=col
                    ) from exc
            key = (setup, pid)
            if key in readings:
                raise ConflictError(f"duplicate {cells[0]} row for ID {pid}")
            spo2, temp, sbp, dbp, hr, ecg, p, q, r, s, t = values
            readings[key] = VitalSample(
                patient_id=pid, ts=0, spo2=spo2, temp=float(temp), sbp=sbp,
                dbp=dbp, hr=hr,
                ecg=EcgFeatures(ecg_base=ecg, p=p, q=q, r=r, s=s, t=t),
            )
            if pid not in order:
                order.append(pid)

    missing_kit = [pid for pid in order if (KIT, pid) not in readings]
    missing_clinic = [pid for pid in order if (CLINIC, pid) not in readings]
    if missing_kit or missing_clinic:
        missing = sorted(set(missing_kit + missing_clinic), key=_id_sort_key)
        raise PairingError(f"missing pair member for ID(s): {', '.join(missing)}")
    pairs = tuple(
        (pid, readings[(KIT, pid)], readings[(CLINIC, pid)])
        for pid in sorted(order, key=_id_sort_key)
    )
    return PairedReadingSet(pairs=pairs)


def run_validation(
    pset: PairedReadingSet, near_tolerance: int = DEFAULT_NEAR_TOLERANCE
) -> ValidationReport:
    differences = tuple(compare_reading(kit, clinic) for _, kit, clinic in pset.pairs)
    return ValidationReport(
        differences=differences,
        summary=summarize_agreement(list(differences), near_tolerance),
        near_tolerance=near_tolerance,
    )


def load_differences_csv(path: str | Path) -> list[DifferenceRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DIFF_HEADER:
            raise ParseError(f"unexpected differences header {header!r}", row=1)
        rows = []
        for cells in reader:
            pid, *values = cells
            rows.append(DifferenceRow(pid, *[int(v) for v in values]))
    return rows


def _slug(label: str) -> str:
    return label.lower().replace(" ", "_")


_BAR_COLORS = {"Exact": "#2e7d32", "Near": "#f9a825", "Incorrect": "#c62828"}


def _bar_chart_svg(label: str, counts: MetricCounts) -> str:
    """A deterministic three-bar SVG: Exact / Near / Incorrect counts."""
    width, height, floor = 360, 240, 190
    top = max(counts.total, 1)
    bars = [("Exact", counts.exact), ("Near", counts.near), ("Incorrect", counts.incorrect)]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{label} ({counts.total} readings)</text>',
        f'<line x1="30" y1="{floor}" x2="{width - 20}" y2="{floor}" stroke="#444"/>',
    ]
    for i, (name, value) in enumerate(bars):
        bar_h = round(140 * value / top)
        x = 60 + i * 100
        y = floor - bar_h
        parts.append(
            f'<rect x="{x}" y="{y}" width="60" height="{bar_h}" fill="{_BAR_COLORS[name]}"/>'
        )
        parts.append(
            f'<text x="{x + 30}" y="{y - 6}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="13">{value}</text>'
        )
        parts.append(
            f'<text x="{x + 30}" y="{floor + 18}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="13">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: ValidationReport, out_dir: str | Path) -> list[Path]:
    """Write differences.csv, summary.csv and one chart per metric.

    Deterministic: identical reports produce byte-identical files. An empty
    report writes header-only CSVs and no charts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    diff_path = out / "differences.csv"
    with open(diff_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIFF_HEADER)
        for row in report.differences:
            writer.writerow([row.patient_id, *row.metric_values()])
    written.append(diff_path)

    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for label in SUMMARY_METRICS:
            c = report.summary.row(label)
            writer.writerow([label, c.total, c.exact, c.incorrect, c.near])
    written.append(summary_path)

    if report.differences:
        for label in SUMMARY_METRICS:
            chart_path = out / f"chart_{_slug(label)}.svg"
            chart_path.write_text(
                _bar_chart_svg(label, report.summary.row(label)), encoding="utf-8"
            )
            written.append(chart_path)
    return written
