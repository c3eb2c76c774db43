"""Parsing and validation of the dsm-spectra CSV schemas.

Each loader checks the exact header for its kind, extracts the rows the
figure needs, and raises SchemaError naming the offending column or the
missing row group.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


class SchemaError(Exception):
    """CSV does not match the documented schema for the requested kind."""


SWEEP_COLUMNS = ("row_type", "temperature", "base_seed", "rep_index",
                 "sigma1", "sigma2", "entropy", "d_eff", "transient_max",
                 "transient_argmax", "sigma2_mean", "sigma2_std",
                 "entropy_mean", "entropy_std")
COLLAPSE_COLUMNS = ("row_type", "base_seed", "rep_index", "temperature",
                    "sigma1", "sigma2", "entropy", "gamma", "final_cosine",
                    "bin_left", "bin_right", "bin_count", "bin_density",
                    "stat_name", "stat_value")
ABLATION_COLUMNS = ("row_type", "gamma_ln", "base_seed", "rep_index",
                    "norm_ratio", "cos_signal_plain", "cos_signal_affine",
                    "mean_shift", "stat_name", "stat_value")

ABLATION_STAT_NAMES = ("ks_stat", "ks_p", "max_norm_ratio_dev",
                       "mean_norm_ratio", "mean_shift_mean")


@dataclass
class ParsedCsv:
    comments: dict
    header: list
    rows: list
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {name: i for i, name in enumerate(self.header)}

    def cell(self, row: list, column: str) -> str:
        return row[self.index[column]]

    def number(self, row: list, column: str) -> float:
        raw = self.cell(row, column)
        try:
            return float(raw)
        except ValueError as exc:
            raise SchemaError(
                f"column {column!r}: cannot parse {raw!r} as a number"
            ) from exc


def parse(text: str) -> ParsedCsv:
    comments = {}
    data_lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if ":" in body:
                key, value = body.split(":", 1)
                comments[key.strip()] = value.strip()
            continue
        if line.strip():
            data_lines.append(line)
    if not data_lines:
        raise SchemaError("CSV has no header row")
    reader = csv.reader(io.StringIO("\n".join(data_lines)))
    table = list(reader)
    header, rows = table[0], table[1:]
    for number, row in enumerate(rows, 2):
        if len(row) != len(header):
            raise SchemaError(
                f"row {number}: expected {len(header)} cells, got {len(row)}")
    return ParsedCsv(comments=comments, header=header, rows=rows)


def check_header(parsed: ParsedCsv, expected: tuple) -> None:
    got = parsed.header
    for i in range(max(len(got), len(expected))):
        want = expected[i] if i < len(expected) else None
        have = got[i] if i < len(got) else None
        if want != have:
            raise SchemaError(
                f"header column {i}: expected {want!r}, got {have!r}")


@dataclass
class SweepData:
    temperatures: list
    sigma2_mean: list
    sigma2_std: list
    entropy_mean: list
    entropy_std: list
    comments: dict


def load_sweep(text: str) -> SweepData:
    parsed = parse(text)
    check_header(parsed, SWEEP_COLUMNS)
    aggregates = [r for r in parsed.rows if r[0] == "aggregate"]
    if not aggregates:
        raise SchemaError("no aggregate rows")
    return SweepData(
        temperatures=[parsed.number(r, "temperature") for r in aggregates],
        sigma2_mean=[parsed.number(r, "sigma2_mean") for r in aggregates],
        sigma2_std=[parsed.number(r, "sigma2_std") for r in aggregates],
        entropy_mean=[parsed.number(r, "entropy_mean") for r in aggregates],
        entropy_std=[parsed.number(r, "entropy_std") for r in aggregates],
        comments=parsed.comments)


@dataclass
class CollapseData:
    cosines: list
    bin_left: list
    bin_right: list
    bin_density: list
    stats: dict
    comments: dict


def load_collapse(text: str) -> CollapseData:
    parsed = parse(text)
    check_header(parsed, COLLAPSE_COLUMNS)
    trials = [r for r in parsed.rows if r[0] == "trial"]
    if not trials:
        raise SchemaError("no trial rows")
    bins = [r for r in parsed.rows if r[0] == "hist_bin"]
    if not bins:
        raise SchemaError("no hist_bin rows")
    stats = {}
    for r in parsed.rows:
        if r[0] == "stat":
            stats[parsed.cell(r, "stat_name")] = parsed.number(r, "stat_value")
    for required in ("trials", "variance"):
        if required not in stats:
            raise SchemaError(f"missing stat row {required!r}")
    if not stats["variance"] > 0:
        raise SchemaError("stat 'variance': must be positive for the "
                          "Gaussian overlay")
    return CollapseData(
        cosines=[parsed.number(r, "final_cosine") for r in trials],
        bin_left=[parsed.number(r, "bin_left") for r in bins],
        bin_right=[parsed.number(r, "bin_right") for r in bins],
        bin_density=[parsed.number(r, "bin_density") for r in bins],
        stats=stats,
        comments=parsed.comments)


@dataclass
class AblationData:
    gammas: list
    stats: dict
    comments: dict


def load_ablation(text: str) -> AblationData:
    parsed = parse(text)
    check_header(parsed, ABLATION_COLUMNS)
    per_gamma: dict = {}
    for r in parsed.rows:
        if r[0] != "stat":
            continue
        gamma = parsed.number(r, "gamma_ln")
        name = parsed.cell(r, "stat_name")
        per_gamma.setdefault(gamma, {})[name] = parsed.number(r, "stat_value")
    if not per_gamma:
        raise SchemaError("no stat rows")
    for gamma, stats in per_gamma.items():
        for required in ABLATION_STAT_NAMES:
            if required not in stats:
                raise SchemaError(
                    f"missing stat row {required!r} for gamma_ln={gamma}")
    gammas = sorted(per_gamma)
    return AblationData(gammas=gammas,
                        stats={g: per_gamma[g] for g in gammas},
                        comments=parsed.comments)
