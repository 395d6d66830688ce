"""Verdict records and deterministic CSV/JSON emission.

Every numeric check in the verification suite produces one Verdict row.
Rows never carry wall-clock data so artifacts are byte-identical across
runs and worker counts; timing goes to the console only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

VERDICT_HOLDS = "holds"
VERDICT_FAILS = "fails"
VERDICT_NOT_MET = "hypothesis-not-met"
VERDICT_REPORTED = "reported"

#: anchor value for checks that exercise artifact plumbing, not a formula
PLUMBING = "plumbing"


@dataclass
class Verdict:
    check: str      # stable check identifier
    anchor: str     # inequality/identity label, or "plumbing"
    params: str     # evaluation point, e.g. "kappa=0.1,x=(1,0)"
    lhs: float
    rhs: float
    verdict: str
    margin: float   # |rhs-lhs| signed by pass(+)/violation(-)

    @property
    def asserted_ok(self) -> bool:
        return self.verdict != VERDICT_FAILS


VERDICT_COLUMNS = ["check", "anchor", "params", "lhs", "rhs", "verdict", "margin"]


def fmt(x) -> str:
    """Shortest round-trip decimal form; stable across runs."""
    if hasattr(x, "item"):  # numpy scalar
        x = x.item()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_verdicts_csv(path: str | Path, verdicts: Iterable[Verdict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VERDICT_COLUMNS)
        for v in verdicts:
            d = asdict(v)
            w.writerow([fmt(d[c]) for c in VERDICT_COLUMNS])


def write_json(path: str | Path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_rows_csv(path: str | Path, header: list[str], rows: Iterable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(c) for c in row])


def failed(verdicts: Iterable[Verdict]) -> list[Verdict]:
    return [v for v in verdicts if v.verdict == VERDICT_FAILS]
