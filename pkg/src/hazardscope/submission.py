"""Submission CSV: one row per (video, frame) with the driver state and hazard slots.

Header: ``ID,Driver_State_Changed,Hazard_Track_1..S,Hazard_Name_1..S`` with
``ID = {video_id}_{frame_index}``. Slots are packed from the left; a name
without a track is invalid.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .ingest import GroundTruth
from .metrics import EvalReport, combine, evaluate_video

DEFAULT_SLOTS = 22
FORMAT_VERSION = 1
_ID = re.compile(r"(.+)_(\d+)", re.DOTALL)
_BOOL = {"true": True, "false": False, "1": True, "0": False}


@dataclass(frozen=True)
class SubmissionRow:
    video_id: str
    frame_index: int
    driver_state_changed: bool
    hazards: tuple[tuple[str, str], ...] = ()

    @property
    def id(self) -> str:
        return f"{self.video_id}_{self.frame_index}"


@dataclass(frozen=True)
class SubmissionTable:
    rows: tuple[SubmissionRow, ...]
    slots: int = DEFAULT_SLOTS

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.slots < 1:
            raise ValidationError("slot count must be >= 1")
        seen = set()
        for row in self.rows:
            if not row.video_id or row.frame_index < 0:
                raise ValidationError(f"invalid row key {row.video_id!r}/{row.frame_index}")
            if row.id in seen:
                raise ValidationError(f"duplicate ID {row.id}")
            seen.add(row.id)
            if len(row.hazards) > self.slots:
                raise ValidationError(f"{row.id}: {len(row.hazards)} hazards exceed {self.slots} slots")
            if any(not tid for tid, _ in row.hazards):
                raise ValidationError(f"{row.id}: empty hazard track id")

    def header(self) -> list[str]:
        return (["ID", "Driver_State_Changed"]
                + [f"Hazard_Track_{i}" for i in range(1, self.slots + 1)]
                + [f"Hazard_Name_{i}" for i in range(1, self.slots + 1)])

    def by_video(self) -> dict[str, list[SubmissionRow]]:
        out: dict[str, list[SubmissionRow]] = {}
        for row in self.rows:
            out.setdefault(row.video_id, []).append(row)
        for rows in out.values():
            rows.sort(key=lambda r: r.frame_index)
        return out


def write_submission(table: SubmissionTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        # csv only quotes characters of the line terminator; a bare "\r" needs forced quoting
        quoted = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_ALL)
        w.writerow(table.header())
        for row in table.rows:
            pad = table.slots - len(row.hazards)
            tracks = [t for t, _ in row.hazards] + [""] * pad
            names = [n for _, n in row.hazards] + [""] * pad
            cells = [row.id, "True" if row.driver_state_changed else "False", *tracks, *names]
            (quoted if any("\r" in c for c in cells) else w).writerow(cells)


def read_submission(path: str | Path) -> SubmissionTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if len(header) < 4 or (len(header) - 2) % 2 or header[:2] != ["ID", "Driver_State_Changed"]:
            raise ValidationError(f"{path}: bad header {header[:4]}...")
        slots = (len(header) - 2) // 2
        expected = SubmissionTable((), slots).header()
        if header != expected:
            raise ValidationError(f"{path}: header does not match the {slots}-slot layout")
        rows = []
        seen = set()
        for row in reader:
            where = f"{path}:{reader.line_num}"
            if len(row) != len(header):
                raise ValidationError(f"{where}: expected {len(header)} columns, got {len(row)}")
            m = _ID.fullmatch(row[0])
            if not m:
                raise ValidationError(f"{where}: malformed ID {row[0]!r}")
            if row[0] in seen:
                raise ValidationError(f"{where}: duplicate ID {row[0]!r}")
            seen.add(row[0])
            state = _BOOL.get(row[1].strip().lower())
            if state is None:
                raise ValidationError(f"{where}: Driver_State_Changed must be True/False, got {row[1]!r}")
            tracks, names = row[2:2 + slots], row[2 + slots:]
            used = sum(1 for t in tracks if t)
            if any(tracks[i] == "" for i in range(used)) or any(names[i] for i in range(used, slots)):
                raise ValidationError(f"{where}: hazard slots must be packed and names need a track")
            hazards = tuple((tracks[i], names[i]) for i in range(used))
            rows.append(SubmissionRow(m.group(1), int(m.group(2)), state, hazards))
    return SubmissionTable(tuple(rows), slots)


def evaluate_submission(table: SubmissionTable, truths: dict[str, GroundTruth]) -> EvalReport:
    """Score a submission against ground truth for every video it contains."""
    per_video = {}
    for vid, rows in table.by_video().items():
        truth = truths.get(vid)
        if truth is None:
            raise ValidationError(f"no ground truth for video {vid!r}")
        if [r.frame_index for r in rows] != list(range(truth.n_frames)):
            raise ValidationError(f"video {vid!r}: submission frames do not cover 0..{truth.n_frames - 1}")
        per_video[vid] = evaluate_video(
            [r.driver_state_changed for r in rows],
            [[t for t, _ in r.hazards] for r in rows],
            [[n for _, n in r.hazards] for r in rows],
            truth,
        )
    missing = set(truths) - set(per_video)
    if missing:
        raise ValidationError(f"submission lacks videos {sorted(missing)}")
    return combine(per_video)
