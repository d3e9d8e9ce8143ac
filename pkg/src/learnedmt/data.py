"""Records exchanged between modules and their TSV encodings.

Every file is UTF-8, tab-separated, with a mandatory header row. Readers
reject a wrong header or a row with the wrong column count, naming the line.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")


class DataError(ValueError):
    """Malformed input data; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


def _text(value: str, what: str) -> str:
    if not value.strip():
        raise ValueError(f"{what} is empty")
    return value


@dataclass(frozen=True)
class EvalTuple:
    src: str
    hyp: str
    ref: str
    score: float

    def __post_init__(self):
        for name in ("src", "hyp", "ref"):
            _text(getattr(self, name), name)
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")


@dataclass(frozen=True)
class RankQuadruple:
    """A better/worse hypothesis pair for one source, with optional DARR ids."""

    src: str
    better: str
    worse: str
    ref: str
    lp: str = ""
    seg_id: str = ""
    sys_better: str = ""
    sys_worse: str = ""

    def __post_init__(self):
        for name in ("src", "better", "worse", "ref"):
            _text(getattr(self, name), name)
        if self.better == self.worse:
            raise ValueError("better and worse hypotheses are identical")


DARRPair = RankQuadruple


@dataclass(frozen=True)
class PostEditTuple:
    src: str
    hyp: str
    ref: str
    pe: str

    def __post_init__(self):
        for name in ("src", "hyp", "ref", "pe"):
            _text(getattr(self, name), name)


@dataclass(frozen=True)
class DASegment:
    lp: str
    seg_id: str
    system: str
    src: str
    hyp: str
    ref: str
    da: float

    def __post_init__(self):
        for name in ("src", "hyp", "ref"):
            _text(getattr(self, name), name)
        if not math.isfinite(self.da):
            raise ValueError(f"DA score must be finite, got {self.da}")


@dataclass(frozen=True)
class MQMRow:
    src: str
    hyp: str
    ref: str
    minor: int
    major: int
    critical: int


@dataclass(frozen=True)
class ScoredTriple:
    src: str
    hyp: str
    ref: str
    score: float


# --------------------------------------------------------------------------
# schemas

EVAL_COLUMNS = ("src", "hyp", "ref", "score")
PE_COLUMNS = ("src", "hyp", "ref", "pe")
DA_COLUMNS = ("lp", "seg_id", "system", "src", "hyp", "ref", "da")
DARR_COLUMNS = ("lp", "seg_id", "sys_better", "sys_worse", "src", "hyp_better", "hyp_worse", "ref")
MQM_COLUMNS = ("src", "hyp", "ref", "minor", "major", "critical")
TRIPLE_COLUMNS = ("src", "hyp", "ref")
SCORES_COLUMNS = ("src", "hyp", "ref", "score")


def _float(value: str) -> float:
    x = float(value)
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {value!r}")
    return x


def _count(value: str) -> int:
    n = int(value)
    if n < 0:
        raise ValueError(f"negative count {value!r}")
    return n


def format_float(x: float) -> str:
    return repr(float(x))


def read_header(path: str | Path) -> tuple[str, ...]:
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\r\n")
    return tuple(first.split("\t"))


def read_tsv(path: str | Path, columns: Sequence[str], build: Callable[[list[str]], T]) -> list[T]:
    """Read rows of ``path`` against ``columns``; the first bad row aborts."""
    out: list[T] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("missing header row", path, 1) from None
        if tuple(header) != tuple(columns):
            raise DataError(
                f"expected header {'/'.join(columns)}, got {'/'.join(header)}", path, 1
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(columns):
                raise DataError(f"expected {len(columns)} columns, got {len(row)}", path, line)
            try:
                out.append(build(row))
            except ValueError as exc:
                raise DataError(str(exc), path, line) from None
    return out


def write_tsv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            cells = [format_float(c) if isinstance(c, float) else str(c) for c in row]
            for c in cells:
                if "\t" in c or "\n" in c or "\r" in c:
                    raise DataError(f"cell contains a tab or newline: {c!r}", path)
            fh.write("\t".join(cells) + "\n")


def read_eval_tuples(path) -> list[EvalTuple]:
    return read_tsv(path, EVAL_COLUMNS, lambda r: EvalTuple(r[0], r[1], r[2], _float(r[3])))


def write_eval_tuples(path, tuples: Iterable[EvalTuple]) -> None:
    write_tsv(path, EVAL_COLUMNS, ((t.src, t.hyp, t.ref, float(t.score)) for t in tuples))


def read_pe_tuples(path) -> list[PostEditTuple]:
    return read_tsv(path, PE_COLUMNS, lambda r: PostEditTuple(*r))


def write_pe_tuples(path, tuples: Iterable[PostEditTuple]) -> None:
    write_tsv(path, PE_COLUMNS, ((t.src, t.hyp, t.ref, t.pe) for t in tuples))


def read_da(path) -> list[DASegment]:
    return read_tsv(path, DA_COLUMNS, lambda r: DASegment(*r[:6], _float(r[6])))


def write_da(path, segments: Iterable[DASegment]) -> None:
    write_tsv(path, DA_COLUMNS, (
        (s.lp, s.seg_id, s.system, s.src, s.hyp, s.ref, float(s.da)) for s in segments
    ))


def read_darr(path) -> list[RankQuadruple]:
    def build(r):
        lp, seg, sb, sw, src, hb, hw, ref = r
        return RankQuadruple(src, hb, hw, ref, lp=lp, seg_id=seg, sys_better=sb, sys_worse=sw)

    return read_tsv(path, DARR_COLUMNS, build)


def write_darr(path, pairs: Iterable[RankQuadruple]) -> None:
    write_tsv(path, DARR_COLUMNS, (
        (p.lp, p.seg_id, p.sys_better, p.sys_worse, p.src, p.better, p.worse, p.ref)
        for p in pairs
    ))


def read_mqm(path) -> list[MQMRow]:
    return read_tsv(path, MQM_COLUMNS, lambda r: MQMRow(
        _text(r[0], "src"), _text(r[1], "hyp"), _text(r[2], "ref"),
        _count(r[3]), _count(r[4]), _count(r[5]),
    ))


def write_mqm(path, rows: Iterable[MQMRow]) -> None:
    write_tsv(path, MQM_COLUMNS, (
        (r.src, r.hyp, r.ref, r.minor, r.major, r.critical) for r in rows
    ))


def read_triples(path) -> list[tuple[str, str, str]]:
    """Segments to score: triples, eval tuples (gold dropped) or DARR pairs."""
    header = read_header(path)
    if header == DARR_COLUMNS:
        seen: dict[tuple[str, str, str], None] = {}
        for p in read_darr(path):
            seen.setdefault((p.src, p.better, p.ref))
            seen.setdefault((p.src, p.worse, p.ref))
        return list(seen)
    if header == EVAL_COLUMNS:
        return [(t.src, t.hyp, t.ref) for t in read_eval_tuples(path)]
    return read_tsv(path, TRIPLE_COLUMNS, lambda r: (
        _text(r[0], "src"), _text(r[1], "hyp"), _text(r[2], "ref")
    ))


def read_scores(path) -> list[ScoredTriple]:
    return read_tsv(path, SCORES_COLUMNS, lambda r: ScoredTriple(r[0], r[1], r[2], _float(r[3])))


def write_scores(path, scored: Iterable[ScoredTriple]) -> None:
    write_tsv(path, SCORES_COLUMNS, ((s.src, s.hyp, s.ref, float(s.score)) for s in scored))
