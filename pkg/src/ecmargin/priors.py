"""Per-class instance counts and the statistics (n+, n-, alpha) derived from them.

The negative count for a class is everything that is not the class: all other
foreground classes plus the background pool, whose size is a user-supplied
ratio r times the total foreground count.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

from .errors import InputFormatError, UnknownClassError, ValidationError


@dataclass(frozen=True)
class ClassEntry:
    class_id: int
    name: str
    instance_count: int


@dataclass(frozen=True)
class ClassCounts:
    """Immutable per-class instance counts plus an optional background ratio."""

    entries: tuple[ClassEntry, ...]
    background_ratio: float | None = None

    def __post_init__(self):
        seen: set[int] = set()
        for e in self.entries:
            if e.class_id < 0:
                raise ValidationError(f"class_id must be >= 0, got {e.class_id}")
            if e.instance_count < 0:
                raise ValidationError(
                    f"instance_count must be >= 0, got {e.instance_count} for class {e.class_id}"
                )
            if e.class_id in seen:
                raise ValidationError(f"duplicate class_id {e.class_id}")
            seen.add(e.class_id)
        if self.background_ratio is not None and self.background_ratio < 0:
            raise ValidationError(
                f"background_ratio must be >= 0, got {self.background_ratio}"
            )

    def total_foreground(self) -> int:
        return sum(e.instance_count for e in self.entries)

    def get(self, class_id: int) -> ClassEntry:
        for e in self.entries:
            if e.class_id == class_id:
                return e
        raise UnknownClassError(f"unknown class_id {class_id}")


@dataclass(frozen=True)
class ClassStats:
    """Positive/negative counts and their ratio alpha = n_minus / n_plus."""

    n_plus: int
    n_minus: int
    alpha: float

    def __post_init__(self):
        if self.n_plus < 1 or self.n_minus < 1:
            raise ValidationError(
                f"counts must be >= 1, got n_plus={self.n_plus}, n_minus={self.n_minus}"
            )
        expected = self.n_minus / self.n_plus
        # one ulp of slack so round-tripped values are not rejected
        if abs(self.alpha - expected) > math.ulp(expected):
            raise ValidationError(f"alpha {self.alpha} is not n_minus/n_plus = {expected}")


def load_counts(path: str, format: str | None = None) -> ClassCounts:
    """Load per-class counts from a JSON or CSV file.

    JSON schema: {"categories": [{"id", "name", "instance_count"}, ...],
    "background_ratio": <optional number>}.  CSV schema: header
    ``id,name,instance_count`` and one row per class.  When ``format`` is
    None it is inferred from the file extension.
    """
    if format is None:
        format = "csv" if str(path).lower().endswith(".csv") else "json"
    if format not in ("json", "csv"):
        raise ValidationError(f"format must be 'json' or 'csv', got {format!r}")
    if format == "json":
        return _load_json(path)
    return _load_csv(path)


def _load_json(path: str) -> ClassCounts:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict) or "categories" not in data:
        raise InputFormatError(f"{path}: top-level object must contain a 'categories' list")
    cats = data["categories"]
    if not isinstance(cats, list):
        raise InputFormatError(f"{path}: 'categories' must be a list")
    entries = []
    for i, cat in enumerate(cats):
        if not isinstance(cat, dict):
            raise InputFormatError(f"{path}: categories[{i}] is not an object")
        try:
            cid = cat["id"]
            name = cat["name"]
            count = cat["instance_count"]
        except KeyError as exc:
            raise InputFormatError(f"{path}: categories[{i}] is missing field {exc.args[0]!r}") from exc
        if not isinstance(cid, int) or isinstance(cid, bool):
            raise InputFormatError(f"{path}: categories[{i}].id must be an integer, got {cid!r}")
        if not isinstance(count, int) or isinstance(count, bool):
            raise InputFormatError(
                f"{path}: categories[{i}].instance_count must be an integer, got {count!r}"
            )
        entries.append(ClassEntry(cid, str(name), count))
    ratio = data.get("background_ratio")
    if ratio is not None and not isinstance(ratio, (int, float)):
        raise InputFormatError(f"{path}: background_ratio must be a number, got {ratio!r}")
    return ClassCounts(entries=tuple(entries), background_ratio=None if ratio is None else float(ratio))


def _load_csv(path: str) -> ClassCounts:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["id", "name", "instance_count"]:
            raise InputFormatError(
                f"{path}: line 1: expected header 'id,name,instance_count', got {','.join(header)!r}"
            )
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise InputFormatError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            try:
                cid = int(row[0])
            except ValueError:
                raise InputFormatError(f"{path}: line {lineno}: field 'id' is not an integer: {row[0]!r}") from None
            try:
                count = int(row[2])
            except ValueError:
                raise InputFormatError(
                    f"{path}: line {lineno}: field 'instance_count' is not an integer: {row[2]!r}"
                ) from None
            entries.append(ClassEntry(cid, row[1], count))
    return ClassCounts(entries=tuple(entries))


def background_count(counts: ClassCounts, ratio: float) -> int:
    """Number of background samples implied by the ratio r: round(r * total).

    Rounding is half-away-from-zero (2.5 -> 3), since all inputs are
    nonnegative this is floor(x + 0.5).
    """
    if ratio < 0:
        raise ValidationError(f"ratio must be >= 0, got {ratio}")
    total = counts.total_foreground()
    if total < 1:
        raise ValidationError("total foreground count is 0; background ratio is meaningless")
    return int(math.floor(ratio * total + 0.5))


def class_stats(counts: ClassCounts, class_id: int, background: int) -> ClassStats:
    """Stats for one class: n_plus = n_c, n_minus = (all foreground + background) - n_c."""
    if background < 0:
        raise ValidationError(f"background must be >= 0, got {background}")
    entry = counts.get(class_id)
    if entry.instance_count < 1:
        raise ValidationError(
            f"class {class_id} has zero instances; margins are undefined for empty classes"
        )
    n_plus = entry.instance_count
    n_minus = counts.total_foreground() + background - n_plus
    if n_minus < 1:
        raise ValidationError(
            f"class {class_id} has no negatives (n_minus={n_minus}); need at least one other sample"
        )
    return ClassStats(n_plus=n_plus, n_minus=n_minus, alpha=n_minus / n_plus)


def all_class_stats(counts: ClassCounts, background: int) -> dict[int, ClassStats]:
    """class_stats for every class, keyed by class_id."""
    return {e.class_id: class_stats(counts, e.class_id, background) for e in counts.entries}
