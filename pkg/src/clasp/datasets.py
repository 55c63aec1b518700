"""Dataset records and the file formats shared across pipeline commands."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence


class RowMalformed(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    """One dataset row: surface text plus its parse (or training target)."""

    id: str
    lang: str
    text: str
    parse: str
    source: str = ""
    cf: str | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "id": self.id,
            "lang": self.lang,
            "text": self.text,
            "parse": self.parse,
            "source": self.source,
        }
        if self.cf is not None:
            d["cf"] = self.cf
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Example":
        try:
            return cls(
                id=str(d["id"]),
                lang=str(d["lang"]),
                text=str(d["text"]),
                parse=str(d["parse"]),
                source=str(d.get("source", "")),
                cf=d.get("cf"),
            )
        except KeyError as exc:
            raise RowMalformed(f"missing field {exc} in record {d!r}") from exc


def class_key(parse: str) -> str:
    """Top-level intent label of a serialized parse."""
    head = parse.split(None, 1)
    if not head:
        return ""
    return head[0].lstrip("([")


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write a file via temp-file rename so readers never see partial content."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_record(record: dict[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False)


def write_records(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    atomic_write_text(path, "".join(dump_record(r) + "\n" for r in records))


def read_records(path: str | Path) -> list[dict[str, Any]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise RowMalformed(f"{path}:{n}: invalid JSON record") from exc
    return out


def write_jsonl(path: str | Path, examples: Iterable[Example]) -> None:
    write_records(path, (ex.to_dict() for ex in examples))


def read_jsonl(path: str | Path) -> list[Example]:
    return [Example.from_dict(d) for d in read_records(path)]


def read_pizza_rows(path: str | Path) -> list[dict[str, str]]:
    """Read native pizza-ordering rows: JSON lines keyed ``<split>.SRC`` etc.

    Returns dicts keyed by the uppercased key suffix (SRC, TOP, EXR, CF...).
    """
    rows = []
    for n, obj in enumerate(read_records(path), start=1):
        if not isinstance(obj, dict):
            raise RowMalformed(f"{path}:{n}: expected a JSON object")
        row = {key.rsplit(".", 1)[-1].upper(): val for key, val in obj.items()}
        if "SRC" not in row or "TOP" not in row:
            raise RowMalformed(f"{path}:{n}: row lacks SRC/TOP fields")
        rows.append(row)
    return rows


MTOP_COLUMNS = (
    "id",
    "intent",
    "slot_string",
    "utterance",
    "domain",
    "locale",
    "decoupled_parse",
    "tokens_json",
)


def read_mtop_rows(path: str | Path) -> list[dict[str, Any]]:
    """Read tab-separated task-oriented-parsing rows.

    The tokens column holds a JSON object whose ``tokens`` list is the
    tokenization used everywhere downstream; the raw utterance column is
    ignored on purpose.
    """
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < len(MTOP_COLUMNS):
                raise RowMalformed(
                    f"{path}:{n}: expected {len(MTOP_COLUMNS)} tab-separated columns"
                )
            row = dict(zip(MTOP_COLUMNS, parts))
            try:
                tokens = json.loads(row["tokens_json"])["tokens"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise RowMalformed(f"{path}:{n}: bad tokens column") from exc
            if not isinstance(tokens, list) or not all(
                isinstance(t, str) for t in tokens
            ):
                raise RowMalformed(f"{path}:{n}: tokens must be a list of strings")
            row["tokens"] = tokens
            row["lang"] = row["locale"].split("_")[0]
            rows.append(row)
    return rows
