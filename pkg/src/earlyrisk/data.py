"""Corpus and dataset readers.

Two on-disk layouts are accepted:

* JSON lines, one writing per line::

      {"subject_id": "s1", "seq": 0, "text": "...", "label": "positive"}

  ``label`` must appear on at least one record of each labeled subject.
  Records without ``subject_id`` are treated as one-writing subjects, which
  is convenient for plain labeled-document corpora.

* a directory containing ``subjects/<id>.json`` (or ``<id>.json`` files
  directly) with ``{"label": ..., "writings": ["...", ...]}``.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

POSITIVE = "positive"
NEGATIVE = "negative"


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class LabeledStream:
    subject_id: str
    items: list[str]
    truth: Optional[str] = None


def normalize_label(value) -> Optional[str]:
    """Map common binary encodings onto ``positive``/``negative``; keep other names."""
    if value is None:
        return None
    if isinstance(value, bool):
        return POSITIVE if value else NEGATIVE
    if isinstance(value, (int, float)):
        if value in (0, 1):
            return POSITIVE if value == 1 else NEGATIVE
        raise DataError(f"numeric label must be 0 or 1, got {value!r}")
    s = str(value).strip()
    low = s.lower()
    if low in ("1", "true", "pos", "positive", "p"):
        return POSITIVE
    if low in ("0", "false", "neg", "negative", "n"):
        return NEGATIVE
    if not s:
        return None
    return s


def _writing_text(w) -> str:
    if isinstance(w, str):
        return w
    if isinstance(w, dict) and "text" in w:
        return str(w["text"])
    raise DataError(f"cannot read writing {w!r}")


def read_jsonl(path: Path) -> list[LabeledStream]:
    subjects: dict[str, list] = {}
    labels: dict[str, Optional[str]] = {}
    anon = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON ({e})") from None
            if not isinstance(rec, dict) or "text" not in rec:
                raise DataError(f"{path}:{lineno}: record needs a 'text' field")
            sid = rec.get("subject_id")
            if sid is None:
                sid = f"_doc{anon}"
                anon += 1
            sid = str(sid)
            seq = rec.get("seq", len(subjects.get(sid, ())))
            subjects.setdefault(sid, []).append((seq, lineno, str(rec["text"])))
            label = normalize_label(rec.get("label"))
            if label is not None:
                prev = labels.get(sid)
                if prev is not None and prev != label:
                    raise DataError(f"{path}:{lineno}: subject {sid!r} has conflicting labels {prev!r} and {label!r}")
                labels[sid] = label
            else:
                labels.setdefault(sid, None)
    out = []
    for sid, recs in subjects.items():
        recs.sort(key=lambda r: (r[0], r[1]))
        out.append(LabeledStream(sid, [t for _, _, t in recs], labels.get(sid)))
    return out


def read_directory(path: Path) -> list[LabeledStream]:
    base = path / "subjects" if (path / "subjects").is_dir() else path
    files = sorted(base.glob("*.json"))
    out = []
    for fp in files:
        try:
            doc = json.loads(fp.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataError(f"{fp}: invalid JSON ({e})") from None
        if not isinstance(doc, dict) or "writings" not in doc:
            raise DataError(f"{fp}: expected an object with 'writings'")
        out.append(LabeledStream(fp.stem, [_writing_text(w) for w in doc["writings"]], normalize_label(doc.get("label"))))
    return out


def load_dataset(path) -> list[LabeledStream]:
    path = Path(path)
    if path.is_dir():
        streams = read_directory(path)
    elif path.is_file():
        if path.suffix.lower() not in (".jsonl", ".ndjson", ".json"):
            raise DataError(f"{path}: unknown corpus format (expected .jsonl or a directory)")
        streams = read_jsonl(path)
    else:
        raise DataError(f"{path}: no such file or directory")
    return streams


def load_datasets(paths: Iterable) -> list[LabeledStream]:
    out = []
    for p in paths:
        out.extend(load_dataset(p))
    return out


def write_jsonl(streams: Iterable[LabeledStream], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in streams:
            for i, text in enumerate(s.items):
                rec = {"subject_id": s.subject_id, "seq": i, "text": text}
                if s.truth is not None:
                    rec["label"] = s.truth
                f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def convert_erisk_xml(xml_files: Iterable, golden_truth=None) -> list[LabeledStream]:
    """Read eRisk-style ``<INDIVIDUAL>`` XML files into streams.

    Each file holds ``<ID>`` and a list of ``<WRITING>`` elements with
    ``TITLE``, ``DATE`` and ``TEXT``; title and text are joined and writings
    are ordered by date.  Chunk files of the same subject are concatenated.
    ``golden_truth`` is a whitespace separated ``<id> <0|1>`` file.
    """
    labels = {}
    if golden_truth is not None:
        for line in Path(golden_truth).read_text(encoding="utf-8").splitlines():
            parts = line.split()
            if len(parts) >= 2:
                labels[parts[0]] = normalize_label(int(parts[1]))
    writings: dict[str, list] = {}
    for fp in xml_files:
        root = ET.parse(fp).getroot()
        sid = (root.findtext("ID") or Path(fp).stem).strip()
        for w in root.iter("WRITING"):
            title = (w.findtext("TITLE") or "").strip()
            text = (w.findtext("TEXT") or "").strip()
            date = (w.findtext("DATE") or "").strip()
            body = "\n\n".join(x for x in (title, text) if x)
            writings.setdefault(sid, []).append((date, len(writings.get(sid, ())), body))
    out = []
    for sid in sorted(writings):
        ws = sorted(writings[sid])
        out.append(LabeledStream(sid, [b for _, _, b in ws], labels.get(sid)))
    return out
