"""Problem synthesis, problem/embedding file I/O, and dataset splitting.

Problem files are JSON lines (one record per line). Embedding files are a
little-endian binary format: magic "IGNE", u32 version, u32 record count,
u32 dim; then per record a u16 id length, the UTF-8 id, and six float32
vectors in order [part1..part5, question]. Empty parts are stored as
all-zero vectors. Floats are widened to 64-bit on load.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DomainError,
    FormatError,
    IntegrityError,
    ParseError,
    TruncationError,
    ValidationError,
)
from .rng import Rng

MAGIC = b"IGNE"
FORMAT_VERSION = 1
N_PARTS = 5
N_SLOTS = 4
SOURCES = ("toefl", "arxiv", "synthetic")

# Tokens that end with a period but do not end a sentence.
ABBREVIATIONS = (
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "Fig.", "Eq.",
    "al.", "e.g.", "i.e.", "vs.", "etc.",
)

_SPLIT_RE = re.compile(r'([.!?]+)(\s+)(?=["\'“‘]?[A-Z])')


@dataclass
class InsertionProblem:
    """One insertion question: five context parts, the removed sentence, gold slot."""

    id: str
    parts: list[str]
    question: str
    label: int
    source: str = "synthetic"

    def validate(self) -> "InsertionProblem":
        if len(self.parts) != N_PARTS:
            raise ValidationError(f"problem {self.id!r}: expected {N_PARTS} parts, got {len(self.parts)}")
        if not isinstance(self.label, int) or not 0 <= self.label < N_SLOTS:
            raise ValidationError(f"problem {self.id!r}: label {self.label} outside 0..{N_SLOTS - 1}")
        if not self.question:
            raise ValidationError(f"problem {self.id!r}: empty question")
        return self


@dataclass
class EmbeddingRecord:
    """The six fixed-width vectors of one problem, keyed by problem id."""

    id: str
    parts: list[np.ndarray]
    question: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.question.shape[0])


@dataclass
class EmbeddedProblem:
    """An insertion problem joined with its embeddings; empty parts are zero vectors."""

    id: str
    part_embeddings: list[np.ndarray]
    question_embedding: np.ndarray
    label: int

    @property
    def dim(self) -> int:
        return int(self.question_embedding.shape[0])

    def empty_parts(self) -> list[bool]:
        return [not np.any(v) for v in self.part_embeddings]


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitter.

    Splits on ./!/? followed by whitespace and an upper-case or quoted
    start, except after a fixed abbreviation list; periods inside decimal
    numbers never match because they are not followed by whitespace.
    """
    text = text.strip()
    if not text:
        return []
    pieces: list[str] = []
    start = 0
    for m in _SPLIT_RE.finditer(text):
        candidate = text[start : m.end(1)]
        last_word = candidate.rsplit(None, 1)[-1] if candidate.split() else ""
        if any(last_word == a or last_word.endswith(a) for a in ABBREVIATIONS):
            continue
        pieces.append(candidate.strip())
        start = m.end()
    tail = text[start:].strip()
    if tail:
        pieces.append(tail)
    return pieces


def filter_abstract(text: str, min_sentences: int = 5, word_threshold: int = 100) -> bool:
    """Accept a paragraph as synthesis material; reject short or thin ones."""
    sentences = split_sentences(text)
    words = text.split()
    return len(sentences) >= min_sentences and len(words) >= word_threshold


def problem_from_choices(sentences: Sequence[str], removed: int,
                         distractor_gaps: Sequence[int],
                         problem_id: str = "synth-0",
                         source: str = "synthetic") -> InsertionProblem:
    """Deterministic core of problem synthesis.

    Removing sentence p from n sentences leaves n-1 sentences with n gaps
    (gap g inserts before remaining[g]); the true gap is p. The true gap
    plus three distinct distractors are sorted ascending; the label is the
    true gap's rank. Parts are the five runs of remaining sentences
    delimited by the four gaps, space-joined.
    """
    sentences = list(sentences)
    n = len(sentences)
    if n < 5:
        raise DomainError(f"need at least 5 sentences, got {n}")
    if not 0 <= removed < n:
        raise DomainError(f"removed index {removed} outside 0..{n - 1}")
    distractors = sorted(set(distractor_gaps))
    if len(distractors) != 3 or removed in distractors \
            or any(not 0 <= g < n for g in distractors):
        raise DomainError(f"need 3 distinct distractor gaps in 0..{n - 1} excluding {removed}")
    question = sentences[removed]
    remaining = sentences[:removed] + sentences[removed + 1 :]
    gaps = sorted([removed] + distractors)
    label = gaps.index(removed)
    bounds = [0] + gaps + [len(remaining)]
    parts = [" ".join(remaining[bounds[i] : bounds[i + 1]]) for i in range(N_PARTS)]
    return InsertionProblem(id=problem_id, parts=parts, question=question,
                            label=label, source=source)


def synthesize_problem(sentences: Sequence[str], rng: Rng,
                       problem_id: str = "synth-0", source: str = "synthetic") -> InsertionProblem:
    """One insertion problem with a uniformly drawn removal and distractor gaps."""
    n = len(sentences)
    if n < 5:
        raise DomainError(f"need at least 5 sentences, got {n}")
    removed = rng.below(n)
    distractors = [g for g in rng.sample_indices(n, n) if g != removed][:3]
    return problem_from_choices(sentences, removed, distractors,
                                problem_id=problem_id, source=source)


def reassemble(problem: InsertionProblem) -> str:
    """Parts with the question inserted at the labeled slot, space-joined."""
    seq = problem.parts[: problem.label + 1] + [problem.question] + problem.parts[problem.label + 1 :]
    return " ".join(s for s in seq if s)


def synthesize_corpus(paragraphs: Iterable[str], rng: Rng, per_paragraph: int = 1,
                      min_sentences: int = 5, word_threshold: int = 100,
                      source: str = "synthetic", id_prefix: str = "synth") -> list[InsertionProblem]:
    """Filter paragraphs and synthesize problems; each item uses a forked stream."""
    problems = []
    for i, text in enumerate(paragraphs):
        if not filter_abstract(text, min_sentences, word_threshold):
            continue
        sentences = split_sentences(text)
        item_rng = Rng(rng.seed ^ ((i + 1) * 0x9E3779B97F4A7C15 & 0xFFFFFFFFFFFFFFFF))
        for k in range(per_paragraph):
            problems.append(
                synthesize_problem(sentences, item_rng,
                                   problem_id=f"{id_prefix}-{i}-{k}", source=source)
            )
    return problems


def write_problems(path, problems: Sequence[InsertionProblem]) -> None:
    seen: set[str] = set()
    with open(path, "w", encoding="utf-8") as fh:
        for p in problems:
            p.validate()
            if p.id in seen:
                raise IntegrityError(f"duplicate problem id {p.id!r}")
            seen.add(p.id)
            fh.write(json.dumps({"id": p.id, "parts": p.parts, "question": p.question,
                                 "label": p.label, "source": p.source}) + "\n")


def read_problems(path) -> list[InsertionProblem]:
    problems: list[InsertionProblem] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: line {lineno}: {e}") from e
            try:
                p = InsertionProblem(
                    id=str(rec["id"]), parts=list(rec["parts"]),
                    question=str(rec["question"]), label=int(rec["label"]),
                    source=str(rec.get("source", "synthetic")),
                ).validate()
            except (KeyError, TypeError, ValueError) as e:
                raise ParseError(f"{path}: line {lineno}: bad record: {e}") from e
            except ValidationError as e:
                raise ValidationError(f"{path}: line {lineno}: {e}") from e
            if p.id in seen:
                raise IntegrityError(f"{path}: line {lineno}: duplicate id {p.id!r}")
            seen.add(p.id)
            problems.append(p)
    return problems


def write_embeddings(path, records: Sequence[EmbeddingRecord]) -> None:
    if not records:
        raise DomainError("refusing to write an empty embedding file")
    dim = records[0].dim
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, len(records), dim))
        for rec in records:
            vectors = rec.parts + [rec.question]
            if any(v.shape != (dim,) for v in vectors):
                raise ConfigError(f"record {rec.id!r}: vector dim differs from {dim}")
            ident = rec.id.encode("utf-8")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            for v in vectors:
                fh.write(np.asarray(v, dtype="<f4").tobytes())


def read_embeddings(path, expected_dim: int | None = None) -> list[EmbeddingRecord]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 16:
        raise TruncationError(f"{path}: header truncated")
    version, count, dim = struct.unpack_from("<III", blob, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if expected_dim is not None and dim != expected_dim:
        raise ConfigError(f"{path}: file dim {dim} != configured dim {expected_dim}")
    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    at = 16
    vec_bytes = 4 * dim
    for _ in range(count):
        if at + 2 > len(blob):
            raise TruncationError(f"{path}: truncated record header at byte {at}")
        (id_len,) = struct.unpack_from("<H", blob, at)
        at += 2
        if at + id_len + 6 * vec_bytes > len(blob):
            raise TruncationError(f"{path}: truncated record at byte {at}")
        ident = blob[at : at + id_len].decode("utf-8")
        at += id_len
        vectors = []
        for _ in range(6):
            v = np.frombuffer(blob, dtype="<f4", count=dim, offset=at).astype(np.float64)
            vectors.append(v)
            at += vec_bytes
        if ident in seen:
            raise IntegrityError(f"{path}: duplicate id {ident!r}")
        seen.add(ident)
        records.append(EmbeddingRecord(id=ident, parts=vectors[:5], question=vectors[5]))
    if at != len(blob):
        raise TruncationError(f"{path}: {len(blob) - at} trailing bytes beyond header-implied length")
    return records


def join_embeddings(problems: Sequence[InsertionProblem],
                    records: Sequence[EmbeddingRecord]) -> list[EmbeddedProblem]:
    """Pair problems with their embedding records by id."""
    by_id = {r.id: r for r in records}
    out = []
    for p in problems:
        rec = by_id.get(p.id)
        if rec is None:
            raise DataError(f"no embedding for problem id {p.id!r}")
        out.append(EmbeddedProblem(id=p.id, part_embeddings=list(rec.parts),
                                   question_embedding=rec.question, label=p.label))
    return out


def split_dataset(problems: Sequence, ratio: float, rng: Rng) -> tuple[list, list]:
    """Seed-deterministic (train, validation) partition; val size = round(ratio*n)."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0,1), got {ratio}")
    n = len(problems)
    k = int(np.floor(ratio * n + 0.5))
    val_idx = sorted(rng.sample_indices(n, k))
    val_set = set(val_idx)
    train = [problems[i] for i in range(n) if i not in val_set]
    val = [problems[i] for i in val_idx]
    return train, val


def make_planted_problems(count: int, dim: int, rng: Rng,
                          noise_std: float = 0.1) -> list[EmbeddedProblem]:
    """Synthetic embedded problems whose true slot is recoverable by construction.

    Parts are unit-variance normal vectors; the question is the mean of the
    true slot's two neighboring parts plus N(0, noise_std^2) noise.
    """
    problems = []
    for i in range(count):
        parts = [rng.normals(1, dim)[0] for _ in range(N_PARTS)]
        label = rng.below(N_SLOTS)
        question = 0.5 * (parts[label] + parts[label + 1]) + noise_std * rng.normals(1, dim)[0]
        problems.append(EmbeddedProblem(id=f"planted-{i}", part_embeddings=parts,
                                        question_embedding=question, label=label))
    return problems
