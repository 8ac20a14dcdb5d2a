"""Hierarchical block classification.

Text is split top-down into a block tree (document -> paragraphs ->
sentences -> words by default).  Words are valued with the model's
confidence vectors and each level reduces its children with a summary
operator until a single vector remains for the whole input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .model import Model

Vector = tuple[float, ...]
OperatorFn = Callable[[list[Vector]], Vector]
Operator = Union[str, OperatorFn]

INCREMENTAL_OPERATORS = ("addition", "maximum", "mean")


class ConfigError(ValueError):
    pass


def zeros(n: int) -> Vector:
    return (0.0,) * n


def add(a: Sequence[float], b: Sequence[float]) -> Vector:
    return tuple(x + y for x, y in zip(a, b))


def reduce_vectors(operator: Operator, vectors: list[Vector], n: int) -> Vector:
    """Apply a summary operator to a list of child vectors (left fold, in order).

    An empty list always reduces to the zero vector.
    """
    if not vectors:
        return zeros(n)
    if callable(operator):
        return tuple(operator(vectors))
    if operator == "addition":
        acc = zeros(n)
        for v in vectors:
            acc = add(acc, v)
        return acc
    if operator == "maximum":
        acc = vectors[0]
        for v in vectors[1:]:
            acc = tuple(x if x >= y else y for x, y in zip(acc, v))
        return acc
    if operator == "mean":
        acc = zeros(n)
        for v in vectors:
            acc = add(acc, v)
        count = len(vectors)
        return tuple(x / count for x in acc)
    raise ConfigError(f"unknown summary operator {operator!r}")


@dataclass(frozen=True)
class Level:
    """One block level above words.

    ``delimiter`` is a regex separating this block's children; it is unused
    on the lowest level, whose children are the tokenizer's words.
    ``operator`` reduces the children's vectors into this block's vector.
    """

    name: str
    delimiter: Optional[str] = None
    operator: Operator = "addition"


@dataclass(frozen=True)
class LevelConfig:
    """Block levels ordered from the top (whole input) down to the level just above words."""

    levels: tuple[Level, ...]

    def __post_init__(self):
        if not self.levels:
            raise ConfigError("at least one block level is required")
        for lv in self.levels[:-1]:
            if not lv.delimiter:
                raise ConfigError(f"level {lv.name!r} needs a delimiter")
        for lv in self.levels:
            if not callable(lv.operator) and lv.operator not in INCREMENTAL_OPERATORS:
                raise ConfigError(f"unknown summary operator {lv.operator!r} on level {lv.name!r}")
        object.__setattr__(self, "_regexes", tuple(re.compile(lv.delimiter) if lv.delimiter else None for lv in self.levels))

    @property
    def max_level(self) -> int:
        return len(self.levels)

    @property
    def top_operator(self) -> Operator:
        return self.levels[0].operator

    def level(self, n: int) -> Level:
        """Level ``n`` in the word=0 numbering (``max_level`` is the top)."""
        return self.levels[self.max_level - n]

    def regex(self, n: int):
        return self._regexes[self.max_level - n]

    def below_top(self) -> "LevelConfig":
        """The configuration for a single child of the top-level block."""
        if self.max_level < 2:
            raise ConfigError("no level below the top one")
        return LevelConfig(self.levels[1:])

    def require_incremental(self) -> None:
        op = self.top_operator
        if callable(op) or op not in INCREMENTAL_OPERATORS:
            raise ConfigError(f"top-level operator {op!r} cannot be updated incrementally")

    @classmethod
    def default(cls, operator: Operator = "addition") -> "LevelConfig":
        return cls(
            (
                Level("document", r"\n[ \t]*\n\s*", operator),
                Level("paragraph", r"[.!?]+", operator),
                Level("sentence", None, operator),
            )
        )

    @classmethod
    def sentences(cls, operator: Operator = "addition", sentence_operator: Optional[Operator] = None) -> "LevelConfig":
        """Two-level document -> sentence -> word hierarchy."""
        return cls(
            (
                Level("document", r"[.!?]+", operator),
                Level("sentence", None, sentence_operator or operator),
            )
        )

    def to_dict(self) -> dict:
        return {
            "levels": [
                {"name": lv.name, "delimiter": lv.delimiter, "operator": lv.operator if isinstance(lv.operator, str) else "custom"}
                for lv in self.levels
            ]
        }


@dataclass
class BlockNode:
    level: int
    span: tuple[int, int]
    children: list["BlockNode"] = field(default_factory=list)
    cv: Optional[Vector] = None
    token: Optional[str] = None

    @property
    def is_leaf(self) -> bool:
        return self.level == 0

    def leaves(self):
        if self.level == 0:
            yield self
            return
        for ch in self.children:
            yield from ch.leaves()

    def to_dict(self) -> dict:
        d = {"level": self.level, "span": list(self.span), "cv": list(self.cv) if self.cv is not None else None}
        if self.token is not None:
            d["token"] = self.token
        d["children"] = [c.to_dict() for c in self.children]
        return d


def parse_blocks(text: str, level_config: LevelConfig, tokenizer, start: int = 0, end: Optional[int] = None, level: Optional[int] = None) -> BlockNode:
    """Split ``text[start:end]`` into a block tree rooted at ``level``.

    Child blocks without any token are dropped, so a text with no tokens
    yields a root with no children.
    """
    if end is None:
        end = len(text)
    if level is None:
        level = level_config.max_level
    node = BlockNode(level, (start, end))
    if level == 1:
        for s, e, tok in tokenizer.spans(text[start:end]):
            node.children.append(BlockNode(0, (start + s, start + e), token=tok))
        return node
    regex = level_config.regex(level)
    pos = start
    for m in regex.finditer(text, start, end):
        if m.end() == m.start():
            continue
        _append_child(node, text, level_config, tokenizer, pos, m.start(), level - 1)
        pos = m.end()
    _append_child(node, text, level_config, tokenizer, pos, end, level - 1)
    return node


def _append_child(node, text, level_config, tokenizer, s, e, level):
    if s >= e:
        return
    child = parse_blocks(text, level_config, tokenizer, s, e, level)
    if child.children:
        node.children.append(child)


def classify_at_level(model: Model, block: BlockNode, level_config: LevelConfig) -> Vector:
    """Compute (and store on every node) the confidence vector of ``block``."""
    if block.level == 0:
        block.cv = model.confidence_vector(block.token)
        return block.cv
    child_cvs = [classify_at_level(model, ch, level_config) for ch in block.children]
    block.cv = reduce_vectors(level_config.level(block.level).operator, child_cvs, model.n_categories)
    return block.cv


def text_vector(model: Model, text: str, level_config: LevelConfig) -> Vector:
    tree = parse_blocks(text, level_config, model.tokenizer)
    return classify_at_level(model, tree, level_config)


@dataclass(frozen=True)
class SelectionPolicy:
    """Pick every category whose value is at least ``(1 - gamma) * max``.

    ``gamma == 0`` is plain argmax (ties keep all maxima).
    """

    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")

    def select(self, cv: Sequence[float]) -> list[int]:
        if not cv or all(v == 0.0 for v in cv):
            return []
        top = max(cv)
        if self.gamma == 0.0:
            return [i for i, v in enumerate(cv) if v == top]
        bound = (1.0 - self.gamma) * top
        return [i for i, v in enumerate(cv) if v >= bound]


@dataclass
class Classification:
    selected: list[str]
    cv: Vector
    tree: BlockNode
    no_evidence: bool

    def to_dict(self, with_tree: bool = False) -> dict:
        d = {"selected": self.selected, "cv": list(self.cv), "no_evidence": self.no_evidence}
        if with_tree:
            d["per_level_cvs"] = self.tree.to_dict()
        return d


def classify(model: Model, text: str, level_config: Optional[LevelConfig] = None, policy: Optional[SelectionPolicy] = None) -> Classification:
    level_config = level_config or LevelConfig.default()
    policy = policy or SelectionPolicy()
    tree = parse_blocks(text, level_config, model.tokenizer)
    cv = classify_at_level(model, tree, level_config)
    names = model.category_names
    return Classification(
        selected=[names[i] for i in policy.select(cv)],
        cv=cv,
        tree=tree,
        no_evidence=all(v == 0.0 for v in cv),
    )


@dataclass
class RunningVector:
    """Incrementally maintained top-level vector.

    For ``mean`` the running sum is kept in ``total`` and divided on read.
    """

    operator: str
    total: Vector
    count: int = 0

    @classmethod
    def empty(cls, operator: str, n: int) -> "RunningVector":
        if callable(operator) or operator not in INCREMENTAL_OPERATORS:
            raise ConfigError(f"operator {operator!r} cannot be updated incrementally")
        return cls(operator, zeros(n), 0)

    def push(self, cv: Vector) -> "RunningVector":
        if self.operator == "maximum":
            if self.count == 0:
                self.total = tuple(cv)
            else:
                self.total = tuple(x if x >= y else y for x, y in zip(self.total, cv))
        else:
            self.total = add(self.total, cv)
        self.count += 1
        return self

    @property
    def value(self) -> Vector:
        if self.operator == "mean":
            if self.count == 0:
                return self.total
            return tuple(x / self.count for x in self.total)
        return self.total


def incremental_append(model: Model, running: RunningVector, block_text: str, level_config: LevelConfig) -> RunningVector:
    """Fold one more top-level child (e.g. a new sentence) into ``running``.

    Blocks without tokens are ignored, exactly as the batch parser drops
    them.
    """
    level_config.require_incremental()
    child_config = level_config.below_top()
    tree = parse_blocks(block_text, child_config, model.tokenizer)
    if not tree.children:
        return running
    return running.push(classify_at_level(model, tree, child_config))


def chunk_vector(model: Model, texts: Sequence[str], level_config: LevelConfig) -> Vector:
    """Sum of the document vectors of a group of writings."""
    acc = zeros(model.n_categories)
    for t in texts:
        acc = add(acc, text_vector(model, t, level_config))
    return acc
