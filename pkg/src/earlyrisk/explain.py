"""Visual explanation of a classification: writings, sentences and words
shaded by their confidence in a focus category."""

from __future__ import annotations

import html
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .classifier import BlockNode, LevelConfig, Vector, add, classify_at_level, parse_blocks, zeros
from .model import Model


@dataclass
class ExplanationTree:
    texts: list[str]
    categories: list[str]
    items: list[BlockNode]
    cv: Vector
    focus: int = 0

    def to_dict(self) -> dict:
        return {
            "categories": self.categories,
            "focus": self.categories[self.focus],
            "cv": list(self.cv),
            "items": [{"text": t, "tree": n.to_dict()} for t, n in zip(self.texts, self.items)],
        }

    def item_vectors(self) -> list[Vector]:
        return [n.cv for n in self.items]

    def trajectory(self) -> list[Vector]:
        """Accumulated vector after each item."""
        acc = zeros(len(self.categories))
        out = []
        for v in self.item_vectors():
            acc = add(acc, v)
            out.append(acc)
        return out


def build_explanation(model: Model, texts: Sequence[str], level_config: Optional[LevelConfig] = None, focus: int | str = 0) -> ExplanationTree:
    level_config = level_config or LevelConfig.default()
    if isinstance(focus, str):
        focus = model.index_of(focus)
    items = []
    acc = zeros(model.n_categories)
    for t in texts:
        tree = parse_blocks(t, level_config, model.tokenizer)
        acc = add(acc, classify_at_level(model, tree, level_config))
        items.append(tree)
    return ExplanationTree(list(texts), model.category_names, items, acc, focus)


def intensities(values: Sequence[float]) -> list[float]:
    """Scale sibling values by their maximum; all zeros when the maximum is not positive."""
    top = max(values, default=0.0)
    if top <= 0.0:
        return [0.0] * len(values)
    return [min(1.0, max(0.0, v / top)) for v in values]


_STYLE = """
body { font-family: sans-serif; max-width: 60em; margin: 2em auto; line-height: 1.5; }
section.writing { border-top: 1px solid #999; padding: .4em 0; }
section.writing > h3 { font-size: .9em; margin: 0 0 .2em 0; color: #333; }
.body { white-space: pre-wrap; }
span.b { border-radius: 2px; }
"""

_LEVEL_CLASS = {0: "word", 1: "sentence", 2: "paragraph"}


def _shade(alpha: float) -> str:
    return f"background-color: rgba(0, 140, 60, {alpha:.4f})"


def _render_block(node: BlockNode, text: str, focus: int, alpha: float, out: list) -> None:
    cls = _LEVEL_CLASS.get(node.level, f"level{node.level}")
    out.append(f'<span class="b {cls}" data-v="{node.cv[focus]:.6g}" data-i="{alpha:.4f}" style="{_shade(alpha)}">')
    if node.level == 0:
        out.append(html.escape(text[node.span[0]:node.span[1]], quote=False))
    else:
        _render_children(node, text, focus, out)
    out.append("</span>")


def _render_children(node: BlockNode, text: str, focus: int, out: list) -> None:
    alphas = intensities([c.cv[focus] for c in node.children])
    pos = node.span[0]
    for child, a in zip(node.children, alphas):
        out.append(html.escape(text[pos:child.span[0]], quote=False))
        _render_block(child, text, focus, a, out)
        pos = child.span[1]
    out.append(html.escape(text[pos:node.span[1]], quote=False))


def render_html(tree: ExplanationTree, focus: Optional[int | str] = None, out_path=None) -> str:
    """Self-contained HTML report; returns the markup and writes it when ``out_path`` is given.

    Each block is shaded by its focus-category value relative to the largest
    value among its siblings, so every level keeps its own contrast.
    """
    if focus is None:
        focus = tree.focus
    if isinstance(focus, str):
        focus = tree.categories.index(focus)
    if not 0 <= focus < len(tree.categories):
        raise ValueError(f"focus category index {focus} out of range")
    name = html.escape(tree.categories[focus])
    cv = ", ".join(f"{html.escape(c)}={v:.4f}" for c, v in zip(tree.categories, tree.cv))
    parts = [
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">",
        f"<title>Explanation: {name}</title><style>{_STYLE}</style></head><body>",
        f"<h1>Confidence in <em>{name}</em></h1>",
        f"<p class=\"summary\">{cv}</p>",
    ]
    alphas = intensities([n.cv[focus] for n in tree.items])
    for i, (node, text, a) in enumerate(zip(tree.items, tree.texts, alphas), 1):
        parts.append(f'<section class="writing" data-v="{node.cv[focus]:.6g}" data-i="{a:.4f}">')
        parts.append(f'<h3 style="{_shade(a)}">Writing {i}</h3>')
        body: list[str] = []
        # the root span covers the whole writing, so the body reproduces it verbatim
        _render_children(node, text, focus, body)
        parts.append(f'<div class="body">{"".join(body)}</div>')
        parts.append("</section>")
    parts.append("</body></html>\n")
    markup = "\n".join(parts)
    if out_path is not None:
        Path(out_path).write_text(markup, encoding="utf-8")
    return markup


def dump_json(tree: ExplanationTree, out_path) -> None:
    Path(out_path).write_text(json.dumps(tree.to_dict(), ensure_ascii=False) + "\n", encoding="utf-8")
