"""Category profiles, incremental training and term valuation.

A model is nothing more than one term-frequency dictionary per category plus
three hyper-parameters.  Every confidence value is derived from those counts
on demand (optionally through a cache), so training never has to revisit old
documents.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Callable, Iterable, Optional, Sequence

FORMAT_VERSION = 1

# guards lambda * MAD when every local value of a term is identical
MAD_EPSILON = 1e-9

DEFAULT_TOKEN_PATTERN = r"[^\W_]+"


class ModelError(ValueError):
    """Raised for malformed models or invalid model operations."""


@dataclass(frozen=True)
class Hyperparams:
    sigma: float = 0.455
    lam: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.sigma <= 1.0:
            raise ModelError(f"sigma must be in (0, 1], got {self.sigma}")
        if not self.lam > 0.0:
            raise ModelError(f"lambda must be positive, got {self.lam}")
        if not self.rho >= 0.0:
            raise ModelError(f"rho must be non-negative, got {self.rho}")

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "lambda": self.lam, "rho": self.rho}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(sigma=float(d["sigma"]), lam=float(d["lambda"]), rho=float(d["rho"]))


@dataclass(frozen=True)
class Tokenizer:
    """Lowercasing regex tokenizer; a token is a maximal alphanumeric run."""

    pattern: str = DEFAULT_TOKEN_PATTERN
    lowercase: bool = True

    def __post_init__(self):
        object.__setattr__(self, "_regex", re.compile(self.pattern))

    def spans(self, text: str) -> list[tuple[int, int, str]]:
        """Return ``(start, end, normalized_token)`` for every token in ``text``."""
        out = []
        for m in self._regex.finditer(text):
            tok = m.group(0)
            if self.lowercase:
                tok = tok.lower()
            if tok:
                out.append((m.start(), m.end(), tok))
        return out

    def tokens(self, text: str) -> list[str]:
        return [t for _, _, t in self.spans(text)]

    def to_dict(self) -> dict:
        return {"pattern": self.pattern, "lowercase": self.lowercase}

    @classmethod
    def from_dict(cls, d: dict) -> "Tokenizer":
        return cls(pattern=d.get("pattern", DEFAULT_TOKEN_PATTERN), lowercase=bool(d.get("lowercase", True)))


@dataclass
class CategoryProfile:
    """Term-frequency dictionary of a single category."""

    name: str
    term_freqs: dict[str, int] = field(default_factory=dict)
    max_freq: int = 0
    doc_count: int = 0

    def learn_tokens(self, tokens: Iterable[str]) -> None:
        tf = self.term_freqs
        mx = self.max_freq
        for tok in tokens:
            n = tf.get(tok, 0) + 1
            tf[tok] = n
            if n > mx:
                mx = n
        self.max_freq = mx

    def copy(self) -> "CategoryProfile":
        return CategoryProfile(self.name, dict(self.term_freqs), self.max_freq, self.doc_count)

    def __len__(self):
        return len(self.term_freqs)


def merge_profiles(a: CategoryProfile, b: CategoryProfile) -> CategoryProfile:
    """Term-wise sum of two profiles of the same category."""
    if a.name != b.name:
        raise ModelError(f"cannot merge profiles of different categories: {a.name!r} vs {b.name!r}")
    tf = dict(a.term_freqs)
    for term, n in b.term_freqs.items():
        tf[term] = tf.get(term, 0) + n
    return CategoryProfile(
        name=a.name,
        term_freqs=tf,
        max_freq=max(tf.values(), default=0),
        doc_count=a.doc_count + b.doc_count,
    )


def significances(lvs: Sequence[float], lam: float) -> list[float]:
    """How far each local value sits above the median, in units of ``lam * MAD``.

    Squashed with ``tanh`` so that no deviation gives ~0.018 and a deviation
    of ``lam * MAD`` gives ~0.982.
    """
    med = median(lvs)
    mad = median([abs(v - med) for v in lvs])
    scale = max(lam * mad, MAD_EPSILON)
    return [0.5 * math.tanh(4.0 * (v - med) / scale - 2.0) + 0.5 for v in lvs]


def sanctions(sgs: Sequence[float], rho: float) -> list[float]:
    """Penalty for being significant to several categories at once."""
    others = len(sgs) - 1
    out = []
    for i in range(len(sgs)):
        c_hat = sum(v for j, v in enumerate(sgs) if j != i)
        base = 1.0 - c_hat / others
        out.append(min(1.0, max(0.0, base)) ** rho)
    return out


def global_values(lvs: Sequence[float], sgs: Sequence[float], sns: Sequence[float]) -> list[float]:
    return [lv * sg * sn for lv, sg, sn in zip(lvs, sgs, sns)]


# (model, term) -> one value per category
Valuation = Callable[["Model", str], list[float]]


class Model:
    """Ordered category profiles plus hyper-parameters.

    Category order is fixed at construction: component ``i`` of every
    confidence vector produced by this model refers to ``categories[i]``.
    ``valuation`` replaces the default term valuation; it exists so that
    other classic scorers (e.g. multinomial Naive Bayes) can be expressed
    with the same classification machinery.
    """

    def __init__(
        self,
        categories: Sequence[str] | Sequence[CategoryProfile],
        hyperparams: Optional[Hyperparams] = None,
        tokenizer: Optional[Tokenizer] = None,
        valuation: Optional[Valuation] = None,
    ):
        profiles = [c if isinstance(c, CategoryProfile) else CategoryProfile(str(c)) for c in categories]
        names = [p.name for p in profiles]
        if len(profiles) < 2:
            raise ModelError("a model needs at least two categories")
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate category names: {names}")
        self.categories: list[CategoryProfile] = profiles
        self.hyperparams = hyperparams or Hyperparams()
        self.tokenizer = tokenizer or Tokenizer()
        self.valuation = valuation
        self.gv_cache: Optional[dict[str, tuple[float, ...]]] = None
        self._index = {name: i for i, name in enumerate(names)}

    # -- structure -----------------------------------------------------

    @property
    def category_names(self) -> list[str]:
        return [p.name for p in self.categories]

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def index_of(self, category: str) -> int:
        try:
            return self._index[category]
        except KeyError:
            raise ModelError(f"unknown category {category!r}; known: {self.category_names}") from None

    def profile(self, category: str) -> CategoryProfile:
        return self.categories[self.index_of(category)]

    def add_category(self, name: str) -> CategoryProfile:
        if name in self._index:
            return self.profile(name)
        p = CategoryProfile(name)
        self._index[name] = len(self.categories)
        self.categories.append(p)
        self.gv_cache = None
        return p

    def vocabulary(self) -> set[str]:
        vocab: set[str] = set()
        for p in self.categories:
            vocab.update(p.term_freqs)
        return vocab

    def with_hyperparams(self, hyperparams: Hyperparams) -> "Model":
        """Copy sharing the (read-only) profiles but valued with other hyper-parameters."""
        return Model(self.categories, hyperparams, self.tokenizer, self.valuation)

    def copy(self) -> "Model":
        return Model([p.copy() for p in self.categories], self.hyperparams, self.tokenizer, self.valuation)

    # -- training ------------------------------------------------------

    def learn_document(self, text: str, category: str, create: bool = False) -> None:
        if create:
            profile = self.add_category(category)
        else:
            profile = self.profile(category)
        tokens = self.tokenizer.tokens(text)
        if not tokens:
            return
        profile.learn_tokens(tokens)
        profile.doc_count += 1
        self.gv_cache = None

    def learn(self, documents: Iterable[tuple[str, str]], create: bool = False) -> "Model":
        for text, category in documents:
            self.learn_document(text, category, create=create)
        return self

    def merge(self, other: "Model") -> "Model":
        """Merge another model's counts into a new model (union of categories, self's order first)."""
        names = self.category_names + [n for n in other.category_names if n not in self._index]
        merged = []
        for name in names:
            a = self.profile(name) if name in self._index else CategoryProfile(name)
            b = other.profile(name) if name in other._index else CategoryProfile(name)
            merged.append(merge_profiles(a, b))
        return Model(merged, self.hyperparams, self.tokenizer, self.valuation)

    # -- valuation -----------------------------------------------------

    def local_value(self, term: str, category: str) -> float:
        return self._local_values(term)[self.index_of(category)]

    def _local_values(self, term: str) -> list[float]:
        sigma = self.hyperparams.sigma
        out = []
        for p in self.categories:
            tf = p.term_freqs.get(term, 0)
            if tf == 0 or p.max_freq == 0:
                out.append(0.0)
            else:
                out.append((tf / p.max_freq) ** sigma)
        return out

    def term_factors(self, term: str) -> tuple[list[float], list[float], list[float]]:
        """Local value, significance and sanction of ``term`` for every category."""
        lvs = self._local_values(term)
        sgs = significances(lvs, self.hyperparams.lam)
        return lvs, sgs, sanctions(sgs, self.hyperparams.rho)

    def significance(self, term: str, category: str) -> float:
        return self.term_factors(term)[1][self.index_of(category)]

    def sanction(self, term: str, category: str) -> float:
        return self.term_factors(term)[2][self.index_of(category)]

    def _default_valuation(self, term: str) -> list[float]:
        return global_values(*self.term_factors(term))

    def global_value(self, term: str, category: str) -> float:
        return self.confidence_vector(term)[self.index_of(category)]

    def confidence_vector(self, term: str) -> tuple[float, ...]:
        """Global value of ``term`` for each category, in category order."""
        cache = self.gv_cache
        if cache is not None:
            cv = cache.get(term)
            if cv is not None:
                return cv
            return self._zero
        if self.valuation is not None:
            return tuple(self.valuation(self, term))
        return tuple(self._default_valuation(term))

    @property
    def _zero(self) -> tuple[float, ...]:
        return (0.0,) * len(self.categories)

    def update_global_values(self) -> "Model":
        """Precompute the confidence vector of every known term."""
        self.gv_cache = None
        table = {term: self.confidence_vector(term) for term in sorted(self.vocabulary())}
        self.gv_cache = table
        return self

    def top_terms(self, category: str, k: int) -> list[tuple[str, float]]:
        """The ``k`` highest-valued terms for ``category`` (ties: lexicographic)."""
        if k <= 0:
            return []
        i = self.index_of(category)
        scored = [(term, self.confidence_vector(term)[i]) for term in self.vocabulary()]
        scored.sort(key=lambda tv: (-tv[1], tv[0]))
        return scored[:k]

    # -- persistence ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "hyperparams": self.hyperparams.to_dict(),
            "tokenizer_config": self.tokenizer.to_dict(),
            "categories": [
                {"name": p.name, "doc_count": p.doc_count, "terms": dict(sorted(p.term_freqs.items()))}
                for p in self.categories
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise ModelError(f"unsupported model format_version {version!r}")
        profiles = []
        for c in d["categories"]:
            terms = {str(t): int(n) for t, n in c["terms"].items()}
            if any(n < 1 for n in terms.values()):
                raise ModelError(f"category {c['name']!r} has non-positive counts")
            profiles.append(
                CategoryProfile(c["name"], terms, max(terms.values(), default=0), int(c.get("doc_count", 0)))
            )
        return cls(
            profiles,
            Hyperparams.from_dict(d["hyperparams"]),
            Tokenizer.from_dict(d.get("tokenizer_config", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def __repr__(self):
        sizes = ", ".join(f"{p.name}={len(p)}" for p in self.categories)
        return f"Model({sizes}; {self.hyperparams})"


def naive_bayes_valuation(model: Model) -> Valuation:
    """Valuation giving add-one smoothed ``log P(term | c)`` from ``model``'s current counts.

    Out-of-vocabulary terms get a zero vector.  Combined with addition at
    every level this makes the classifier score documents like multinomial
    Naive Bayes without class priors.
    """
    vocab = model.vocabulary()
    v = len(vocab)
    denominators = [sum(p.term_freqs.values()) + v for p in model.categories]
    freqs = [dict(p.term_freqs) for p in model.categories]

    def value(_model: Model, term: str) -> list[float]:
        if term not in vocab:
            return [0.0] * len(freqs)
        return [math.log((tf.get(term, 0) + 1) / den) for tf, den in zip(freqs, denominators)]

    return value
