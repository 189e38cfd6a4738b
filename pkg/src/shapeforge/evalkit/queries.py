"""Query sets: labelled text prompts generated from the caption grammar."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..grad.rng import stream
from ..synthshape.captions import PREFIXES, UnknownPrefix, prompt_for
from ..synthshape.shapes import CATEGORIES, sample_spec


@dataclass(frozen=True)
class QuerySet:
    entries: tuple            # ((prompt, category), ...)
    prefix: str = "a"

    def __len__(self):
        return len(self.entries)

    def prompts(self):
        return [p for p, _ in self.entries]

    def labels(self):
        return [c for _, c in self.entries]

    def to_json(self):
        return json.dumps({"prefix": self.prefix,
                           "entries": [list(e) for e in self.entries]},
                          sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text, categories=CATEGORIES):
        data = json.loads(text)
        entries = tuple((p, c) for p, c in data["entries"])
        for _, c in entries:
            if c not in categories:
                raise ValueError(f"unknown category label {c!r} in query set")
        return cls(entries, data.get("prefix", "a"))

    @classmethod
    def load(cls, path, categories=CATEGORIES):
        return cls.from_json(Path(path).read_text(), categories)

    def save(self, path):
        Path(path).write_text(self.to_json())


def observed_attributes(categories=CATEGORIES, samples=200, seed=7):
    """Single attributes and co-occurring attribute pairs per category under
    the spec sampler."""
    singles = {}
    pairs = {}
    for cat in categories:
        seen = set()
        seen_pairs = set()
        for i in range(samples):
            attrs = sample_spec(cat, stream(seed, "qattr", cat, i)).attributes
            seen.update(attrs)
            for a in attrs:
                for b in attrs:
                    if a < b:
                        seen_pairs.add((a, b))
        singles[cat] = tuple(sorted(seen))
        pairs[cat] = tuple(sorted(seen_pairs))
    return singles, pairs


def build_query_set(categories=CATEGORIES, prefix="a", include_attributes=True,
                    include_pairs=True, extra_pairs=()):
    """Category-only prompts, every attainable attribute+category prompt, and
    co-occurring two-attribute prompts (the ~60-query desk design).

    `extra_pairs` adds explicit (category, attribute) prompts (e.g. held-out
    compositions) even if the sampler table missed them.
    """
    if prefix not in PREFIXES:
        raise UnknownPrefix(f"unknown prefix {prefix!r}")
    entries = []
    for cat in categories:
        entries.append((prompt_for(cat, prefix=prefix), cat))
    if include_attributes:
        singles, attr_pairs = observed_attributes(categories)
        for cat in categories:
            for attr in singles[cat]:
                entries.append((prompt_for(cat, attr, prefix=prefix), cat))
        if include_pairs:
            for cat in categories:
                for pair in attr_pairs[cat]:
                    entries.append((prompt_for(cat, pair, prefix=prefix), cat))
    for cat, attr in extra_pairs:
        entry = (prompt_for(cat, attr, prefix=prefix), cat)
        if entry not in entries:
            entries.append(entry)
    return QuerySet(tuple(entries), prefix)


def held_out_query_set(held_out_pairs, prefix="a"):
    """Prompts only for the held-out (category, attribute) compositions."""
    entries = tuple((prompt_for(cat, attr, prefix=prefix), cat)
                    for cat, attr in held_out_pairs)
    return QuerySet(entries, prefix)
