"""Templated caption grammar over categories and analytic attributes."""

from .shapes import ShapeSpec  # noqa: F401  (referenced in docstrings)

DISPLAY_NAMES = {
    "box": "box",
    "sphere": "sphere",
    "cylinder": "cylinder",
    "cone": "cone",
    "torus": "torus",
    "ell_bracket": "ell bracket",
    "table_like": "table",
    "chair_like": "chair",
}

# Prefixes are identified by their literal string; "a" stands for the bare
# article and is adjusted to "an" before vowel-initial noun phrases.
PREFIXES = (
    "a",
    "a photo of",
    "a photo of a",
    "a picture of a",
    "a rendering of",
    "a photo of one",
    "one",
)

_VOWELS = "aeiou"


class UnknownPrefix(ValueError):
    pass


def _with_article(prefix, phrase):
    if prefix not in PREFIXES:
        raise UnknownPrefix(f"unknown prefix {prefix!r}")
    if prefix.split()[-1] == "a" and phrase[0] in _VOWELS:
        prefix = prefix[:-1] + "an"
    return f"{prefix} {phrase}"


def caption(spec, mode="category_only", prefix="a", attribute=None):
    """One caption for a spec.

    mode: "category_only" | "attribute_category" | "prefixed".
    "prefixed" keeps the requested mode's phrase but swaps the leading
    article for the given prefix string.
    """
    noun = DISPLAY_NAMES[spec.category]
    if mode == "category_only":
        return _with_article("a", noun)
    if mode == "attribute_category":
        attr = attribute if attribute is not None else (spec.attributes[0] if spec.attributes else None)
        if attr is None:
            return _with_article("a", noun)
        return _with_article("a", f"{attr} {noun}")
    if mode == "prefixed":
        attr = attribute
        phrase = f"{attr} {noun}" if attr else noun
        return _with_article(prefix, phrase)
    raise ValueError(f"unknown caption mode {mode!r}")


def caption_set(spec, excluded_pairs=(), prefixes=("a",)):
    """All captions for one sample: the category alone, each attribute+category
    pair not excluded, each under every requested prefix.

    `excluded_pairs` is an iterable of (category, attribute) compositions to
    suppress (held-out zero-shot compositions).
    """
    excluded = {tuple(p) for p in excluded_pairs}
    out = []
    for prefix in prefixes:
        out.append(caption(spec, "prefixed", prefix=prefix))
        for attr in spec.attributes:
            if (spec.category, attr) in excluded:
                continue
            out.append(caption(spec, "prefixed", prefix=prefix, attribute=attr))
    # dedupe, order preserved
    seen = set()
    uniq = []
    for c in out:
        if c not in seen:
            seen.add(c)
            uniq.append(c)
    return uniq


def prompt_for(category, attribute=None, prefix="a"):
    """Query prompt for a category, optionally qualified by one attribute or
    a tuple of attributes ("a thin square box")."""
    noun = DISPLAY_NAMES[category]
    if attribute is None:
        phrase = noun
    elif isinstance(attribute, (tuple, list)):
        phrase = " ".join(attribute) + f" {noun}"
    else:
        phrase = f"{attribute} {noun}"
    return _with_article(prefix, phrase)
