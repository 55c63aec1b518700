"""Canonical-form rendering for decoupled pizza-order parses, plus slot catalogs.

The template grammar covers Order, Pizzaorder, Drinkorder, Number, Size,
Style, Topping, Complex_topping(Quantity), Not, Containertype and
Drinktype. Rendering preserves the sibling order of slots exactly, and
the same templates parse canonical-form text back into the tree, which is
what makes round-trip testing possible.

The exact phrasing for negation, quantities and container types is a
repo convention (see the shipped ``cf_templates.json``); slot values are
assumed not to contain the joiner tokens ("," / "and") or the frame
keywords ("pizza", "with", "no", "of", "style").
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple, Sequence

from .trees import Dialect, Intent, Node, ParseTree, Slot, Token, serialize_node


class CatalogError(ValueError):
    pass


class SlotUnknown(CatalogError):
    pass


class NoAlternative(CatalogError):
    pass


class TemplateError(ValueError):
    pass


class UncoveredConstruct(TemplateError):
    """A tree node has no rendering template."""


class TemplateMismatch(TemplateError):
    """Canonical-form text does not fit the template grammar."""


@dataclass(frozen=True)
class SlotCatalog:
    """Per-slot value lists; value lookup is case-insensitive."""

    entries: Mapping[str, tuple[str, ...]]

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[str]]) -> "SlotCatalog":
        entries = {}
        for label, values in mapping.items():
            vals = tuple(str(v) for v in values)
            if any(not v.strip() for v in vals):
                raise CatalogError(f"empty value under slot {label!r}")
            entries[label] = vals
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "SlotCatalog":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    @classmethod
    def default(cls) -> "SlotCatalog":
        return _default_catalog()

    def labels(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def values(self, slot_label: str) -> tuple[str, ...]:
        wanted = slot_label.lower()
        for label, vals in self.entries.items():
            if label.lower() == wanted:
                return vals
        raise SlotUnknown(slot_label)

    def has_value(self, slot_label: str, value: str) -> bool:
        try:
            vals = self.values(slot_label)
        except SlotUnknown:
            return False
        return value.lower() in {v.lower() for v in vals}

    def iter_values(self) -> Iterator[tuple[str, str]]:
        for label, vals in self.entries.items():
            for v in vals:
                yield label, v


@lru_cache(maxsize=1)
def _default_catalog() -> SlotCatalog:
    text = resources.files("clasp.data").joinpath("pizza_catalog.json").read_text()
    return SlotCatalog.from_mapping(json.loads(text))


class CatalogMatch(NamedTuple):
    slot_label: str
    value: str
    span: tuple[int, int]  # token index span, end exclusive


def contains_catalog_word(text: str, catalog: SlotCatalog) -> list[CatalogMatch]:
    """All maximal case-insensitive whole-word catalog matches in ``text``.

    Tokens are whitespace-delimited, so "ham" never matches inside
    "champagne". Matches strictly contained in a longer match are dropped.
    """
    tokens = text.split()
    lowered = [t.lower() for t in tokens]
    raw: list[CatalogMatch] = []
    for label, value in catalog.iter_values():
        needle = value.lower().split()
        k = len(needle)
        for i in range(len(lowered) - k + 1):
            if lowered[i : i + k] == needle:
                raw.append(CatalogMatch(label, value, (i, i + k)))
    maximal = [
        m
        for m in raw
        if not any(
            (o.span[0] <= m.span[0] and m.span[1] <= o.span[1] and o.span != m.span)
            for o in raw
        )
    ]
    return sorted(maximal, key=lambda m: (m.span, m.slot_label, m.value))


def sample_replacement(
    catalog: SlotCatalog, slot_label: str, exclude: str, rng_seed: int
) -> str:
    """Seeded uniform draw of a catalog value different from ``exclude``."""
    values = catalog.values(slot_label)
    candidates = [v for v in values if v.lower() != exclude.lower()]
    if not candidates:
        raise NoAlternative(f"no alternative to {exclude!r} for slot {slot_label!r}")
    return random.Random(rng_seed).choice(candidates)


@dataclass(frozen=True)
class CfTemplateSet:
    """Declarative templates driving canonical-form rendering and parsing."""

    order_prefix: str = "i want"
    order_joiner: str = "and"
    list_separator: str = ","
    list_final_joiner: str = "and"
    pizza_word: str = "pizza"
    with_word: str = "with"
    container_word: str = "of"
    negation_word: str = "no"
    negated_style_marker: str = "style"
    number_words: tuple[tuple[str, str], ...] = (("a", "one"),)
    size_values: tuple[str, ...] = ()
    quantity_values: tuple[str, ...] = ()
    labels: tuple[tuple[str, str], ...] = ()

    @classmethod
    def from_mapping(cls, data: Mapping) -> "CfTemplateSet":
        kwargs = dict(data)
        if "number_words" in kwargs:
            kwargs["number_words"] = tuple(sorted(kwargs["number_words"].items()))
        if "labels" in kwargs:
            kwargs["labels"] = tuple(sorted(kwargs["labels"].items()))
        for key in ("size_values", "quantity_values"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "CfTemplateSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    @classmethod
    def default(cls) -> "CfTemplateSet":
        return _default_templates()

    def canonical_label(self, name: str) -> str:
        for key, label in self.labels:
            if key == name:
                return label
        return name.capitalize()

    def render_number(self, value: str) -> str:
        for word, rendered in self.number_words:
            if value.lower() == word:
                return rendered
        return value

    def unrender_number(self, rendered: str) -> str:
        for word, out in self.number_words:
            if rendered.lower() == out:
                return word
        return rendered


@lru_cache(maxsize=1)
def _default_templates() -> CfTemplateSet:
    text = resources.files("clasp.data").joinpath("cf_templates.json").read_text()
    return CfTemplateSet.from_mapping(json.loads(text))


def _label(node: Node) -> str:
    if isinstance(node, Token):
        raise UncoveredConstruct("bare token under an intent (tree not decoupled?)")
    return node.label.lower()


def _value_text(node: Node) -> str:
    if isinstance(node, Token) or not all(
        isinstance(c, Token) for c in node.children
    ):
        raise UncoveredConstruct(getattr(node, "label", "<token>"))
    if not node.children:
        raise UncoveredConstruct(node.label)
    return " ".join(c.text for c in node.children)


def to_canonical_form(tree: ParseTree, templates: CfTemplateSet | None = None) -> str:
    """Render a decoupled parenthesis-dialect tree as canonical-form text.

    Slot mentions appear in exactly the sibling order of the tree.
    """
    t = templates or CfTemplateSet.default()
    root = tree.root
    if isinstance(root, Token) or _label(root) != "order":
        raise UncoveredConstruct(getattr(root, "label", "<token>"))
    suborders = []
    for child in root.children:
        lab = _label(child)
        if lab == "pizzaorder":
            suborders.append(_render_pizza(child, t))
        elif lab == "drinkorder":
            suborders.append(_render_drink(child, t))
        else:
            raise UncoveredConstruct(child.label)
    if not suborders:
        raise UncoveredConstruct(root.label)
    return t.order_prefix + " " + f" {t.order_joiner} ".join(suborders)


def _render_pizza(node: Node, t: CfTemplateSet) -> str:
    children = list(node.children)
    if not children or _label(children[0]) != "number":
        raise UncoveredConstruct(node.label)
    parts = [t.render_number(_value_text(children[0]))]
    i = 1
    if i < len(children) and _label(children[i]) == "size":
        parts.append(_value_text(children[i]))
        i += 1
    if i < len(children) and _label(children[i]) == "style":
        parts.append(_value_text(children[i]))
        i += 1
    items = []
    for child in children[i:]:
        lab = _label(child)
        if lab == "topping":
            items.append(_value_text(child))
        elif lab == "complex_topping":
            items.append(_render_complex(child, t))
        elif lab == "not":
            items.append(_render_not(child, t))
        else:
            raise UncoveredConstruct(child.label)
    parts.append(t.pizza_word)
    if items:
        parts.append(t.with_word)
        parts.append(_join_list(items, t))
    return " ".join(parts)


def _render_complex(node: Node, t: CfTemplateSet) -> str:
    kids = list(node.children)
    if (
        len(kids) != 2
        or _label(kids[0]) != "quantity"
        or _label(kids[1]) != "topping"
    ):
        raise UncoveredConstruct(node.label)
    return f"{_value_text(kids[0])} {_value_text(kids[1])}"


def _render_not(node: Node, t: CfTemplateSet) -> str:
    kids = list(node.children)
    if len(kids) != 1:
        raise UncoveredConstruct(node.label)
    lab = _label(kids[0])
    if lab == "topping":
        return f"{t.negation_word} {_value_text(kids[0])}"
    if lab == "style":
        return f"{t.negation_word} {_value_text(kids[0])} {t.negated_style_marker}"
    if lab == "complex_topping":
        return f"{t.negation_word} {_render_complex(kids[0], t)}"
    raise UncoveredConstruct(kids[0].label)


def _render_drink(node: Node, t: CfTemplateSet) -> str:
    children = list(node.children)
    if not children or _label(children[0]) != "number":
        raise UncoveredConstruct(node.label)
    parts = [t.render_number(_value_text(children[0]))]
    i = 1
    if i < len(children) and _label(children[i]) == "size":
        parts.append(_value_text(children[i]))
        i += 1
    if i < len(children) and _label(children[i]) == "containertype":
        parts.append(_value_text(children[i]))
        parts.append(t.container_word)
        i += 1
    if len(children) - i != 1 or _label(children[i]) != "drinktype":
        raise UncoveredConstruct(node.label)
    parts.append(_value_text(children[i]))
    return " ".join(parts)


def _join_list(items: Sequence[str], t: CfTemplateSet) -> str:
    if len(items) == 1:
        return items[0]
    head = f" {t.list_separator} ".join(items[:-1])
    return f"{head} {t.list_separator} {t.list_final_joiner} {items[-1]}"


def from_canonical_form(
    s: str, templates: CfTemplateSet | None = None
) -> ParseTree:
    """Parse canonical-form text produced by these templates back to a tree."""
    t = templates or CfTemplateSet.default()
    tokens = s.split()
    prefix = t.order_prefix.split()
    if tokens[: len(prefix)] != prefix:
        raise TemplateMismatch(f"text does not start with {t.order_prefix!r}")
    rest = tokens[len(prefix) :]
    if not rest:
        raise TemplateMismatch("no order content after prefix")
    chunks = _split_on_joiner(rest, t)
    suborders = []
    for chunk in chunks:
        if t.pizza_word in chunk:
            suborders.append(_parse_pizza(chunk, t))
        else:
            suborders.append(_parse_drink(chunk, t))
    root = Intent(t.canonical_label("order"), tuple(suborders))
    return ParseTree(root, Dialect.PIZZA_PAREN)


def _split_on_joiner(tokens: Sequence[str], t: CfTemplateSet) -> list[list[str]]:
    # A bare joiner separates suborders; "<sep> <joiner>" belongs to an
    # item list and stays inside the chunk.
    chunks: list[list[str]] = [[]]
    for i, tok in enumerate(tokens):
        if (
            tok == t.order_joiner
            and chunks[-1]
            and chunks[-1][-1] != t.list_separator
        ):
            chunks.append([])
            continue
        chunks[-1].append(tok)
    if any(not c for c in chunks):
        raise TemplateMismatch("dangling order joiner")
    return chunks


def _take_number(chunk: Sequence[str], t: CfTemplateSet) -> tuple[str, int]:
    if not chunk:
        raise TemplateMismatch("empty suborder")
    return t.unrender_number(chunk[0]), 1


def _take_listed(
    chunk: Sequence[str], i: int, values: Sequence[str]
) -> tuple[str | None, int]:
    """Longest match of any lexicon value starting at position i."""
    best: str | None = None
    for value in values:
        vt = value.split()
        if list(chunk[i : i + len(vt)]) == vt:
            if best is None or len(vt) > len(best.split()):
                best = value
    if best is None:
        return None, i
    return best, i + len(best.split())


def _slot(t: CfTemplateSet, name: str, value_tokens: Sequence[str]) -> Slot:
    if not value_tokens:
        raise TemplateMismatch(f"empty {name} value")
    return Slot(t.canonical_label(name), tuple(Token(v) for v in value_tokens))


def _parse_pizza(chunk: Sequence[str], t: CfTemplateSet) -> Intent:
    number, i = _take_number(chunk, t)
    kids: list[Node] = [_slot(t, "number", number.split())]
    size, i = _take_listed(chunk, i, t.size_values)
    if size is not None:
        kids.append(_slot(t, "size", size.split()))
    try:
        p = list(chunk).index(t.pizza_word, i)
    except ValueError:
        raise TemplateMismatch(f"missing {t.pizza_word!r} keyword") from None
    if p > i:
        kids.append(_slot(t, "style", chunk[i:p]))
    i = p + 1
    if i < len(chunk):
        if chunk[i] != t.with_word:
            raise TemplateMismatch(f"expected {t.with_word!r} after {t.pizza_word!r}")
        kids.extend(_parse_item_list(chunk[i + 1 :], t))
    return Intent(t.canonical_label("pizzaorder"), tuple(kids))


def _parse_item_list(tokens: Sequence[str], t: CfTemplateSet) -> list[Node]:
    if not tokens:
        raise TemplateMismatch("empty item list")
    segments: list[list[str]] = [[]]
    for tok in tokens:
        if tok == t.list_separator:
            segments.append([])
        else:
            segments[-1].append(tok)
    if len(segments) > 1:
        last = segments[-1]
        if not last or last[0] != t.list_final_joiner:
            raise TemplateMismatch("item list missing final joiner")
        segments[-1] = last[1:]
    if any(not seg for seg in segments):
        raise TemplateMismatch("empty item in list")
    return [_parse_item(seg, t) for seg in segments]


def _parse_item(segment: Sequence[str], t: CfTemplateSet) -> Node:
    if segment[0] == t.negation_word:
        inner = segment[1:]
        if not inner:
            raise TemplateMismatch("negation without content")
        if len(inner) > 1 and inner[-1] == t.negated_style_marker:
            wrapped: Node = _slot(t, "style", inner[:-1])
        else:
            wrapped = _parse_positive_item(inner, t)
        return Intent(t.canonical_label("not"), (wrapped,))
    return _parse_positive_item(segment, t)


def _parse_positive_item(segment: Sequence[str], t: CfTemplateSet) -> Node:
    quantity, j = _take_listed(segment, 0, t.quantity_values)
    if quantity is not None and j < len(segment):
        return Intent(
            t.canonical_label("complex_topping"),
            (
                _slot(t, "quantity", quantity.split()),
                _slot(t, "topping", segment[j:]),
            ),
        )
    return _slot(t, "topping", segment)


def _parse_drink(chunk: Sequence[str], t: CfTemplateSet) -> Intent:
    number, i = _take_number(chunk, t)
    kids: list[Node] = [_slot(t, "number", number.split())]
    size, i = _take_listed(chunk, i, t.size_values)
    if size is not None:
        kids.append(_slot(t, "size", size.split()))
    if t.container_word in chunk[i:]:
        j = list(chunk).index(t.container_word, i)
        kids.append(_slot(t, "containertype", chunk[i:j]))
        i = j + 1
    if i >= len(chunk):
        raise TemplateMismatch("drink order missing drink type")
    kids.append(_slot(t, "drinktype", chunk[i:]))
    return Intent(t.canonical_label("drinkorder"), tuple(kids))
