"""TOP-style semantic parse trees: parse, serialize, traverse, edit.

Two surface dialects are supported: parenthesized trees with bare labels,
e.g. ``(Order (Pizzaorder (Number a ) (Topping mushroom ) ) )``, and
bracketed trees whose labels carry ``IN:``/``SL:`` prefixes, e.g.
``[IN:GET_WEATHER [SL:DATE_TIME this weekend ] ]``.

Tokens are whitespace-delimited and never split further; serialization
joins all atoms with single spaces, so ``serialize(parse(s)) ==
" ".join(s.split())`` for every well-formed input.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence, Union


class Dialect(str, Enum):
    PIZZA_PAREN = "pizza"
    MTOP_BRACKET = "mtop"


class TreeError(ValueError):
    """Base class for parse-tree errors."""


class UnbalancedDelimiters(TreeError):
    pass


class EmptyLabel(TreeError):
    pass


class BadDialectMarker(TreeError):
    pass


class PathInvalid(TreeError):
    pass


class UnmatchableSlot(TreeError):
    """A leaf-slot value does not occur as a contiguous token run."""


@dataclass(frozen=True)
class Token:
    text: str


@dataclass(frozen=True)
class Intent:
    label: str
    children: tuple["Node", ...] = ()


@dataclass(frozen=True)
class Slot:
    label: str
    children: tuple["Node", ...] = ()


Node = Union[Intent, Slot, Token]


@dataclass(frozen=True)
class ParseTree:
    root: Node
    dialect: Dialect


@dataclass(frozen=True)
class SlotRef:
    """Reference to a leaf slot: a Slot node whose children are all Tokens."""

    path: tuple[int, ...]
    slot_label: str
    value: tuple[str, ...]

    @property
    def value_text(self) -> str:
        return " ".join(self.value)


_INTENT_OPEN = "[IN:"
_SLOT_OPEN = "[SL:"


def parse(s: str, dialect: Dialect) -> ParseTree:
    """Parse a whitespace-tokenized tree string.

    In the parenthesis dialect, groups with only Token children become
    Slots and everything else becomes an Intent; in the bracket dialect
    the label prefix decides the node kind.
    """
    pieces = s.split()
    if not pieces:
        raise UnbalancedDelimiters("cannot parse empty input")
    # Each frame: [node_class or None, label, children]; class resolved at
    # close time for the parenthesis dialect.
    stack: list[list] = []
    root: Node | None = None

    def attach(node: Node) -> None:
        nonlocal root
        if stack:
            stack[-1][2].append(node)
        elif root is None:
            root = node
        else:
            raise UnbalancedDelimiters(f"multiple top-level groups in {s!r}")

    for piece in pieces:
        if dialect is Dialect.PIZZA_PAREN:
            if piece.startswith(_INTENT_OPEN) or piece.startswith(_SLOT_OPEN):
                raise BadDialectMarker(
                    f"bracketed label {piece!r} in parenthesis-dialect input"
                )
            if piece.startswith("("):
                label = piece[1:]
                if not label:
                    raise EmptyLabel(f"missing label after '(' in {s!r}")
                stack.append([None, label, []])
                continue
            if piece == ")":
                if not stack:
                    raise UnbalancedDelimiters(f"unmatched ')' in {s!r}")
                _, label, children = stack.pop()
                kids = tuple(children)
                if kids and all(isinstance(c, Token) for c in kids):
                    attach(Slot(label, kids))
                else:
                    attach(Intent(label, kids))
                continue
        else:
            if piece.startswith(_INTENT_OPEN) or piece.startswith(_SLOT_OPEN):
                cls = Intent if piece.startswith(_INTENT_OPEN) else Slot
                label = piece[1:]
                if len(label) <= 3:
                    raise EmptyLabel(f"missing name after {piece!r}")
                stack.append([cls, label, []])
                continue
            if piece == "]":
                if not stack:
                    raise UnbalancedDelimiters(f"unmatched ']' in {s!r}")
                cls, label, children = stack.pop()
                attach(cls(label, tuple(children)))
                continue
        if not stack:
            raise UnbalancedDelimiters(f"token {piece!r} outside any group in {s!r}")
        stack[-1][2].append(Token(piece))

    if stack:
        raise UnbalancedDelimiters(f"unclosed group in {s!r}")
    if root is None:
        raise UnbalancedDelimiters(f"no tree in {s!r}")
    return ParseTree(root, dialect)


def serialize(tree: ParseTree) -> str:
    """Render a tree as a single-space-joined string; inverse of parse."""
    return " ".join(_atoms(tree.root, tree.dialect))


def serialize_node(node: Node, dialect: Dialect) -> str:
    return " ".join(_atoms(node, dialect))


def _atoms(node: Node, dialect: Dialect) -> Iterator[str]:
    if isinstance(node, Token):
        yield node.text
        return
    if dialect is Dialect.PIZZA_PAREN:
        yield "(" + node.label
        close = ")"
    else:
        yield "[" + node.label
        close = "]"
    for child in node.children:
        yield from _atoms(child, dialect)
    yield close


def decouple(tree: ParseTree) -> ParseTree:
    """Drop unlabeled carrier tokens that sit directly under Intent nodes.

    Slot subtrees keep their original sibling order and token children.
    Idempotent.
    """
    return ParseTree(_decouple(tree.root), tree.dialect)


def _decouple(node: Node) -> Node:
    if isinstance(node, Token):
        return node
    if isinstance(node, Intent):
        kids = tuple(
            _decouple(c) for c in node.children if not isinstance(c, Token)
        )
        return Intent(node.label, kids)
    return Slot(node.label, tuple(_decouple(c) for c in node.children))


def leaf_slots(tree: ParseTree) -> list[SlotRef]:
    """Depth-first, left-to-right list of all leaf slots."""
    out: list[SlotRef] = []

    def walk(node: Node, path: tuple[int, ...]) -> None:
        if isinstance(node, Token):
            return
        if isinstance(node, Slot) and all(
            isinstance(c, Token) for c in node.children
        ):
            out.append(
                SlotRef(path, node.label, tuple(c.text for c in node.children))
            )
            return
        for i, child in enumerate(node.children):
            walk(child, path + (i,))

    walk(tree.root, ())
    return out


def replace_slot(
    tree: ParseTree, ref: SlotRef, new_value: Sequence[str]
) -> ParseTree:
    """Return a new tree with the referenced leaf slot's value replaced."""
    value = tuple(new_value)

    def rebuild(node: Node, depth: int) -> Node:
        if depth == len(ref.path):
            if not (
                isinstance(node, Slot)
                and node.label == ref.slot_label
                and all(isinstance(c, Token) for c in node.children)
            ):
                raise PathInvalid(
                    f"path {ref.path} does not resolve to leaf slot {ref.slot_label!r}"
                )
            return Slot(node.label, tuple(Token(t) for t in value))
        if isinstance(node, Token):
            raise PathInvalid(f"path {ref.path} descends through a token")
        idx = ref.path[depth]
        if idx >= len(node.children):
            raise PathInvalid(f"index {idx} out of range at depth {depth}")
        kids = list(node.children)
        kids[idx] = rebuild(kids[idx], depth + 1)
        return type(node)(node.label, tuple(kids))

    return ParseTree(rebuild(tree.root, 0), tree.dialect)


def structure_signature(tree: ParseTree) -> str:
    """Serialization with every leaf-slot value masked by ``_``.

    Two trees have equal signatures exactly when their intent/slot
    skeletons are identical.
    """

    def mask(node: Node) -> Node:
        if isinstance(node, Token):
            return node
        if (
            isinstance(node, Slot)
            and node.children
            and all(isinstance(c, Token) for c in node.children)
        ):
            return Slot(node.label, (Token("_"),))
        return type(node)(node.label, tuple(mask(c) for c in node.children))

    return serialize(ParseTree(mask(tree.root), tree.dialect))


def unordered_normalize(tree: ParseTree) -> ParseTree:
    """Canonical form under arbitrary sibling reordering.

    Children of every node are sorted by (node kind, label, normalized
    serialization), so two trees normalize identically exactly when one
    can be turned into the other by permuting child lists.
    """

    def norm(node: Node) -> Node:
        if isinstance(node, Token):
            return node
        kids = sorted(
            (norm(c) for c in node.children),
            key=lambda c: _sort_key(c, tree.dialect),
        )
        return type(node)(node.label, tuple(kids))

    return ParseTree(norm(tree.root), tree.dialect)


def _sort_key(node: Node, dialect: Dialect) -> tuple[int, str, str]:
    if isinstance(node, Token):
        return (2, node.text, node.text)
    rank = 0 if isinstance(node, Intent) else 1
    return (rank, node.label, serialize_node(node, dialect))


def find_token_span(
    tokens: Sequence[str], value: Sequence[str], *, casefold: bool = False
) -> tuple[int, int] | None:
    """Leftmost contiguous occurrence of ``value`` in ``tokens``, or None."""
    if not value:
        return None
    hay = [t.casefold() for t in tokens] if casefold else list(tokens)
    needle = [t.casefold() for t in value] if casefold else list(value)
    k = len(needle)
    for i in range(len(hay) - k + 1):
        if hay[i : i + k] == needle:
            return (i, i + k)
    return None


def bind_slot_spans(
    tree: ParseTree, tokens: Sequence[str]
) -> list[tuple[SlotRef, tuple[int, int]]]:
    """Bind each leaf slot to the leftmost unused matching token span.

    Slots are visited depth-first; spans never overlap. Raises
    UnmatchableSlot when a value has no free contiguous occurrence.
    """
    used = [False] * len(tokens)
    out: list[tuple[SlotRef, tuple[int, int]]] = []
    for ref in leaf_slots(tree):
        k = len(ref.value)
        if k == 0:
            raise UnmatchableSlot(f"empty value for slot {ref.slot_label!r}")
        span: tuple[int, int] | None = None
        for i in range(len(tokens) - k + 1):
            if tuple(tokens[i : i + k]) == ref.value and not any(used[i : i + k]):
                span = (i, i + k)
                break
        if span is None:
            raise UnmatchableSlot(ref.value_text)
        for i in range(span[0], span[1]):
            used[i] = True
        out.append((ref, span))
    return out
