"""Prompt construction and the inverse splitter for generation outputs.

Every prompt starts with the in-context-learning control token ("[CLM] "),
verbalizes its context examples, and ends with an open cue line the model
is expected to continue. Example verbalizations per augmentation method:

    replace-slots / translate-slots:
        Semantic Parse: <parse>;
        Translation in <Language>: <text>;
    generate-both:
        Semantic Parse: <parse>
        => Translation in <Language>: <text>;
    translate-both:
        Semantic Parse for <Language>: <parse>
        => Translation in <Language>: <text>;

Cue wording is overridable via a JSON template file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .datasets import Example
from .trees import Dialect, ParseTree, parse, leaf_slots, serialize, structure_signature


class PromptError(ValueError):
    pass


class ContextArity(PromptError):
    pass


class BadEdit(PromptError):
    pass


class LanguageUnsupported(PromptError):
    pass


class EmptyValue(PromptError):
    pass


class InvalidSeparators(PromptError):
    """Missing, misplaced, or duplicated ';' / '=>' in a model output."""


class Method(str, Enum):
    REPLACE_SLOTS = "rs"
    TRANSLATE_SLOTS = "ts"
    GENERATE_BOTH = "gb"
    TRANSLATE_BOTH = "tb"
    SLOT_MT = "slot-mt"
    SENT_MT = "sent-mt"


METHOD_DIALECTS = {
    Method.REPLACE_SLOTS: Dialect.PIZZA_PAREN,
    Method.GENERATE_BOTH: Dialect.PIZZA_PAREN,
    Method.TRANSLATE_SLOTS: Dialect.MTOP_BRACKET,
    Method.TRANSLATE_BOTH: Dialect.MTOP_BRACKET,
}


@dataclass(frozen=True)
class PromptTemplates:
    clm_token: str = "[CLM]"
    parse_cue: str = "Semantic Parse:"
    lang_parse_cue: str = "Semantic Parse for {language}:"
    translation_cue: str = "Translation in {language}:"
    arrow: str = "=>"
    terminator: str = ";"
    language_names: tuple[tuple[str, str], ...] = (
        ("en", "English"),
        ("de", "German"),
        ("es", "Spanish"),
        ("fr", "French"),
        ("hi", "Hindi"),
    )

    def language_name(self, code: str) -> str:
        for key, name in self.language_names:
            if code == key or code == name:
                return name
        raise LanguageUnsupported(f"no language name configured for {code!r}")

    def tcue(self, code: str) -> str:
        return self.translation_cue.format(language=self.language_name(code))

    def pcue(self, code: str) -> str:
        return self.lang_parse_cue.format(language=self.language_name(code))

    @classmethod
    def load(cls, path: str | Path) -> "PromptTemplates":
        with open(path, encoding="utf-8") as fh:
            data = dict(json.load(fh))
        if "language_names" in data:
            data["language_names"] = tuple(sorted(data["language_names"].items()))
        return cls(**data)


@dataclass(frozen=True)
class PromptExpectation:
    """What a valid continuation must realize, used by the output gate."""

    language: str = "en"
    target_parse: str | None = None
    source_signature: str | None = None
    source_text: str | None = None
    source_parse: str | None = None
    context_texts: tuple[str, ...] = ()
    context_parses: tuple[str, ...] = ()


@dataclass(frozen=True)
class Prompt:
    text: str
    method: Method
    expected: PromptExpectation


@dataclass(frozen=True)
class SplitCandidate:
    text: str | None = None
    parse_text: str | None = None


def _assemble(templates: PromptTemplates, lines: Sequence[str]) -> str:
    return f"{templates.clm_token} " + "\n".join(lines)


def _sp_block(
    t: PromptTemplates, parse_text: str, text: str, lang: str
) -> list[str]:
    return [
        f"{t.parse_cue} {parse_text}{t.terminator}",
        f"{t.tcue(lang)} {text}{t.terminator}",
    ]


def _gb_block(
    t: PromptTemplates, parse_text: str, text: str, lang: str
) -> list[str]:
    return [
        f"{t.parse_cue} {parse_text}",
        f"{t.arrow} {t.tcue(lang)} {text}{t.terminator}",
    ]


def _tb_block(
    t: PromptTemplates, parse_text: str, text: str, lang: str
) -> list[str]:
    return [
        f"{t.pcue(lang)} {parse_text}",
        f"{t.arrow} {t.tcue(lang)} {text}{t.terminator}",
    ]


def _require_single_slot_edit(
    original_parse: str, edited: ParseTree
) -> None:
    try:
        orig = parse(original_parse, edited.dialect)
    except Exception as exc:
        raise BadEdit(f"original parse unreadable: {exc}") from exc
    if structure_signature(orig) != structure_signature(edited):
        raise BadEdit("edit changes the parse structure, not a slot value")
    diffs = sum(
        1
        for a, b in zip(leaf_slots(orig), leaf_slots(edited))
        if a.value != b.value
    )
    if diffs != 1:
        raise BadEdit(f"edit must change exactly one leaf slot, changed {diffs}")


def build_rs_prompt(
    context: Sequence[Example],
    original: Example,
    edited_parse: ParseTree,
    templates: PromptTemplates | None = None,
) -> Prompt:
    """Same-language prompt: context examples, the original, then the
    slot-edited parse with an open translation cue."""
    t = templates or PromptTemplates()
    if len(context) != 4:
        raise ContextArity(
            f"replace-slots prompts take exactly 4 context examples, got {len(context)}"
        )
    _require_single_slot_edit(original.parse, edited_parse)
    edited = serialize(edited_parse)
    lines: list[str] = []
    for ex in [*context, original]:
        lines += _sp_block(t, ex.parse, ex.text, ex.lang)
    lines.append(f"{t.parse_cue} {edited}{t.terminator}")
    lines.append(t.tcue(original.lang))
    examples = [*context, original]
    return Prompt(
        text=_assemble(t, lines),
        method=Method.REPLACE_SLOTS,
        expected=PromptExpectation(
            language=original.lang,
            target_parse=edited,
            source_parse=original.parse,
            source_text=original.text,
            context_texts=tuple(ex.text for ex in examples),
            context_parses=tuple(ex.parse for ex in examples),
        ),
    )


def build_gb_prompt(
    context: Sequence[Example], templates: PromptTemplates | None = None
) -> Prompt:
    """Open-ended prompt: the model continues with a new parse and text."""
    t = templates or PromptTemplates()
    if not context:
        raise ContextArity("generate-both prompts need at least 1 context example")
    lines: list[str] = []
    for ex in context:
        lines += _gb_block(t, ex.parse, ex.text, ex.lang)
    lines.append(t.parse_cue)
    return Prompt(
        text=_assemble(t, lines),
        method=Method.GENERATE_BOTH,
        expected=PromptExpectation(
            language=context[0].lang,
            context_texts=tuple(ex.text for ex in context),
            context_parses=tuple(ex.parse for ex in context),
        ),
    )


def _require_cross_lingual(t: PromptTemplates, language: str) -> str:
    name = t.language_name(language)  # raises LanguageUnsupported when unknown
    if name == t.language_name("en"):
        raise LanguageUnsupported("cross-lingual methods need a non-English target")
    return name


def build_ts_prompt(
    anchor_en: Example,
    anchor_tgt: Example,
    en_source: Example,
    slot_translated_parse: ParseTree,
    language: str,
    templates: PromptTemplates | None = None,
) -> Prompt:
    """Cross-lingual prompt: anchor pair, the English source, then the
    slot-translated parse with an open target-language cue."""
    t = templates or PromptTemplates()
    _require_cross_lingual(t, language)
    translated = serialize(slot_translated_parse)
    lines: list[str] = []
    lines += _sp_block(t, anchor_en.parse, anchor_en.text, "en")
    lines += _sp_block(t, anchor_tgt.parse, anchor_tgt.text, language)
    lines += _sp_block(t, en_source.parse, en_source.text, "en")
    lines.append(f"{t.parse_cue} {translated}{t.terminator}")
    lines.append(t.tcue(language))
    return Prompt(
        text=_assemble(t, lines),
        method=Method.TRANSLATE_SLOTS,
        expected=PromptExpectation(
            language=language,
            target_parse=translated,
            source_parse=en_source.parse,
            source_text=en_source.text,
            context_texts=(anchor_en.text, anchor_tgt.text, en_source.text),
            context_parses=(anchor_en.parse, anchor_tgt.parse, en_source.parse),
        ),
    )


def build_tb_prompt(
    anchor_en: Example,
    anchor_tgt: Example,
    en_source: Example,
    language: str,
    templates: PromptTemplates | None = None,
) -> Prompt:
    """Cross-lingual prompt asking for both the parse and the text."""
    t = templates or PromptTemplates()
    _require_cross_lingual(t, language)
    signature = structure_signature(parse(en_source.parse, Dialect.MTOP_BRACKET))
    lines: list[str] = []
    lines += _tb_block(t, anchor_en.parse, anchor_en.text, "en")
    lines += _tb_block(t, anchor_tgt.parse, anchor_tgt.text, language)
    lines += _tb_block(t, en_source.parse, en_source.text, "en")
    lines.append(t.pcue(language))
    return Prompt(
        text=_assemble(t, lines),
        method=Method.TRANSLATE_BOTH,
        expected=PromptExpectation(
            language=language,
            source_signature=signature,
            source_parse=en_source.parse,
            source_text=en_source.text,
            context_texts=(anchor_en.text, anchor_tgt.text, en_source.text),
            context_parses=(anchor_en.parse, anchor_tgt.parse, en_source.parse),
        ),
    )


def build_slot_mt_prompt(
    anchor_slot_pairs: Sequence[tuple[str, str]],
    slot_value: str,
    language: str,
    templates: PromptTemplates | None = None,
) -> Prompt:
    """Line-per-pair prompt translating one slot value."""
    t = templates or PromptTemplates()
    _require_cross_lingual(t, language)
    if not slot_value.strip():
        raise EmptyValue("cannot translate an empty slot value")
    if not anchor_slot_pairs:
        raise ContextArity("slot translation needs at least 1 anchor pair")
    lines: list[str] = []
    for src, tgt in anchor_slot_pairs:
        lines.append(f"{t.tcue('en')} {src}{t.terminator}")
        lines.append(f"{t.tcue(language)} {tgt}{t.terminator}")
    lines.append(f"{t.tcue('en')} {slot_value}{t.terminator}")
    lines.append(t.tcue(language))
    return Prompt(
        text=_assemble(t, lines),
        method=Method.SLOT_MT,
        expected=PromptExpectation(
            language=language,
            source_text=slot_value,
            context_texts=tuple(x for pair in anchor_slot_pairs for x in pair),
        ),
    )


def build_sent_mt_prompt(
    anchor_sent_pair: tuple[str, str],
    text: str,
    language: str,
    templates: PromptTemplates | None = None,
) -> Prompt:
    """One-shot sentence-translation prompt; outputs must end with ';'."""
    t = templates or PromptTemplates()
    _require_cross_lingual(t, language)
    if not text.strip():
        raise EmptyValue("cannot translate empty text")
    src, tgt = anchor_sent_pair
    lines = [
        f"{t.tcue('en')} {src}{t.terminator}",
        f"{t.tcue(language)} {tgt}{t.terminator}",
        f"{t.tcue('en')} {text}{t.terminator}",
        t.tcue(language),
    ]
    return Prompt(
        text=_assemble(t, lines),
        method=Method.SENT_MT,
        expected=PromptExpectation(
            language=language,
            source_text=text,
            context_texts=anchor_sent_pair,
        ),
    )


_TEXT_ONLY = (Method.REPLACE_SLOTS, Method.TRANSLATE_SLOTS, Method.SLOT_MT, Method.SENT_MT)
_TRANSLATION_LABEL_RE = re.compile(r"^Translation in [^:]+:\s*")


def split_generation(
    method: Method | str, raw_output: str, templates: PromptTemplates | None = None
) -> SplitCandidate:
    """Invert the continuation format: extract text and/or parse fields.

    Raises InvalidSeparators when ';' or '=>' is missing, misplaced, or
    duplicated for the method's expected shape.
    """
    t = templates or PromptTemplates()
    method = Method(method)
    raw = raw_output.strip()
    if raw.count(t.terminator) != 1 or not raw.endswith(t.terminator):
        raise InvalidSeparators(f"expected exactly one trailing {t.terminator!r}")
    body = raw[: -len(t.terminator)].strip()
    if method in _TEXT_ONLY:
        if t.arrow in body:
            raise InvalidSeparators(f"unexpected {t.arrow!r} in text-only output")
        return SplitCandidate(text=body)
    parts = body.split(t.arrow)
    if len(parts) != 2:
        raise InvalidSeparators(
            f"expected exactly one {t.arrow!r}, found {len(parts) - 1}"
        )
    parse_text = parts[0].strip()
    right = parts[1].strip()
    m = _TRANSLATION_LABEL_RE.match(right)
    if m is None:
        raise InvalidSeparators("missing translation label after the arrow")
    if not parse_text:
        raise InvalidSeparators("empty parse before the arrow")
    return SplitCandidate(text=right[m.end() :].strip(), parse_text=parse_text)


def continuation_for(
    method: Method | str,
    *,
    text: str,
    parse_text: str | None = None,
    language: str = "en",
    templates: PromptTemplates | None = None,
) -> str:
    """Render a well-formed model continuation (inverse of split_generation)."""
    t = templates or PromptTemplates()
    method = Method(method)
    if method in _TEXT_ONLY:
        return f"{text}{t.terminator}"
    if parse_text is None:
        raise ValueError(f"{method.value} continuations need a parse")
    return f"{parse_text}\n{t.arrow} {t.tcue(language)} {text}{t.terminator}"
