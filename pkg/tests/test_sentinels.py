from __future__ import annotations

import random
from dataclasses import replace

import pytest

from clasp.sentinels import (
    UnknownSentinel,
    UnmatchableSlot,
    decode_sentinels,
    encode_sentinels,
    space_join_tokens,
)
from clasp.trees import Dialect, parse, serialize

from conftest import random_encodable_example

MTOP = Dialect.MTOP_BRACKET

FRENCH_TOKENS = [
    "Donne", "-", "moi", "la", "liste", "des", "salons", "de", "l'",
    "automobile", "prévus", "à", "Atlanta", "le", "week", "-", "end",
    "prochain",
]

EN_TEXT = "are there thunder storms on the forecast this weekend"
EN_PARSE = (
    "[IN:GET_WEATHER [SL:WEATHER_ATTRIBUTE thunder storms ] "
    "[SL:DATE_TIME this weekend ] ]"
)
EN_SENTINEL_TEXT = (
    "word0 are word1 there word2 thunder word3 storms word4 on word5 the "
    "word6 forecast word7 this word8 weekend"
)
EN_SENTINEL_PARSE = (
    "[IN:GET_WEATHER [SL:WEATHER_ATTRIBUTE word2 word3 ] "
    "[SL:DATE_TIME word7 word8 ] ]"
)

DE_TEXT = "Sind für dieses Wochenende Gewitter vorhergesagt ?"
DE_PARSE = (
    "[IN:GET_WEATHER [SL:WEATHER_ATTRIBUTE Gewitter ] "
    "[SL:DATE_TIME für dieses Wochenende ] ]"
)
DE_SENTINEL_TEXT = (
    "word0 Sind word1 für word2 dieses word3 Wochenende word4 Gewitter "
    "word5 vorhergesagt word6 ?"
)
DE_SENTINEL_PARSE = (
    "[IN:GET_WEATHER [SL:WEATHER_ATTRIBUTE word4 ] "
    "[SL:DATE_TIME word1 word2 word3 ] ]"
)


class TestSpaceJoin:
    def test_french_tokens(self):
        assert space_join_tokens(FRENCH_TOKENS) == (
            "Donne - moi la liste des salons de l' automobile prévus à "
            "Atlanta le week - end prochain"
        )

    def test_single_token(self):
        assert space_join_tokens(["hi"]) == "hi"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            space_join_tokens([])

    def test_split_inverts_join(self):
        rng = random.Random(3)
        vocab = ["a", "bb", "ccc", "d-d", "e'e"]
        for _ in range(100):
            tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
            assert space_join_tokens(tokens).split(" ") == tokens


class TestEncode:
    def test_english_example(self):
        enc = encode_sentinels(EN_TEXT, parse(EN_PARSE, MTOP))
        assert enc.sentinel_text == EN_SENTINEL_TEXT
        assert serialize(enc.sentinel_parse) == EN_SENTINEL_PARSE
        assert enc.token_map == tuple(EN_TEXT.split())

    def test_german_example(self):
        enc = encode_sentinels(DE_TEXT, parse(DE_PARSE, MTOP))
        assert enc.sentinel_text == DE_SENTINEL_TEXT
        assert serialize(enc.sentinel_parse) == DE_SENTINEL_PARSE

    def test_unmatchable_slot(self):
        with pytest.raises(UnmatchableSlot):
            encode_sentinels("no storms here", parse(EN_PARSE, MTOP))

    def test_sentinel_text_doubles_token_count(self):
        rng = random.Random(11)
        for _ in range(100):
            text, tree = random_encodable_example(rng)
            enc = encode_sentinels(text, tree)
            assert len(enc.sentinel_text.split()) == 2 * len(text.split())

    def test_leftmost_binding_is_deterministic(self):
        text = "b a b"
        tree = parse("[IN:A [SL:X b ] ]", MTOP)
        enc = encode_sentinels(text, tree)
        assert serialize(enc.sentinel_parse) == "[IN:A [SL:X word0 ] ]"


class TestDecode:
    def test_english_example_decodes(self):
        enc = encode_sentinels(EN_TEXT, parse(EN_PARSE, MTOP))
        assert serialize(decode_sentinels(enc)) == EN_PARSE

    def test_round_trip_on_random_examples(self):
        rng = random.Random(19)
        for _ in range(100):
            text, tree = random_encodable_example(rng)
            enc = encode_sentinels(text, tree)
            assert decode_sentinels(enc) == tree

    def test_unknown_sentinel(self):
        enc = encode_sentinels("a b c", parse("[IN:A [SL:X b ] ]", MTOP))
        hyp = replace(enc, sentinel_parse=parse("[IN:A [SL:X word99 ] ]", MTOP))
        with pytest.raises(UnknownSentinel):
            decode_sentinels(hyp)

    def test_non_sentinel_tokens_pass_through(self):
        enc = encode_sentinels("a b c", parse("[IN:A [SL:X b ] ]", MTOP))
        hyp = replace(
            enc, sentinel_parse=parse("[IN:A [SL:X word1 extra ] ]", MTOP)
        )
        assert serialize(decode_sentinels(hyp)) == "[IN:A [SL:X b extra ] ]"
