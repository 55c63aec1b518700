"""Command-line pipeline: preprocessing, augmentation, projection, mixing,
scoring, and report rendering.

All randomness flows from the --seed flag; identical inputs and seed give
byte-identical outputs. Config precedence is flags > --config file >
built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace as dc_replace
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import backends, canonical, gate, metrics, mixing, projection, prompts, sentinels
from .backends import BackendError, DecodingConfig, MockBackend, MockRule
from .datasets import (
    Example,
    RowMalformed,
    atomic_write_text,
    class_key,
    dump_record,
    read_jsonl,
    read_mtop_rows,
    read_pizza_rows,
    read_records,
    write_jsonl,
    write_records,
)
from .trees import (
    Dialect,
    TreeError,
    UnmatchableSlot,
    decouple,
    leaf_slots,
    parse as parse_tree,
    replace_slot,
    serialize,
)

log = logging.getLogger("clasp")

DEFAULT_LANGS = ("de", "es", "fr", "hi")


class CliError(Exception):
    """User-facing error; message printed, nonzero exit."""


class MissingInput(CliError):
    pass


class IdMismatch(CliError):
    pass


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        args.func(args)
    except (CliError, RowMalformed, TreeError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    except BackendError as exc:
        log.error("backend failure: %s", exc)
        return 3
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clasp",
        description="Semantic-parsing data augmentation pipeline.",
    )
    parser.set_defaults(command=None)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("preprocess-pizza", help="pizza rows -> dataset with CF targets")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["fixed-cf", "original"], default="fixed-cf")
    p.add_argument("--cf-templates", default=None)
    p.add_argument("--source-tag", default="dev")
    p.set_defaults(func=cmd_preprocess_pizza)

    p = sub.add_parser("preprocess-mtop", help="mtop TSV -> space-joined dataset")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sentinels", action="store_true")
    p.add_argument(
        "--on-unencodable",
        choices=["discard", "keep"],
        default="discard",
        help="training rows that cannot be sentinel-encoded are discarded; "
        "test rows are usually kept",
    )
    p.add_argument("--source-tag", default="train")
    p.set_defaults(func=cmd_preprocess_mtop)

    p = sub.add_parser("augment", help="generate synthetic examples via a backend")
    p.add_argument("--dataset", default=None)
    p.add_argument("--method", choices=["rs", "gb", "ts", "tb", "mt"], default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", choices=["mock", "http"], default=None)
    p.add_argument("--mock-rules", default=None)
    p.add_argument("--catalog", default=None)
    p.add_argument("--anchors", default=None)
    p.add_argument("--langs", default=None, help="comma-separated target languages")
    p.add_argument("--nbest-in", default=None)
    p.add_argument("--nbest-out", default=None)
    p.add_argument("--max-inflight", type=int, default=None)
    p.add_argument("--prompt-templates", default=None)
    p.add_argument("--cf-templates", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--stats-out", default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("project-mt", help="project parses over MT output alignments")
    p.add_argument("--dataset", required=True, help="English source examples")
    p.add_argument("--mt", required=True, help="MT output records {id, language, text}")
    p.add_argument("--align", required=True, help="alignment records {id, language, pairs}")
    p.add_argument("--out", required=True)
    p.add_argument("--stats-out", default=None)
    p.add_argument("--source-tag", choices=["mt-opus", "mt-20b"], default="mt-opus")
    p.add_argument(
        "--check-sentence-marker",
        action="store_true",
        help="reject outputs carrying the marker word or missing the trailing ';'",
    )
    p.set_defaults(func=cmd_project_mt)

    p = sub.add_parser("mix", help="assemble a training manifest")
    p.add_argument("--real", required=True)
    p.add_argument("--real-tag", default="dev")
    p.add_argument(
        "--synthetic",
        action="append",
        default=[],
        metavar="TAG=PATH",
        help="repeatable; e.g. --synthetic clasp-rs=rs.jsonl",
    )
    p.add_argument("--updates", type=int, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plan-out", default=None)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("score", help="exact-match scoring of hypothesis files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--metric", choices=["uem", "sciem"], required=True)
    p.add_argument("--dialect", choices=["pizza", "mtop"], default="mtop")
    p.add_argument("--zero-shot-langs", default=",".join(DEFAULT_LANGS))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="render a stats record file as a text table")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


# ---------------------------------------------------------------- preprocess


def cmd_preprocess_pizza(args: argparse.Namespace) -> None:
    templates = (
        canonical.CfTemplateSet.load(args.cf_templates)
        if args.cf_templates
        else canonical.CfTemplateSet.default()
    )
    rows = read_pizza_rows(args.infile)
    out: list[Example] = []
    uncovered = 0
    for i, row in enumerate(rows):
        tree = decouple(parse_tree(row["TOP"], Dialect.PIZZA_PAREN))
        parse_str = serialize(tree)
        if args.mode == "fixed-cf":
            try:
                cf = canonical.to_canonical_form(tree, templates)
            except canonical.TemplateError:
                uncovered += 1
                continue
        else:
            if "CF" not in row:
                raise RowMalformed(
                    f"row {i}: original mode needs a CF field in the input rows"
                )
            cf = row["CF"]
        out.append(
            Example(
                id=f"pizza-{i:06d}",
                lang="en",
                text=" ".join(row["SRC"].split()),
                parse=parse_str,
                source=args.source_tag,
                cf=cf,
            )
        )
    write_jsonl(args.out, out)
    if uncovered:
        log.info("skipped %d rows not covered by the CF templates", uncovered)
    log.info("wrote %d examples to %s", len(out), args.out)


def cmd_preprocess_mtop(args: argparse.Namespace) -> None:
    rows = read_mtop_rows(args.infile)
    out: list[Example] = []
    unencodable = 0
    for row in rows:
        text = sentinels.space_join_tokens(row["tokens"])
        parse_str = " ".join(row["decoupled_parse"].split())
        ex = Example(
            id=row["id"],
            lang=row["lang"],
            text=text,
            parse=parse_str,
            source=args.source_tag,
        )
        if args.sentinels:
            try:
                enc = sentinels.encode_sentinels(
                    text, parse_tree(parse_str, Dialect.MTOP_BRACKET)
                )
            except UnmatchableSlot:
                unencodable += 1
                if args.on_unencodable == "keep":
                    out.append(ex)
                continue
            ex = dc_replace(
                ex, text=enc.sentinel_text, parse=serialize(enc.sentinel_parse)
            )
        out.append(ex)
    write_jsonl(args.out, out)
    if unencodable:
        log.info(
            "%d rows could not be sentinel-encoded (%s)",
            unencodable,
            args.on_unencodable,
        )
    log.info("wrote %d examples to %s", len(out), args.out)


# ------------------------------------------------------------------- augment


def _merged(args: argparse.Namespace, config: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _require(value, name: str):
    if value is None:
        raise CliError(f"--{name.replace('_', '-')} is required (flag or config file)")
    return value


def _load_backend(kind: str, mock_rules_path: str | None, seed: int):
    if kind == "mock":
        rules = (
            backends.load_mock_rules(mock_rules_path)
            if mock_rules_path
            else [MockRule()]
        )
        return MockBackend(rules, seed=seed)
    return backends.HttpBackend()


def _default_anchor_examples() -> dict[str, tuple[Example, Example]]:
    text = resources.files("clasp.data").joinpath("mtop_anchors.json").read_text()
    return _anchors_from_mapping(json.loads(text))


def _anchors_from_mapping(data: dict) -> dict[str, tuple[Example, Example]]:
    out = {}
    for lang, pair in data.items():
        en = Example(
            id=f"anchor-{lang}-en",
            lang="en",
            text=pair["en"]["text"],
            parse=pair["en"]["parse"],
            source="anchor",
        )
        tgt = Example(
            id=f"anchor-{lang}",
            lang=lang,
            text=pair["tgt"]["text"],
            parse=pair["tgt"]["parse"],
            source="anchor",
        )
        out[lang] = (en, tgt)
    return out


def _load_anchors(path: str | None) -> dict[str, tuple[Example, Example]]:
    if path is None:
        return _default_anchor_examples()
    with open(path, encoding="utf-8") as fh:
        return _anchors_from_mapping(json.load(fh))


def _slot_anchor_pairs(
    anchor_en: Example, anchor_tgt: Example
) -> list[tuple[str, str]]:
    en_tree = parse_tree(anchor_en.parse, Dialect.MTOP_BRACKET)
    tgt_tree = parse_tree(anchor_tgt.parse, Dialect.MTOP_BRACKET)
    pairs = [
        (a.value_text, b.value_text)
        for a, b in zip(leaf_slots(en_tree), leaf_slots(tgt_tree))
    ]
    return pairs or [(anchor_en.text, anchor_tgt.text)]


def _task_seed(seed: int, i: int) -> int:
    return seed * 1_000_003 + i


def _generate_all(backend, tasks, cfg: DecodingConfig, max_inflight: int):
    """Issue requests with bounded concurrency; results keep task order."""
    if max_inflight <= 1:
        return [backend.generate(p, cfg) for p in tasks]
    with ThreadPoolExecutor(max_workers=max_inflight) as pool:
        return list(pool.map(lambda p: backend.generate(p, cfg), tasks))


def _flush_partial(path: str, examples: list[Example]) -> None:
    partial = str(path) + ".partial"
    write_jsonl(partial, examples)
    log.error("flushed %d partial examples to %s", len(examples), partial)


def _stats_paths(args) -> tuple[str, str]:
    stats_json = args.stats_out or str(Path(args.out).with_suffix("")) + ".stats.json"
    return stats_json, str(Path(stats_json).with_suffix(".txt"))


def cmd_augment(args: argparse.Namespace) -> None:
    config = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    method = _require(_merged(args, config, "method"), "method")
    k = _require(_merged(args, config, "k"), "k")
    seed = _require(_merged(args, config, "seed"), "seed")
    backend_kind = _merged(args, config, "backend", "mock")
    max_inflight = _merged(args, config, "max_inflight", 4)
    dataset = _require(_merged(args, config, "dataset"), "dataset")
    langs_raw = _merged(args, config, "langs", ",".join(DEFAULT_LANGS))
    langs = (
        [l.strip() for l in langs_raw.split(",") if l.strip()]
        if isinstance(langs_raw, str)
        else list(langs_raw)
    )
    prompt_templates = (
        prompts.PromptTemplates.load(args.prompt_templates)
        if _merged(args, config, "prompt_templates")
        else prompts.PromptTemplates()
    )
    decoding_overrides = config.get("decoding", {})
    pool = read_jsonl(dataset)
    if not pool:
        raise CliError(f"dataset {dataset} is empty")
    if k <= 0:
        raise CliError("--k must be positive")
    backend = _load_backend(
        backend_kind, _merged(args, config, "mock_rules"), seed
    )
    if method in ("rs", "gb"):
        _augment_pizza(args, config, method, k, seed, backend, pool,
                       prompt_templates, decoding_overrides, max_inflight)
    elif method in ("ts", "tb"):
        _augment_mtop(args, config, method, k, seed, backend, pool, langs,
                      prompt_templates, decoding_overrides, max_inflight)
    else:
        _augment_mt(args, config, k, seed, backend, pool, langs,
                    prompt_templates, decoding_overrides, max_inflight)


def _decoding(default: DecodingConfig, overrides: dict) -> DecodingConfig:
    return dc_replace(default, **overrides) if overrides else default


def _augment_pizza(args, config, method, k, seed, backend, pool,
                   prompt_templates, decoding_overrides, max_inflight) -> None:
    catalog = (
        canonical.SlotCatalog.load(_merged(args, config, "catalog"))
        if _merged(args, config, "catalog")
        else canonical.SlotCatalog.default()
    )
    cf_templates = (
        canonical.CfTemplateSet.load(args.cf_templates)
        if _merged(args, config, "cf_templates")
        else canonical.CfTemplateSet.default()
    )
    cfg = _decoding(DecodingConfig.sampling(n=4), decoding_overrides)
    tasks: list[tuple[int, Example | None, prompts.Prompt | None]] = []
    for i in range(k):
        original = pool[i % len(pool)]
        rng = random.Random(_task_seed(seed, i))
        if method == "rs":
            prompt = _build_rs_task(pool, original, catalog, rng,
                                    _task_seed(seed, i), prompt_templates)
        else:
            arity = min(5, len(pool))
            context = rng.sample(pool, arity)
            prompt = prompts.build_gb_prompt(context, prompt_templates)
        tasks.append((i, original, prompt))

    issued = [(i, ex, p) for i, ex, p in tasks if p is not None]
    examples: list[Example] = []
    events: list[gate.GateEvent] = []
    try:
        results = _generate_all(
            backend, [p for _, _, p in issued], cfg, max_inflight
        )
    except BackendError:
        _flush_partial(args.out, examples)
        raise
    for (i, original, prompt), outs in zip(issued, results):
        input_id = f"{method}-{i:05d}"
        if method == "rs":
            expected_tree = parse_tree(
                prompt.expected.target_parse, Dialect.PIZZA_PAREN
            )
            verdict, event = gate.gate_rs(
                outs, expected_tree, prompt.expected.context_texts, catalog,
                input_id=input_id, language=original.lang,
                templates=prompt_templates,
            )
            fallback_pool = [original]
        else:
            verdict, event = gate.gate_gb(
                outs, prompt.expected.context_texts, catalog,
                input_id=input_id, language=original.lang,
                templates=prompt_templates,
            )
            fallback_pool = _gb_context_pool(pool, prompt)
        if verdict.final is not None:
            emitted = verdict.final
        else:
            emitted = gate.fallback(
                fallback_pool,
                class_key(original.parse) if method == "rs" else None,
                _task_seed(seed, i),
            )
        examples.append(_with_cf(emitted, cf_templates))
        events.append(event)
    # Tasks that never produced a prompt (no replaceable slot) fall back
    # immediately so the output still has k rows.
    for i, original, prompt in tasks:
        if prompt is None:
            examples.append(
                _with_cf(
                    gate.fallback([original], None, _task_seed(seed, i)),
                    cf_templates,
                )
            )
            events.append(
                gate.GateEvent(method, original.lang, f"{method}-{i:05d}", (), None)
            )
    write_jsonl(args.out, examples)
    stats = gate.compile_stats(events)
    _write_stats(args, stats.to_record(), stats.to_table())
    log.info("wrote %d examples to %s", len(examples), args.out)


def _build_rs_task(pool, original, catalog, rng, task_seed, prompt_templates):
    others = [e for e in pool if e.id != original.id]
    if len(others) < 4:
        raise CliError("replace-slots needs at least 5 distinct dataset examples")
    context = rng.sample(others, 4)
    tree = parse_tree(original.parse, Dialect.PIZZA_PAREN)
    refs = list(leaf_slots(tree))
    rng.shuffle(refs)
    for ref in refs:
        try:
            value = canonical.sample_replacement(
                catalog, ref.slot_label, ref.value_text, task_seed
            )
        except canonical.CatalogError:
            continue
        edited = replace_slot(tree, ref, value.split())
        return prompts.build_rs_prompt(context, original, edited, prompt_templates)
    return None


def _gb_context_pool(pool, prompt) -> list[Example]:
    texts = set(prompt.expected.context_texts)
    return [e for e in pool if e.text in texts] or list(pool)


def _with_cf(ex: Example, cf_templates) -> Example:
    if not ex.parse.startswith("("):
        return ex
    try:
        cf = canonical.to_canonical_form(
            decouple(parse_tree(ex.parse, Dialect.PIZZA_PAREN)), cf_templates
        )
    except (canonical.TemplateError, TreeError):
        return ex
    return dc_replace(ex, cf=cf)


def _augment_mtop(args, config, method, k, seed, backend, pool, langs,
                  prompt_templates, decoding_overrides, max_inflight) -> None:
    anchors = _load_anchors(_merged(args, config, "anchors"))
    missing = [lang for lang in langs if lang not in anchors]
    if missing:
        raise CliError(
            f"no anchor pair configured for language(s): {', '.join(missing)}"
        )
    nbest = _load_or_build_nbest(args, config, backend, pool, langs,
                                 prompt_templates, decoding_overrides,
                                 max_inflight)
    cfg = _decoding(DecodingConfig.greedy(), decoding_overrides)
    tasks = []
    for i in range(k):
        lang = langs[i % len(langs)]
        ex = pool[(i // len(langs)) % len(pool)]
        anchor_en, anchor_tgt = anchors[lang]
        if method == "ts":
            tree = parse_tree(ex.parse, Dialect.MTOP_BRACKET)
            for ref in leaf_slots(tree):
                top = nbest.top(ref.value_text, lang)
                if top:
                    tree = replace_slot(tree, ref, top.split())
            prompt = prompts.build_ts_prompt(
                anchor_en, anchor_tgt, ex, tree, lang, prompt_templates
            )
        else:
            prompt = prompts.build_tb_prompt(
                anchor_en, anchor_tgt, ex, lang, prompt_templates
            )
        tasks.append((i, ex, lang, prompt))
    examples: list[Example] = []
    events: list[gate.GateEvent] = []
    try:
        results = _generate_all(backend, [p for _, _, _, p in tasks], cfg,
                                max_inflight)
    except BackendError:
        _flush_partial(args.out, examples)
        raise
    for (i, ex, lang, prompt), outs in zip(tasks, results):
        verdict, event = gate.gate_mtop(
            method, outs[0], prompt.expected, nbest,
            input_id=f"{method}-{i:05d}", language=lang,
            templates=prompt_templates,
        )
        emitted = verdict.final
        if emitted is None:
            emitted = gate.fallback([ex], class_key(ex.parse), _task_seed(seed, i))
        examples.append(emitted)
        events.append(event)
    write_jsonl(args.out, examples)
    stats = gate.compile_stats(events)
    _write_stats(args, stats.to_record(), stats.to_table())
    log.info("wrote %d examples to %s", len(examples), args.out)


def _load_or_build_nbest(args, config, backend, pool, langs, prompt_templates,
                         decoding_overrides, max_inflight) -> gate.SlotNBestMap:
    nbest_in = _merged(args, config, "nbest_in")
    if nbest_in:
        return gate.SlotNBestMap.load(nbest_in)
    anchors = _load_anchors(_merged(args, config, "anchors"))
    values = sorted(
        {
            ref.value_text
            for ex in pool
            for ref in leaf_slots(parse_tree(ex.parse, Dialect.MTOP_BRACKET))
        }
    )
    cfg = _decoding(DecodingConfig.beam(4), decoding_overrides)
    mapping: dict[str, dict[str, list[str]]] = {}
    task_list = []
    for lang in langs:
        pairs = _slot_anchor_pairs(*anchors[lang])
        for value in values:
            task_list.append(
                (lang, value,
                 prompts.build_slot_mt_prompt(pairs, value, lang,
                                              prompt_templates))
            )
    results = _generate_all(backend, [p for _, _, p in task_list], cfg,
                            max_inflight)
    for (lang, value, _), outs in zip(task_list, results):
        candidates = []
        for out in outs:
            try:
                cand = prompts.split_generation(
                    prompts.Method.SLOT_MT, out.text, prompt_templates
                )
            except prompts.InvalidSeparators:
                continue
            if cand.text:
                candidates.append(cand.text)
        if candidates:
            mapping.setdefault(lang, {})[value] = list(dict.fromkeys(candidates))
    nbest = gate.SlotNBestMap.from_mapping(mapping)
    nbest_out = _merged(args, config, "nbest_out") or str(args.out) + ".nbest.json"
    atomic_write_text(
        nbest_out, json.dumps(nbest.to_mapping(), ensure_ascii=False, indent=2)
    )
    log.info("wrote slot n-best lists for %d values to %s", len(values), nbest_out)
    return nbest


def _augment_mt(args, config, k, seed, backend, pool, langs,
                prompt_templates, decoding_overrides, max_inflight) -> None:
    anchors = _load_anchors(_merged(args, config, "anchors"))
    missing = [lang for lang in langs if lang not in anchors]
    if missing:
        raise CliError(
            f"no anchor pair configured for language(s): {', '.join(missing)}"
        )
    cfg = _decoding(DecodingConfig.greedy(), decoding_overrides)
    tasks = []
    for i in range(k):
        lang = langs[i % len(langs)]
        ex = pool[(i // len(langs)) % len(pool)]
        anchor_en, anchor_tgt = anchors[lang]
        prompt = prompts.build_sent_mt_prompt(
            (anchor_en.text, anchor_tgt.text), ex.text, lang, prompt_templates
        )
        tasks.append((ex, lang, prompt))
    try:
        results = _generate_all(backend, [p for _, _, p in tasks], cfg,
                                max_inflight)
    except BackendError:
        _flush_partial(args.out, [])
        raise
    records = [
        {"id": ex.id, "language": lang, "text": outs[0].text}
        for (ex, lang, _), outs in zip(tasks, results)
    ]
    write_records(args.out, records)
    log.info("wrote %d translations to %s", len(records), args.out)


def _write_stats(args, record: dict, table: str) -> None:
    stats_json, stats_txt = _stats_paths(args)
    atomic_write_text(stats_json, json.dumps(record, ensure_ascii=False, indent=2) + "\n")
    atomic_write_text(stats_txt, table)
    log.info("wrote stats to %s and %s", stats_json, stats_txt)


# ---------------------------------------------------------------- project-mt


def cmd_project_mt(args: argparse.Namespace) -> None:
    src = {ex.id: ex for ex in read_jsonl(args.dataset)}
    mt_rows = read_records(args.mt)
    if not mt_rows:
        raise MissingInput(f"MT output file {args.mt} is empty")
    align_rows = read_records(args.align)
    if not align_rows:
        raise MissingInput(f"alignment file {args.align} is empty")
    aligned: dict[tuple[str, str | None], list] = {}
    for row in align_rows:
        aligned[(str(row["id"]), row.get("language"))] = row["pairs"]
    verdicts: list[tuple[str, projection.ProjectionVerdict]] = []
    out: list[Example] = []
    unbound = 0
    for row in mt_rows:
        ex = src.get(str(row["id"]))
        if ex is None:
            raise IdMismatch(f"MT output id {row['id']!r} not in {args.dataset}")
        lang = str(row["language"])
        raw = str(row["text"])
        if args.check_sentence_marker and projection.check_sentence_marker(raw):
            verdicts.append(
                (lang, projection.ProjectionVerdict(
                    frozenset({projection.CONTAINS_SENTENCE})))
            )
            continue
        text = raw.strip()
        if text.endswith(";"):
            text = text[:-1].strip()
        pairs = aligned.get((str(row["id"]), lang)) or aligned.get(
            (str(row["id"]), None)
        )
        if pairs is None:
            raise MissingInput(
                f"no alignment for id {row['id']!r} language {lang!r}"
            )
        try:
            verdict = projection.project_parse(
                ex, text, projection.WordAlignment.from_pairs(pairs)
            )
        except UnmatchableSlot:
            unbound += 1
            continue
        verdicts.append((lang, verdict))
        if verdict.parse is not None:
            out.append(
                Example(
                    id=ex.id,
                    lang=lang,
                    text=text,
                    parse=serialize(verdict.parse),
                    source=args.source_tag,
                )
            )
    write_jsonl(args.out, out)
    stats = projection.mt_stats(verdicts)
    _write_stats(args, stats.to_record(), stats.to_table())
    if unbound:
        log.info("skipped %d rows whose source slots were not contiguous", unbound)
    log.info("wrote %d projected examples to %s", len(out), args.out)


# ----------------------------------------------------------------------- mix


def cmd_mix(args: argparse.Namespace) -> None:
    real = read_jsonl(args.real)
    synthetic: dict[str, list[Example]] = {}
    for spec in args.synthetic:
        tag, _, path = spec.partition("=")
        if not path:
            raise CliError(f"--synthetic takes TAG=PATH, got {spec!r}")
        synthetic[tag] = read_jsonl(path)
    plan = mixing.plan_mix(real, synthetic, updates=args.updates,
                           batch_size=args.batch)
    rows = mixing.emit_manifest(plan, real, synthetic, seed=args.seed,
                                path=args.out, real_tag=args.real_tag)
    plan_path = args.plan_out or str(Path(args.out).with_suffix("")) + ".plan.json"
    atomic_write_text(
        plan_path, json.dumps(plan.to_record(), ensure_ascii=False, indent=2) + "\n"
    )
    log.info(
        "manifest %s: %d rows (%.4f real mass), epochs=%d",
        args.out, len(rows), plan.real_fraction, plan.epochs,
    )


# --------------------------------------------------------------------- score


def cmd_score(args: argparse.Namespace) -> None:
    hyp_rows = {str(r["id"]): r for r in read_records(args.hyp)}
    ref_rows = {str(r["id"]): r for r in read_records(args.ref)}
    if set(hyp_rows) != set(ref_rows):
        only_hyp = sorted(set(hyp_rows) - set(ref_rows))[:3]
        only_ref = sorted(set(ref_rows) - set(hyp_rows))[:3]
        raise IdMismatch(
            f"hyp/ref ids differ (hyp-only {only_hyp}, ref-only {only_ref})"
        )
    pairs = [
        (
            str(hyp_rows[i]["parse"]),
            str(ref_rows[i]["parse"]),
            str(ref_rows[i].get("lang", "")),
        )
        for i in sorted(ref_rows)
    ]
    dialect = (
        Dialect.PIZZA_PAREN if args.dialect == "pizza" else Dialect.MTOP_BRACKET
    )
    zero_shot = tuple(
        l.strip() for l in args.zero_shot_langs.split(",") if l.strip()
    )
    report = metrics.score_corpus(
        pairs, metric=args.metric, dialect=dialect, zero_shot_langs=zero_shot
    )
    table = report.to_table()
    if args.out:
        atomic_write_text(
            args.out,
            json.dumps(report.to_record(), ensure_ascii=False, indent=2) + "\n",
        )
        atomic_write_text(str(Path(args.out).with_suffix(".txt")), table)
    sys.stdout.write(table)


# -------------------------------------------------------------------- report


def cmd_report(args: argparse.Namespace) -> None:
    with open(args.infile, encoding="utf-8") as fh:
        record = json.load(fh)
    kind = record.get("kind")
    if kind == "gate_stats":
        table = _gate_stats_from_record(record).to_table()
    elif kind == "mt_stats":
        table = _mt_stats_from_record(record).to_table()
    elif kind == "metric_report":
        table = _metric_report_from_record(record).to_table()
    elif kind == "mix_plan":
        table = json.dumps(record, indent=2) + "\n"
    else:
        raise CliError(f"unknown record kind {kind!r} in {args.infile}")
    if args.out:
        atomic_write_text(args.out, table)
    sys.stdout.write(table)


def _gate_stats_from_record(record: dict) -> gate.GateStats:
    rows = tuple(
        gate.GateStatsRow(
            method=r["method"],
            language=r["language"],
            inputs=r["inputs"],
            outputs=r["outputs"],
            success_rate_inputs=r["success_rate_inputs"],
            success_rate_outputs=r["success_rate_outputs"],
            success_modes=r["success_modes"],
            failure_modes=r["failure_modes"],
        )
        for r in record["rows"]
    )
    return gate.GateStats(rows)


def _mt_stats_from_record(record: dict) -> projection.MtStats:
    rows = tuple(
        projection.MtStatsRow(
            language=r["language"],
            total=r["total"],
            success_rate=r["success_rate"],
            failure_modes=r["failure_modes"],
        )
        for r in record["rows"]
    )
    return projection.MtStats(rows)


def _metric_report_from_record(record: dict) -> metrics.MetricReport:
    per_lang = {
        lang: metrics.LangScore(total=s["total"], matched=s["matched"])
        for lang, s in record["per_lang"].items()
    }
    return metrics.MetricReport(
        metric=record["metric"],
        per_lang=per_lang,
        zero_shot_langs=tuple(record.get("zero_shot_langs", DEFAULT_LANGS)),
    )


if __name__ == "__main__":
    sys.exit(main())
