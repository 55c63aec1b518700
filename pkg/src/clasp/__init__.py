"""Data-augmentation toolkit for semantic parsing.

Core pieces: TOP-style parse-tree editing (:mod:`clasp.trees`), canonical
forms and slot catalogs (:mod:`clasp.canonical`), sentinel-word
preprocessing (:mod:`clasp.sentinels`), exact-match metrics
(:mod:`clasp.metrics`), prompt construction (:mod:`clasp.prompts`),
generation backends (:mod:`clasp.backends`), output gating and recovery
(:mod:`clasp.gate`), alignment projection (:mod:`clasp.projection`),
training-set mixing (:mod:`clasp.mixing`), and the pipeline CLI
(:mod:`clasp.cli`).
"""

__version__ = "0.1.0"

from .datasets import Example
from .trees import Dialect, ParseTree, parse, serialize

__all__ = ["Dialect", "Example", "ParseTree", "parse", "serialize", "__version__"]
