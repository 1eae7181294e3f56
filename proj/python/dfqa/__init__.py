"""Python access to the dfqa evaluation core.

Structured values are plain dicts and lists; they travel to the C++ core as
JSON text.
"""

import json
import os
from pathlib import Path

WORKER_SCRIPT = str(Path(__file__).with_name("worker.py"))
os.environ.setdefault("DFQA_WORKER_SCRIPT", WORKER_SCRIPT)

from . import _core  # noqa: E402

DfqaError = _core.DfqaError
PROTOCOL_VERSION = _core.PROTOCOL_VERSION

__all__ = [
    "DfqaError", "PROTOCOL_VERSION", "WORKER_SCRIPT", "judge", "strict_equal", "normalize", "cache_key",
    "build_qa_prompt", "extract_code", "eval_logical_form", "classify_qtype", "parse_error_classes",
    "validate_bundle", "report_from_records", "eval_replay",
]


def _dump(value):
    return "" if value is None else json.dumps(value)


def judge(predicted, truth, config=None):
    """Verdict name for a predicted result against the ground truth."""
    return _core.judge(json.dumps(predicted), json.dumps(truth), _dump(config))


def strict_equal(a, b, config=None):
    return _core.strict_equal(json.dumps(a), json.dumps(b), _dump(config))


def normalize(result, config=None):
    return json.loads(_core.normalize(json.dumps(result), _dump(config)))


def cache_key(messages, model, temperature=0.0, max_tokens=512):
    """SHA-256 of the canonical completion request."""
    return _core.cache_key(json.dumps(messages), model, temperature, max_tokens)


def build_qa_prompt(table, question, supplementary=None, template_dir=""):
    """Messages for one question; only the schema of `table` is used."""
    return json.loads(_core.build_qa_prompt(json.dumps(table), question, _dump(supplementary), template_dir))


def extract_code(completion):
    return json.loads(_core.extract_code(completion))


def eval_logical_form(raw_table, sql):
    """Answer of a WikiSQL logical form over a raw release table."""
    return json.loads(_core.eval_logical_form(json.dumps(raw_table), json.dumps(sql)))


def classify_qtype(sql):
    return _core.classify_qtype(json.dumps(sql))


def parse_error_classes(completion):
    return _core.parse_error_classes(completion)


def validate_bundle(bundle_dir):
    """Problems that make a bundle unusable; empty when it is fine."""
    return _core.validate_bundle(str(bundle_dir))


def report_from_records(paths, count_needs_review=False):
    return json.loads(_core.report_from_records([str(p) for p in paths], count_needs_review))


def eval_replay(bundle_dir, cache_dir, model, pool_size=2, out_dir="", judge=None):
    """Evaluates a bundle from cached completions only; returns the summary."""
    return json.loads(_core.eval_replay(str(bundle_dir), str(cache_dir), model, pool_size, str(out_dir),
                                        _dump(judge)))
