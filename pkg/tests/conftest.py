"""
Shared fixtures: the travel query with pinned toy resources, and a small
two-split EN/MT dataset whose keyword MAP can be worked out by hand.
"""
import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from qexrank.analysis import AnalyzerConfig  # noqa: E402
from qexrank.commands.base import CommandContext  # noqa: E402
from qexrank.resources import EmbeddingStore, HypernymGraph, HyponymEdge, KbEntry, KbSubjectCache  # noqa: E402

TRAVEL_QUERY = (
    "Im likely to travel in the month of june... just wanna know some good places to visit...."
)

# "the" is the closest vector to "travel" but is a stopword, so the two
# neighbours that survive are "travelers" and "trips".
TOY_VECTORS = {
    "travel": [1.0, 0.0, 0.0],
    "the": [0.99, 0.1, 0.0],
    "travelers": [0.95, 0.31, 0.0],
    "trips": [0.9, 0.0, 0.43],
    "june": [0.0, 1.0, 0.0],
    "month": [0.0, 0.9, 0.43],
    "places": [0.2, 0.2, 0.95],
    "visit": [0.5, 0.5, 0.7],
}

TRAVEL_SUBJECTS = ("Tourism", "Tourist activities", "Transport culture")

HYPERNYM_ROWS = [
    ("hyponym", "hypernym", "confidence"),
    ("operating expense", "travel", "0.82"),
    ("related expense", "travel", "0.79"),
    ("personal expense", "travel", "0.75"),
    ("business trip", "travel", "0.7499"),
    ("weekend", "june", "0.40"),
]

FILLER = [
    "cheap pizza delivery downtown",
    "football match tickets sold out",
    "recipe for lentil soup",
    "gym membership prices",
    "mobile phone repair shop",
    "weather forecast tomorrow",
    "car engine oil change",
    "school fees increase",
    "best coffee shop downtown",
    "apartment rent prices",
]

# query_id -> (EN text, MT text, [(doc_id suffix, text, label)] for the non-filler candidates)
TOY_QUERIES = {
    "test": {
        "Q1": (
            TRAVEL_QUERY,
            "I am likely travel in june month... only wanna know good places for visit",
            [("R1", "travel tips for june trips", "PerfectMatch")],
        ),
        "Q2": (
            "Where can I renew my driving license in Doha?",
            "Where I can renew driving license in Doha?",
            [
                ("R1", "renew driving license doha office hours", "Irrelevant"),
                ("R2", "license renewal traffic department", "Relevant"),
            ],
        ),
    },
    "dev": {
        "Q3": (
            "How much are hotel rooms in summer?",
            "How much is the price of hotel rooms in summer?",
            [
                ("R1", "hotel rooms summer discount", "Relevant"),
                ("R2", "summer hotel deals", "Relevant"),
            ],
        ),
        "Q4": (
            "Any advice about visa transfer rules?",
            "Any advices about transfer of visa rules?",
            [
                ("R1", "visa transfer rules changed", "Relevant"),
                ("R2", "visa office closed friday", "Irrelevant"),
            ],
        ),
    },
}

# Keyword baseline on the test split: Q1 ranks its only relevant document
# first (AP 1.0); Q2 ranks the irrelevant four-term match above the
# relevant one-term match (AP 0.5).
EXPECTED_TEST_KW_MAP = 0.75


def toy_records(split: str, scenario: str):
    records = []
    for qid, (en_text, mt_text, special) in TOY_QUERIES[split].items():
        candidates = [
            {"doc_id": f"{qid}_{suffix}", "text": text, "relevance": label}
            for suffix, text, label in special
        ]
        for i in range(len(candidates), 10):
            candidates.append({
                "doc_id": f"{qid}_F{i}",
                "text": FILLER[i % len(FILLER)],
                "relevance": "Irrelevant",
            })
        records.append({
            "query_id": qid,
            "scenario": scenario,
            "text": en_text if scenario == "EN" else mt_text,
            "candidates": candidates,
        })
    return records


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


@pytest.fixture
def analyzer():
    return AnalyzerConfig()


@pytest.fixture
def travel_store():
    words = list(TOY_VECTORS)
    return EmbeddingStore(words, np.array([TOY_VECTORS[w] for w in words]))


@pytest.fixture
def travel_kb():
    return KbSubjectCache([
        KbEntry(key="travel", subjects=TRAVEL_SUBJECTS, fetched_at="2024-01-01T00:00:00+00:00"),
    ])


@pytest.fixture
def travel_graph():
    edges = {}
    for label, hypernym, conf in HYPERNYM_ROWS[1:]:
        edges.setdefault(hypernym, []).append(HyponymEdge(label=label, confidence=float(conf)))
    return HypernymGraph(edges={k: tuple(v) for k, v in edges.items()})


@pytest.fixture
def workspace(tmp_path):
    """Dataset, resources and an INI file wiring them together."""
    data = tmp_path / "data"
    data.mkdir()
    paths = {
        "dataset_en": write_jsonl(data / "test.en.jsonl", toy_records("test", "EN")),
        "dataset_mt": write_jsonl(data / "test.mt.jsonl", toy_records("test", "MT")),
        "dev_en": write_jsonl(data / "dev.en.jsonl", toy_records("dev", "EN")),
        "dev_mt": write_jsonl(data / "dev.mt.jsonl", toy_records("dev", "MT")),
    }

    embeddings = data / "vectors.txt"
    embeddings.write_text(
        "".join(f"{w} {' '.join(str(x) for x in v)}\n" for w, v in TOY_VECTORS.items()),
        encoding="utf-8",
    )
    hypernyms = data / "hypernyms.tsv"
    hypernyms.write_text("".join("\t".join(row) + "\n" for row in HYPERNYM_ROWS),
                         encoding="utf-8")
    kb_cache = data / "kb.jsonl"
    write_jsonl(kb_cache, [
        {"key": "travel", "subjects": list(TRAVEL_SUBJECTS),
         "fetched_at": "2024-01-01T00:00:00+00:00"},
    ])
    paths.update(embeddings=embeddings, hypernyms=hypernyms, kb_cache=kb_cache)

    ini = tmp_path / "qexrank.ini"
    ini.write_text(
        "[paths]\n"
        + "".join(f"{key} = {value.relative_to(tmp_path)}\n" for key, value in paths.items())
        + "index = index.jsonl\n"
        + "output_dir = runs\n",
        encoding="utf-8",
    )
    paths["config"] = ini
    paths["root"] = tmp_path
    return paths


@pytest.fixture
def context():
    """Command context with an empty environment."""
    return CommandContext(environ={})


def run_command(command_class, args, context):
    command = command_class(args, context)
    try:
        if not command._help_shown:
            command.handle()
    finally:
        command.close()
    return command
