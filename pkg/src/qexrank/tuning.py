"""
BM25 (k1, b) grid search on a development split.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError, EvaluationError, QexrankError
from .evaluation import SystemSpec, evaluate_system
from .expanders import ExpansionResources
from .index import Bm25Params, InvertedIndex
from .ingestion import DatasetSplit
from .utils import PathManager

logger = logging.getLogger("qexrank")

DEFAULT_K1_GRID: Tuple[float, ...] = (0.4, 0.8, 1.2, 1.6, 2.0)
DEFAULT_B_GRID: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)

_GRID_PART = re.compile(r"^(k1|b)=(.+)$")


@dataclass(frozen=True)
class ParamGrid:
    k1_values: Tuple[float, ...] = DEFAULT_K1_GRID
    b_values: Tuple[float, ...] = DEFAULT_B_GRID

    def __post_init__(self):
        if not self.k1_values or not self.b_values:
            raise ConfigError("Parameter grid must have at least one k1 and one b value")
        object.__setattr__(self, "k1_values", tuple(sorted(set(self.k1_values))))
        object.__setattr__(self, "b_values", tuple(sorted(set(self.b_values))))
        try:
            self.points()
        except QexrankError as exc:
            raise ConfigError(str(exc)) from None

    def points(self) -> List[Bm25Params]:
        """Every (k1, b) pair, ordered by k1 then b."""
        return [Bm25Params(k1=k1, b=b) for k1 in self.k1_values for b in self.b_values]

    def __len__(self) -> int:
        return len(self.k1_values) * len(self.b_values)


def parse_grid(text: str) -> ParamGrid:
    """Parse ``"k1=0.4,0.8 b=0.5,0.75"``. An omitted key keeps its default values."""
    values: Dict[str, Tuple[float, ...]] = {}
    for part in text.split():
        match = _GRID_PART.match(part)
        if not match:
            raise ConfigError(f"Malformed grid component {part!r}; expected k1=... or b=...")
        key, raw = match.groups()
        if key in values:
            raise ConfigError(f"Grid key {key!r} given twice")
        try:
            values[key] = tuple(float(v) for v in raw.split(","))
        except ValueError:
            raise ConfigError(f"Grid values for {key!r} must be numbers, got {raw!r}") from None
    if not values:
        raise ConfigError("Empty grid specification")
    return ParamGrid(
        k1_values=values.get("k1", DEFAULT_K1_GRID),
        b_values=values.get("b", DEFAULT_B_GRID),
    )


@dataclass(frozen=True)
class TuningResult:
    best: Bm25Params
    best_map: float
    system: SystemSpec
    split: str
    table: Tuple[Tuple[Bm25Params, float], ...]

    def records(self) -> List[dict]:
        return [
            {
                "k1": params.k1,
                "b": params.b,
                "map": score,
                "best": params == self.best,
                "system": self.system.tag,
                "split": self.split,
            }
            for params, score in self.table
        ]


def tune_params(
    index: InvertedIndex,
    split: DatasetSplit,
    resources: ExpansionResources,
    grid: ParamGrid = ParamGrid(),
    system: Optional[SystemSpec] = None,
    workers: int = 1,
    on_point: Optional[Callable[[Bm25Params, float], None]] = None,
) -> TuningResult:
    """Pick the grid point with the highest MAP on ``split``.

    Ties go to the smaller k1, then the smaller b. ``system`` defaults to
    the keyword baseline of the split's scenario.
    """
    if not split.queries:
        raise EvaluationError(f"Cannot tune on the empty {split.name} split")
    system = system or SystemSpec.parse("KW", split.scenario)

    table: List[Tuple[Bm25Params, float]] = []
    for params in grid.points():
        report = evaluate_system(system, split, index, params, resources, workers)
        table.append((params, report.map_score))
        if on_point:
            on_point(params, report.map_score)

    best, best_map = min(table, key=lambda pair: (-pair[1], pair[0].k1, pair[0].b))
    logger.info("Tuned %s on %s: k1=%s b=%s (MAP %.4f)", system.tag, split.name,
                best.k1, best.b, best_map)
    return TuningResult(best=best, best_map=best_map, system=system, split=split.name,
                        table=tuple(table))


def write_tuning_report(result: TuningResult, path: Path) -> Path:
    lines = [json.dumps(rec, sort_keys=True) for rec in result.records()]
    return PathManager.atomic_write_lines(Path(path), lines)


def grid_rows(result: TuningResult) -> List[Sequence[str]]:
    """Rows for a console table: k1, b, MAP x100, winner marker."""
    return [
        [f"{p.k1:g}", f"{p.b:g}", f"{score * 100:.2f}", "*" if p == result.best else ""]
        for p, score in result.table
    ]
