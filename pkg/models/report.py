"""
Report records emitted by the CLI. All serialize to sorted-key JSON with no
timestamps, so identical runs produce identical bytes.
"""
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

import numpy as np
import orjson

from consts import VERSION

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY


def _plain(value):
    """numpy scalars and arrays to plain Python for orjson"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class EstimateReport:
    """Point estimates, standard errors and bands for one estimate/bands/panel run"""
    command: str
    results: Dict[str, Any]
    config: Dict[str, Any]
    seed: int
    version: str = VERSION
    warnings: List[str] = field(default_factory=list)
    caveats: List[str] = field(default_factory=list)

    def to_json(self):
        return orjson.dumps(_plain(asdict(self)), option=JSON_OPTIONS)

    @classmethod
    def from_json(cls, data):
        return cls(**orjson.loads(data))


@dataclass
class MonteCarloReport:
    """Per-replication estimates and per-sample-size error summaries"""
    records: List[Dict[str, Any]]
    summary: List[Dict[str, Any]]
    config: Dict[str, Any]
    seed: int
    version: str = VERSION

    def summary_for(self, n):
        for row in self.summary:
            if row["n"] == n:
                return row
        raise KeyError(n)

    def to_json(self):
        return orjson.dumps(_plain(asdict(self)), option=JSON_OPTIONS)

    @classmethod
    def from_json(cls, data):
        return cls(**orjson.loads(data))


@dataclass
class OracleSuiteReport:
    """Pass/fail outcome of each identification check over seeded model batteries"""
    checks: List[Dict[str, Any]]
    config: Dict[str, Any]
    seed: int
    version: str = VERSION

    @property
    def passed(self) -> bool:
        return all(check["passed"] for check in self.checks)

    def to_json(self):
        record = _plain(asdict(self))
        record["passed"] = self.passed
        return orjson.dumps(record, option=JSON_OPTIONS)

    @classmethod
    def from_json(cls, data):
        record = orjson.loads(data)
        record.pop("passed", None)
        return cls(**record)
