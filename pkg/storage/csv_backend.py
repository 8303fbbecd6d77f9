import logging
import re
from pathlib import Path
from threading import Lock

import numpy as np
import orjson
import pandas as pd
import tomlkit
from tomlkit.exceptions import ParseError

from consts import PLOT_COLUMNS, REPORT_FLOAT_FORMAT
from errors import ConfigError, DataError
from models.dataset import Dataset, PanelDataset
from models.report import EstimateReport, MonteCarloReport, OracleSuiteReport

logger = logging.getLogger("proxycasf.storage")

ROLE_PATTERN = re.compile(r"^(y|id|period|(x|z|v):([1-9][0-9]*))$")
REPORT_TYPES = {
    "estimate": EstimateReport,
    "panel-estimate": EstimateReport,
    "bands": EstimateReport,
    "simulate": MonteCarloReport,
    "oracle-suite": OracleSuiteReport,
}


def _check_roles(role_map, columns):
    """Validate column -> role assignments; returns {block: [columns ordered by component]}"""
    blocks = {"y": [], "id": [], "period": [], "x": {}, "z": {}, "v": {}}
    for column, role in role_map.items():
        if column not in columns:
            raise ConfigError(f"role given for column {column!r} which is not in the file header")
        match = ROLE_PATTERN.match(str(role))
        if match is None:
            raise ConfigError(f"unknown role {role!r} for column {column!r}; expected y, x:j, z:j, v:j, id or period")
        if match.group(2):
            block, component = match.group(2), int(match.group(3))
            if component in blocks[block]:
                raise ConfigError(f"role {role!r} assigned twice")
            blocks[block][component] = column
        else:
            blocks[role].append(column)

    for single in ("y", "id", "period"):
        if len(blocks[single]) > 1:
            raise ConfigError(f"role {single!r} assigned to several columns: {blocks[single]}")
    ordered = {}
    for block in ("x", "z", "v"):
        components = sorted(blocks[block])
        if components != list(range(1, len(components) + 1)):
            raise ConfigError(f"{block} components must be numbered 1..d without gaps, got {components}")
        ordered[block] = [blocks[block][j] for j in components]
    for single in ("y", "id", "period"):
        ordered[single] = blocks[single]
    return ordered


def _numeric(frame, columns):
    """Coerce role columns to float, reporting missing cells and parse failures by file line"""
    raw = frame[columns]
    missing = raw.isna()
    if missing.any().any():
        lines = (np.nonzero(missing.any(axis=1).to_numpy())[0] + 2).tolist()
        raise DataError(f"missing values on line(s) {lines[:20]}")
    values = raw.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = values.isna()
    if bad.any().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise DataError(
            f"non-numeric value {raw.iat[row, col]!r} in column {columns[col]!r} on line {row + 2}"
        )
    return values.to_numpy(dtype=float)


def _panel(frame, roles):
    if roles["z"] or roles["v"]:
        raise ConfigError("panel files take y, x:j, id and period roles; proxies are built from the history")
    if not roles["y"] or not roles["x"]:
        raise ConfigError("panel files need a y column and at least one x:j column")
    id_col, period_col = roles["id"][0], roles["period"][0]
    if frame[id_col].isna().any():
        raise DataError(f"missing unit id on line(s) {(np.nonzero(frame[id_col].isna().to_numpy())[0] + 2).tolist()[:20]}")

    periods = _numeric(frame, [period_col])[:, 0]
    y = _numeric(frame, roles["y"])[:, 0]
    x = _numeric(frame, roles["x"])
    ids = frame[id_col].to_numpy()

    units = list(dict.fromkeys(ids))
    period_values = np.unique(periods)
    unit_pos = {u: i for i, u in enumerate(units)}
    period_pos = {p: j for j, p in enumerate(period_values)}

    y_wide = np.full((len(units), len(period_values)), np.nan)
    x_wide = np.full((len(units), len(period_values), x.shape[1]), np.nan)
    for row, (unit, period) in enumerate(zip(ids, periods)):
        i, j = unit_pos[unit], period_pos[period]
        if not np.isnan(y_wide[i, j]):
            raise DataError(f"unit {unit!r} has period {period:g} twice (line {row + 2})")
        y_wide[i, j] = y[row]
        x_wide[i, j] = x[row]

    incomplete = [u for u, i in unit_pos.items() if np.isnan(y_wide[i]).any()]
    if incomplete:
        raise DataError(
            f"unbalanced panel: unit(s) {incomplete[:20]} do not cover all {len(period_values)} periods"
        )
    logger.info(f"Loaded panel: {len(units)} units x {len(period_values)} periods")
    return PanelDataset(y=y_wide, x=x_wide, period=len(period_values), unit_ids=np.asarray(units))


def load_csv(path, role_map):
    """
    Read a CSV with a header row. role_map assigns columns a role from
    {y, x:j, z:j, v:j, id, period}; with id and period the file is read as a
    long-form balanced panel (target period defaults to the last one).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file {path} does not exist")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {path}: {e}") from e

    roles = _check_roles(role_map, list(frame.columns))
    if roles["id"] and roles["period"]:
        return _panel(frame, roles)
    if roles["period"]:
        raise ConfigError("a period column needs an id column too")
    if not (roles["y"] and roles["x"] and roles["z"] and roles["v"]):
        raise ConfigError("cross-sectional files need y and at least one x:j, z:j and v:j column")

    dataset = Dataset(
        y=_numeric(frame, roles["y"])[:, 0],
        x=_numeric(frame, roles["x"]),
        z=_numeric(frame, roles["z"]),
        v=_numeric(frame, roles["v"]),
        unit_ids=frame[roles["id"][0]].to_numpy() if roles["id"] else None,
    )
    logger.info(f"Loaded {dataset.n} rows from {path}: dx={dataset.dx} dz={dataset.dz} dv={dataset.dv}")
    return dataset


def load_config(path):
    """TOML run configuration as plain dicts and lists"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        return tomlkit.parse(path.read_text()).unwrap()
    except ParseError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e


class OutputBackend:
    """Writes reports, plot data and error records under one output directory"""

    def __init__(self, output_dir):
        """Initialize the output backend

        Args:
            output_dir: Directory for reports, plot data and error records; created if missing
        """
        self.output_dir = Path(output_dir)
        self.lock = Lock()
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _write(self, name, data):
        path = self.output_dir / name
        with self.lock:
            path.write_bytes(data)
        logger.info(f"Wrote {path}")
        return path

    def StoreReport(self, command, report):
        """Write a report as <command>.json

        Args:
            command: CLI command name, used as the file stem
            report: Any report with a to_json() method

        Returns:
            Path of the written file
        """
        return self._write(f"{command}.json", report.to_json())

    def StorePlotData(self, name, x, estimate, lo, hi):
        """Write a curve and its band as CSV with the columns x, estimate, lo, hi

        Args:
            name: File name under the output directory
            x: Grid points
            estimate: Point estimates on the grid
            lo: Lower band
            hi: Upper band

        Returns:
            Path of the written file
        """
        frame = pd.DataFrame(dict(zip(PLOT_COLUMNS, (x, estimate, lo, hi))))
        path = self.output_dir / name
        with self.lock:
            frame.to_csv(path, index=False, float_format=REPORT_FLOAT_FORMAT)
        logger.info(f"Wrote {path}")
        return path

    def StoreError(self, record):
        """Write an error record as error.json

        Args:
            record: Dict from ProxyCasfError.to_record()

        Returns:
            Path of the written file
        """
        return self._write("error.json", orjson.dumps(record, option=orjson.OPT_SORT_KEYS))

    def LoadReport(self, command):
        path = self.output_dir / f"{command}.json"
        return REPORT_TYPES[command].from_json(path.read_bytes())

    def LoadPlotData(self, name):
        return pd.read_csv(self.output_dir / name, dtype=float, float_precision="round_trip")
