"""File formats and run configuration.

Trace files::

    # temperature_k = 0.074
    # gain_db = 0
    time_s,power_dbm
    0.0,-126.0
    ...

Point files (loss vs temperature)::

    temperature_k,field_v_per_m,loss,sigma[,status]

Config files are flat ``key = value`` lines with ``#`` comments and unit-bearing
key names; see :data:`CONFIG_DEFAULTS`.
"""
import configparser
import csv
from dataclasses import dataclass
import io
import json
import math
from pathlib import Path
import sys

import numpy as np

from .budget import DISABLED, LossPoint, Participation, QBudget
from .errors import DomainError, InputFormatError
from .ringdown import CouplingCalibration, RingdownTrace
from .vrh import E_SWITCH, PAPER_FIT, VrhParams

TRACE_HEADER = ("time_s", "power_dbm")
POINT_COLUMNS = ("temperature_k", "field_v_per_m", "loss", "sigma")
Q0_COLUMNS = ("temperature_k", "q0")

_SECTION = "run"

# key -> (default, type); "disabled" means an infinite (switched-off) Q.
CONFIG_DEFAULTS = {
    "frequency_hz": (2.6e9, float),
    "kappa_v_per_m_sqrtw": (822.0, float),
    "q0": (DISABLED, "q"),
    "q0_file": (None, "path"),
    "q1": (5.8e9, "q"),
    "q2": (6.5e11, float),
    "rel_err_q0": (0.10, float),
    "rel_err_q1": (0.10, float),
    "rel_err_q2": (0.10, float),
    "p_si": (9e-4, float),
    "p_sio2": (3e-9, float),
    "rel_err_p_si": (0.25, float),
    "q_sio2_inv": (5e-3, float),
    "oxide_ratio": (100.0, float),
    "eps_r": (11.5, float),
    "window_width": (200, int),
    "window_stride": (None, int),
    "target_field_v_per_m": (5.0, float),
    "floor_margin_db": (3.0, float),
    "loc_length_um": (PAPER_FIT.reporting_units()["loc_length_um"], float),
    "gamma_thz": (PAPER_FIT.reporting_units()["gamma_thz"], float),
    "g_ev_cm3": (PAPER_FIT.reporting_units()["g_ev_cm3"], float),
    "sigma0_us_per_m": (PAPER_FIT.reporting_units()["sigma0_us_per_m"], float),
    "tls_loss": (0.0, float),
    "e_switch_v_per_m": (E_SWITCH, float),
    "clamp": (False, bool),
    "e_fit_v_per_m": (5.0, float),
    "fit_restarts": (8, int),
    "fit_seed": (0, int),
    "fit_max_iterations": (2000, int),
    "fit_tolerance": (1e-10, float),
    "fit_weighted": (True, bool),
    "curve_points": (200, int),
    "seed": (None, int),
    "synth_q_loaded": (3e8, float),
    "synth_p0_dbm": (-126.0, float),
    "synth_duration_s": (0.1, float),
    "synth_sample_rate_hz": (20000.0, float),
    "synth_noise_db": (0.0, float),
    "synth_gain_db": (0.0, float),
    "synth_temperature_k": (None, float),
    "synth_law": ("linear", str),
    "synth_law_a": (2e-6, float),
    "synth_law_b_per_v_per_m": (7e-7, float),
    "synth_noise_rel": (0.05, float),
    "synth_sigma_floor": (1e-12, float),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, raw, kind, base, path):
    raw = raw.strip()
    try:
        if kind == "q":
            return DISABLED if raw.lower() in ("disabled", "inf", "none") else float(raw)
        if kind == "path":
            p = Path(raw)
            if not p.is_absolute():
                p = base / p
            if not p.exists():
                raise InputFormatError(f"{key}: file {str(p)!r} does not exist", path)
            return p
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        return kind(raw)
    except ValueError:
        raise InputFormatError(f"{key}: cannot parse {raw!r}", path) from None


@dataclass(frozen=True)
class RunConfig:
    values: dict
    source: object = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def frequency(self):
        return self.values["frequency_hz"]

    @property
    def omega(self):
        return 2.0 * math.pi * self.frequency

    def calibration(self):
        return CouplingCalibration(kappa=self["kappa_v_per_m_sqrtw"], q2=self["q2"])

    def budget(self):
        q0 = self["q0"]
        if self["q0_file"] is not None:
            q0 = read_q0_table(self["q0_file"])
        return QBudget(q0=q0, q1=self["q1"], q2=self["q2"], rel_err_q0=self["rel_err_q0"],
                       rel_err_q1=self["rel_err_q1"], rel_err_q2=self["rel_err_q2"])

    def participation(self):
        return Participation(p_si=self["p_si"], p_sio2=self["p_sio2"],
                             rel_err_p_si=self["rel_err_p_si"], q_sio2_inv=self["q_sio2_inv"])

    def vrh_params(self):
        return VrhParams.from_reporting_units(
            self["loc_length_um"], self["gamma_thz"], self["g_ev_cm3"],
            self["sigma0_us_per_m"], tls_loss=self["tls_loss"])

    def validate(self):
        """Build every physical object once so bad values fail at load time."""
        self.calibration()
        self.budget()
        self.participation()
        self.vrh_params()
        if not self.frequency > 0:
            raise DomainError("frequency_hz must be positive")
        if not self["eps_r"] >= 1:
            raise DomainError("eps_r must be >= 1")
        if self["window_width"] < 3:
            raise DomainError("window_width must be at least 3")
        return self


def default_config():
    return RunConfig({k: v for k, (v, _) in CONFIG_DEFAULTS.items()})


def load_config(path=None, overrides=None):
    """Read a flat key/value config; unknown keys are an error."""
    values = {k: v for k, (v, _) in CONFIG_DEFAULTS.items()}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise InputFormatError(f"cannot read config: {exc.strerror}", path) from None
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                           comment_prefixes=("#",), delimiters=("=",))
        parser.optionxform = str
        try:
            parser.read_string(f"[{_SECTION}]\n" + text, source=str(path))
        except configparser.Error as exc:
            raise InputFormatError(f"malformed config: {exc}", path) from None
        for key, raw in parser.items(_SECTION):
            if key not in CONFIG_DEFAULTS:
                raise InputFormatError(f"unknown config key {key!r}", path)
            values[key] = _convert(key, raw, CONFIG_DEFAULTS[key][1], path.parent, path)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig(values, path).validate()


def _data_lines(path):
    """Yield (line_number, text) for non-blank lines; collect '# k = v' header comments."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read file: {exc.strerror}", path) from None
    meta = {}
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:]
            if "=" in body:
                key, _, value = body.partition("=")
                key = key.strip()
                value = value.strip()
                try:
                    meta[key] = float(value)
                except ValueError:
                    meta[key] = value
            continue
        rows.append((number, stripped))
    return meta, rows


def _parse_header(rows, required, path):
    if not rows:
        raise InputFormatError("file contains no header or data", path)
    number, header = rows[0]
    cols = [c.strip() for c in header.split(",")]
    missing = [c for c in required if c not in cols]
    if missing:
        raise InputFormatError(
            f"header must contain {', '.join(required)}; got {header!r}", path, number)
    return cols, rows[1:]


def _float(text, what, path, number):
    try:
        value = float(text)
    except ValueError:
        raise InputFormatError(f"{what}: not a number: {text!r}", path, number) from None
    if not math.isfinite(value):
        raise InputFormatError(f"{what}: non-finite value {text!r}", path, number)
    return value


def read_trace(path, frequency=None):
    """Read a two-column trace; ``frequency`` falls back to a ``frequency_hz`` header."""
    meta, rows = _data_lines(path)
    cols, data = _parse_header(rows, TRACE_HEADER, path)
    it, ip = cols.index("time_s"), cols.index("power_dbm")
    times, powers = [], []
    last_t = -math.inf
    for number, line in data:
        fields = line.split(",")
        if len(fields) != len(cols):
            raise InputFormatError(f"expected {len(cols)} columns, got {len(fields)}", path, number)
        t = _float(fields[it], "time_s", path, number)
        if not t > last_t:
            raise InputFormatError("time_s must be strictly increasing", path, number)
        last_t = t
        times.append(t)
        powers.append(_float(fields[ip], "power_dbm", path, number))
    if len(times) < 3:
        raise InputFormatError(f"trace has {len(times)} samples, need at least 3", path)
    if frequency is None:
        frequency = meta.get("frequency_hz")
    if not isinstance(frequency, float) or not frequency > 0:
        raise InputFormatError("no valid frequency (config frequency_hz or header)", path)
    return RingdownTrace(np.array(times), np.array(powers), frequency, meta)


def format_float(x):
    return repr(float(x))


def _meta_value(value):
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_trace(path, trace):
    buf = io.StringIO()
    for key in sorted(trace.meta):
        if trace.meta[key] is not None:
            buf.write(f"# {key} = {_meta_value(trace.meta[key])}\n")
    buf.write(",".join(TRACE_HEADER) + "\n")
    for t, p in zip(trace.times, trace.powers):
        buf.write(f"{format_float(t)},{format_float(p)}\n")
    write_text(path, buf.getvalue())


def read_points(path):
    """LossPoints from a point file; rows whose status is not ``ok`` are skipped."""
    _, rows = _data_lines(path)
    cols, data = _parse_header(rows, POINT_COLUMNS, path)
    idx = [cols.index(c) for c in POINT_COLUMNS]
    i_status = cols.index("status") if "status" in cols else None
    points = []
    for number, line in data:
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(cols):
            raise InputFormatError(f"expected {len(cols)} columns, got {len(fields)}", path, number)
        if i_status is not None and fields[i_status] != "ok":
            continue
        t, e, loss, sigma = (_float(fields[i], c, path, number) for i, c in zip(idx, POINT_COLUMNS))
        try:
            points.append(LossPoint(t, e, loss, sigma))
        except DomainError as exc:
            raise InputFormatError(str(exc), path, number) from None
    return points


def read_q0_table(path):
    _, rows = _data_lines(path)
    cols, data = _parse_header(rows, Q0_COLUMNS, path)
    it, iq = cols.index("temperature_k"), cols.index("q0")
    table = []
    for number, line in data:
        fields = line.split(",")
        if len(fields) != len(cols):
            raise InputFormatError(f"expected {len(cols)} columns, got {len(fields)}", path, number)
        table.append((_float(fields[it], "temperature_k", path, number),
                      _float(fields[iq], "q0", path, number)))
    if not table:
        raise InputFormatError("q0 table has no rows", path)
    return tuple(table)


def table_text(columns, rows):
    """Comma-delimited table; floats are written with repr for exact round trips."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v
                         for v in row])
    return buf.getvalue()


def write_points(path, points, status=None):
    cols = list(POINT_COLUMNS)
    rows = [[p.temperature, p.field, p.loss, p.sigma] for p in points]
    if status is not None:
        cols.append("status")
        for row, s in zip(rows, status):
            row.append(s)
    write_text(path, table_text(cols, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def report_text(report):
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_text(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
