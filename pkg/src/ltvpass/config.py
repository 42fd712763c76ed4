"""INI-style configuration files for systems, storage matrices and pH representations.

Example::

    [system]
    A = [["-1"]]
    B = [[1]]
    C = [[1]]
    D = [[0]]
    domain = (-10, 10)

    [storage]
    Q = [["1"]]

    [grid]
    interval = 0:1
    nodes = 101

    [tolerances]
    kyp_tol = 1e-9
    rtol = 1e-8

Matrices are bracketed row lists; entries are expressions in ``t``, quoted or bare.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as ex
from . import matfun as mf
from .errors import DimensionMismatch, InputError, LtvError
from .ltv import LtvSystem


class ConfigError(InputError):
    """Malformed configuration; names the file, line and offending cell."""

    def __init__(self, message, path=None, line=None, cell=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if cell is not None:
            where.append(f"cell {cell}")
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")
        self.path, self.line, self.cell = path, line, cell


# -- matrix literals -------------------------------------------------------------------

def split_matrix(text: str) -> list[list[str]]:
    """Split ``[[a, b], [c, d]]`` into entry strings.

    Entries may be quoted (``"..."`` or ``'...'``) or bare; bare entries end at
    a comma or closing bracket outside parentheses and braces.
    """
    s = text.strip()
    pos = 0

    def skip():
        nonlocal pos
        while pos < len(s) and s[pos].isspace():
            pos += 1

    def expect(ch):
        nonlocal pos
        skip()
        if pos >= len(s) or s[pos] != ch:
            raise ValueError(f"expected {ch!r} at offset {pos}")
        pos += 1

    def entry():
        nonlocal pos
        skip()
        if pos < len(s) and s[pos] in "\"'":
            q = s[pos]
            end = s.find(q, pos + 1)
            if end < 0:
                raise ValueError(f"unterminated quote at offset {pos}")
            val = s[pos + 1:end]
            pos = end + 1
            return val
        depth, start = 0, pos
        while pos < len(s):
            c = s[pos]
            if c in "({":
                depth += 1
            elif c in ")}":
                depth -= 1
            elif depth == 0 and c in ",]":
                break
            pos += 1
        val = s[start:pos].strip()
        if not val:
            raise ValueError(f"empty entry at offset {start}")
        return val

    rows = []
    expect("[")
    while True:
        expect("[")
        row = [entry()]
        skip()
        while pos < len(s) and s[pos] == ",":
            pos += 1
            row.append(entry())
            skip()
        expect("]")
        rows.append(row)
        skip()
        if pos < len(s) and s[pos] == ",":
            pos += 1
            continue
        break
    expect("]")
    skip()
    if pos != len(s):
        raise ValueError(f"trailing text at offset {pos}")
    if any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("rows have different lengths")
    return rows


def format_matrix(entries: list[list[str]]) -> str:
    return "[" + ", ".join("[" + ", ".join(f'"{e}"' for e in row) + "]"
                           for row in entries) + "]"


def parse_domain(text: str) -> tuple[float, float]:
    t = text.strip().strip("()[]")
    parts = [p.strip() for p in re.split(r"[,:]", t)]
    if len(parts) != 2:
        raise ValueError(f"domain must be '(lo, hi)', got {text!r}")
    lo, hi = (float(p.replace("−", "-")) for p in parts)
    if not lo < hi:
        raise ValueError(f"empty domain {text!r}")
    return lo, hi


def parse_interval(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"interval must be 'a:b', got {text!r}")
    a, b = float(parts[0]), float(parts[1])
    if not a < b:
        raise ValueError(f"empty interval {text!r}")
    return a, b


def parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be 'start:stop:count', got {text!r}")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 2 or not a < b:
        raise ValueError(f"grid needs start < stop and count >= 2, got {text!r}")
    return np.linspace(a, b, n)


def parse_vector(text: str) -> np.ndarray:
    vals = [complex(ex.parse(p)(0.0)) for p in re.split(r"[,;]", text.strip().strip("[]")) if p.strip()]
    return np.array(vals, dtype=complex)


# -- file loading --------------------------------------------------------------------

def _line_of(path, raw: str, section: str, key: str) -> int | None:
    cur = None
    for k, line in enumerate(raw.splitlines(), 1):
        st = line.strip()
        if st.startswith("[") and st.endswith("]") and "=" not in st:
            cur = st[1:-1].strip()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", st, re.I):
            return k
    return None


@dataclass
class ConfigFile:
    path: Path
    parser: configparser.ConfigParser
    raw: str

    @classmethod
    def read(cls, path) -> "ConfigFile":
        path = Path(path)
        try:
            raw = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read file: {exc.strerror}", path) from None
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(raw, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], path) from None
        return cls(path, cp, raw)

    def has(self, section: str, key: str | None = None) -> bool:
        if not self.parser.has_section(section):
            return False
        return key is None or self.parser.has_option(section, key)

    def get(self, section: str, key: str, default=None) -> str | None:
        if not self.has(section, key):
            return default
        return self.parser.get(section, key)

    def matrix(self, section: str, key: str, domain) -> mf.ExprMatrix:
        text = self.get(section, key)
        line = _line_of(self.path, self.raw, section, key)
        if text is None:
            raise ConfigError(f"missing [{section}] {key}", self.path)
        try:
            cells = split_matrix(text)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", self.path, line) from None
        rows = []
        for i, row in enumerate(cells):
            out = []
            for j, cell in enumerate(row):
                try:
                    out.append(ex.parse(cell))
                except LtvError as exc:
                    raise ConfigError(f"[{section}] {key}: cannot parse {cell!r}: {exc}",
                                      self.path, line, f"{key}[{i}][{j}]") from None
            rows.append(out)
        return mf.ExprMatrix(rows, domain)

    def domain(self, section: str) -> tuple[float, float]:
        text = self.get(section, "domain")
        if text is None:
            return (-math.inf, math.inf)
        try:
            return parse_domain(text)
        except ValueError as exc:
            raise ConfigError(str(exc), self.path, _line_of(self.path, self.raw, section,
                                                            "domain")) from None


def load_system(path) -> LtvSystem:
    cfg = ConfigFile.read(path)
    return system_from_config(cfg)


def system_from_config(cfg: ConfigFile) -> LtvSystem:
    if not cfg.has("system"):
        raise ConfigError("missing [system] section", cfg.path)
    dom = cfg.domain("system")
    mats = [cfg.matrix("system", k, dom) for k in "ABCD"]
    try:
        return LtvSystem(*mats, domain=dom)
    except DimensionMismatch as exc:
        raise ConfigError(str(exc), cfg.path) from None


def storage_from_config(cfg: ConfigFile, domain) -> mf.ExprMatrix | None:
    if not cfg.has("storage", "Q"):
        return None
    return cfg.matrix("storage", "Q", domain)


@dataclass
class Settings:
    grid: np.ndarray | None = None
    kyp_tol: float = 1e-9
    psd_tol: float = 1e-9
    rtol: float = 1e-8
    extra: dict = field(default_factory=dict)


def settings_from_config(cfg: ConfigFile | None) -> Settings:
    s = Settings()
    if cfg is None:
        return s
    try:
        if cfg.has("grid", "interval"):
            a, b = parse_interval(cfg.get("grid", "interval"))
            n = int(cfg.get("grid", "nodes", "101"))
            if n < 2:
                raise ValueError("grid nodes must be >= 2")
            s.grid = np.linspace(a, b, n)
        for k in ("kyp_tol", "psd_tol", "rtol"):
            if cfg.has("tolerances", k):
                v = float(cfg.get("tolerances", k))
                if not v > 0:
                    raise ValueError(f"{k} must be positive")
                setattr(s, k, v)
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.path) from None
    return s


# -- writing -------------------------------------------------------------------------

def entries_or_samples(F: mf.MatrixFunction, grid) -> list[list[str]]:
    """Exact expression strings when available, else a piecewise-linear
    interpolant through the samples on ``grid``."""
    s = F.to_strings()
    if s is not None:
        return s
    grid = np.asarray(grid, dtype=float)
    vals = F.sample(grid)
    out = []
    for i in range(F.rows):
        row = []
        for j in range(F.cols):
            row.append(str(_pwl(grid, vals[:, i, j])))
        out.append(row)
    return out


def _pwl(grid, v) -> ex.TimeExpr:
    branches = []
    for k in range(grid.size - 1):
        a, b = grid[k], grid[k + 1]
        slope = (v[k + 1] - v[k]) / (b - a)
        e = ex.const(v[k]) + ex.const(slope) * (ex.T - ex.const(a))
        branches.append(((float(a), float(b)), e))
    return ex.piecewise(branches, ex.const(v[-1]))


def _fmt_domain(dom) -> str:
    return f"({ex._fmt_real(dom[0])}, {ex._fmt_real(dom[1])})"


def write_system(path, sys: LtvSystem, grid) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["system"] = {k: format_matrix(entries_or_samples(M, grid))
                    for k, M in zip("ABCD", sys.coefficients())}
    cp["system"]["domain"] = _fmt_domain(sys.domain)
    with open(path, "w") as fh:
        cp.write(fh)


def write_ph(path, ph, grid, extra: dict | None = None) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["ph"] = {k: format_matrix(entries_or_samples(M, grid))
                for k, M in ph.coefficients().items()}
    cp["ph"]["domain"] = _fmt_domain(ph.domain)
    if extra:
        cp["info"] = {k: str(v) for k, v in extra.items()}
    with open(path, "w") as fh:
        cp.write(fh)


def load_ph(path):
    from .ph import PhRepresentation

    cfg = ConfigFile.read(path)
    if not cfg.has("ph"):
        raise ConfigError("missing [ph] section", cfg.path)
    dom = cfg.domain("ph")
    return PhRepresentation(**{k: cfg.matrix("ph", k, dom) for k in "QKJRGPSN"}, domain=dom)
