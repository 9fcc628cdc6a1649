"""Touchstone v1 (.s1p-.s4p) reader/writer and a flat CSV export."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import ScatteringData

UNIT_SCALE = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
UNIT_NAMES = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}
FORMATS = ("MA", "DB", "RI")
DB_FLOOR = -999.0  # written for exact zeros in DB format

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_TOKEN = re.compile(r"\S+")


class TouchstoneError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class TouchstoneOptions:
    unit: str = "GHz"
    fmt: str = "MA"
    r_ref: float = 50.0

    def __post_init__(self):
        u = str(self.unit).upper()
        if u not in UNIT_SCALE:
            raise ValueError(f"unknown frequency unit {self.unit!r}")
        f = str(self.fmt).upper()
        if f not in FORMATS:
            raise ValueError(f"unknown data format {self.fmt!r}")
        if not (np.isfinite(self.r_ref) and self.r_ref > 0):
            raise ValueError("reference resistance must be positive")
        object.__setattr__(self, "unit", UNIT_NAMES[u])
        object.__setattr__(self, "fmt", f)
        object.__setattr__(self, "r_ref", float(self.r_ref))

    @property
    def scale(self) -> float:
        return UNIT_SCALE[self.unit.upper()]


def _num(x: float) -> str:
    # 12 significant digits: angles printed in degrees need the extra three
    # to keep the complex value within 1e-9 after a round trip
    return f"{float(x) + 0.0:.12g}"


def _pair(z: complex, fmt: str) -> tuple[float, float]:
    if fmt == "RI":
        return z.real, z.imag
    mag = abs(z)
    ang = float(np.degrees(np.angle(z)))
    if fmt == "MA":
        return mag, ang
    return (20 * np.log10(mag) if mag > 0 else DB_FLOOR), ang


def _complex(a: float, b: float, fmt: str) -> complex:
    if fmt == "RI":
        return complex(a, b)
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    rad = np.radians(b)
    return complex(mag * np.cos(rad), mag * np.sin(rad))


def _entry_rows(m: np.ndarray) -> list[list[complex]]:
    n = m.shape[0]
    if n == 1:
        return [[m[0, 0]]]
    if n == 2:
        # v1 quirk: S21 precedes S12
        return [[m[0, 0], m[1, 0], m[0, 1], m[1, 1]]]
    return [list(m[i, :]) for i in range(n)]


def write_touchstone(data: ScatteringData, opts: TouchstoneOptions | None = None,
                     comments: tuple[str, ...] = ()) -> str:
    opts = opts or TouchstoneOptions()
    n = data.nports
    if not 1 <= n <= 4:
        raise ValueError(f"{n}-port data is not supported (Touchstone v1 writer handles 1..4)")
    lines = [f"! {c}" for c in comments]
    lines.append(f"# {opts.unit} S {opts.fmt} R {_num(opts.r_ref)}")
    for f, m in zip(data.frequencies, data.s):
        for k, row in enumerate(_entry_rows(m)):
            fields = [_num(f / opts.scale)] if k == 0 else []
            for z in row:
                fields.extend(_num(v) for v in _pair(complex(z), opts.fmt))
            lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def _parse_options(body: str, lineno: int, offset: int) -> TouchstoneOptions:
    unit, fmt, r_ref = "GHz", "MA", 50.0
    toks = list(_TOKEN.finditer(body))
    k = 0
    while k < len(toks):
        t = toks[k]
        word = t.group().upper()
        col = offset + t.start() + 1
        if word in UNIT_SCALE:
            unit = word
        elif word in FORMATS:
            fmt = word
        elif word == "S":
            pass
        elif word in ("Y", "Z", "H", "G"):
            raise TouchstoneError(f"only S-parameter files are supported, got {t.group()!r}",
                                  lineno, col)
        elif word == "R":
            if k + 1 >= len(toks):
                raise TouchstoneError("R needs a reference resistance", lineno, col)
            k += 1
            v = toks[k]
            if not _NUMBER.fullmatch(v.group()):
                raise TouchstoneError(f"bad reference resistance {v.group()!r}", lineno,
                                      offset + v.start() + 1)
            r_ref = float(v.group())
            if not (np.isfinite(r_ref) and r_ref > 0):
                raise TouchstoneError("reference resistance must be positive", lineno,
                                      offset + v.start() + 1)
        else:
            raise TouchstoneError(f"unknown option {t.group()!r}", lineno, col)
        k += 1
    return TouchstoneOptions(unit, fmt, r_ref)


def _infer_nports(rows: list[tuple[int, list]]) -> int:
    first = len(rows[0][1])
    nxt = len(rows[1][1]) if len(rows) > 1 else None
    if first == 3:
        return 1
    if first == 7:
        return 3
    if first == 9:
        return 4 if nxt == 8 else 2
    raise TouchstoneError(
        f"cannot infer the port count from {first} values on the first data line",
        rows[0][0], 1,
    )


def parse_touchstone(text: str, nports: int | None = None) -> tuple[ScatteringData, TouchstoneOptions]:
    """Parse Touchstone v1 text.  The port count comes from ``nports`` when
    given (as a file extension would); otherwise it is inferred from the
    layout of the first frequency block."""
    if not isinstance(text, str):
        raise TouchstoneError("expected text")
    if nports is not None and not 1 <= nports <= 4:
        raise TouchstoneError(f"unsupported port count {nports}")
    opts = None
    rows: list[tuple[int, list[tuple[float, int]]]] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("!", 1)[0].rstrip("\r")
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if rows:
                raise TouchstoneError("option line after data", lineno, line.index("#") + 1)
            if opts is None:
                start = line.index("#") + 1
                opts = _parse_options(line[start:], lineno, start)
            continue
        vals = []
        for t in _TOKEN.finditer(line):
            if not _NUMBER.fullmatch(t.group()):
                raise TouchstoneError(f"malformed number {t.group()!r}", lineno, t.start() + 1)
            v = float(t.group())
            if not np.isfinite(v):
                raise TouchstoneError(f"number out of range {t.group()!r}", lineno, t.start() + 1)
            vals.append((v, lineno, t.start() + 1))
        rows.append((lineno, vals))
    opts = opts or TouchstoneOptions()
    if not rows:
        raise TouchstoneError("no data lines")
    n = nports or _infer_nports(rows)
    flat = [v for _, vals in rows for v in vals]
    block = 1 + 2 * n * n
    if len(flat) % block:
        last = flat[-1]
        raise TouchstoneError(
            f"{len(flat)} values do not form whole {n}-port blocks of {block}", last[1], last[2]
        )
    nf = len(flat) // block
    freqs = np.empty(nf)
    s = np.empty((nf, n, n), dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(nf):
            chunk = flat[k * block:(k + 1) * block]
            freqs[k] = chunk[0][0] * opts.scale
            if k and not freqs[k] > freqs[k - 1]:
                raise TouchstoneError("frequencies must be strictly increasing",
                                      chunk[0][1], chunk[0][2])
            zs = [_complex(chunk[1 + 2 * q][0], chunk[2 + 2 * q][0], opts.fmt)
                  for q in range(n * n)]
            if not all(np.isfinite(z) for z in zs):
                raise TouchstoneError("entry overflows", chunk[1][1], chunk[1][2])
            if n == 2:
                s[k] = [[zs[0], zs[2]], [zs[1], zs[3]]]
            else:
                s[k] = np.reshape(zs, (n, n))
    if not np.all(np.isfinite(freqs)):
        raise TouchstoneError("frequency overflows")
    try:
        data = ScatteringData(freqs, s, opts.r_ref)
    except ValueError as exc:
        raise TouchstoneError(str(exc)) from exc
    return data, opts


_EXT = re.compile(r"\.s([1-4])p$", re.IGNORECASE)


def read_touchstone(path) -> tuple[ScatteringData, TouchstoneOptions]:
    path = Path(path)
    m = _EXT.search(path.name)
    return parse_touchstone(path.read_text(encoding="ascii"), int(m.group(1)) if m else None)


def touchstone_name(stem: str, nports: int) -> str:
    return f"{stem}.s{nports}p"


def _fixed(x: float) -> str:
    return f"{x + 0.0:.9f}"


def export_csv(data: ScatteringData) -> str:
    n = data.nports
    head = ["freq_hz"]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            head += [f"s{i}{j}_db", f"s{i}{j}_deg"]
    lines = [",".join(head)]
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(np.abs(data.s))
    deg = np.degrees(np.angle(data.s))
    for k, f in enumerate(data.frequencies):
        row = [np.format_float_positional(f, precision=9, unique=False, fractional=False,
                                          trim="-")]
        for i in range(n):
            for j in range(n):
                row += [_fixed(db[k, i, j]), _fixed(deg[k, i, j])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
