"""Plan-view layouts of post-wall devices and their text serialization.

A layout is a bounding rectangle, a list of cylinders (metal vias, tuning
posts, dielectric pucks) and a list of modal ports.  Port segments are
reference planes: the solver truncates the domain there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .waveguide import SiwSpec, Substrate

TOL = 1e-12


@dataclass(frozen=True)
class Cylinder:
    x: float
    y: float
    r: float
    eps: float | None = None  # None marks a perfect conductor

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"cylinder radius must be positive, got {self.r}")
        if self.eps is not None and not self.eps >= 1:
            raise ValueError(f"dielectric cylinder needs eps >= 1, got {self.eps}")

    @property
    def is_pec(self) -> bool:
        return self.eps is None


@dataclass(frozen=True)
class ModalPort:
    id: int
    p0: tuple[float, float]
    p1: tuple[float, float]
    normal: tuple[float, float]
    modes: int = 1

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("a port needs at least one mode")
        if self.length <= 0:
            raise ValueError(f"port {self.id} has a zero-length segment")
        nx, ny = self.normal
        if abs(math.hypot(nx, ny) - 1) > 1e-9:
            raise ValueError(f"port {self.id} normal is not unit length")
        tx, ty = self.tangent
        if abs(tx * nx + ty * ny) > 1e-9:
            raise ValueError(f"port {self.id} normal is not perpendicular to its segment")

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def tangent(self) -> tuple[float, float]:
        n = self.length
        return ((self.p1[0] - self.p0[0]) / n, (self.p1[1] - self.p0[1]) / n)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.p0[0] + self.p1[0]), 0.5 * (self.p0[1] + self.p1[1]))

    @property
    def axis_aligned(self) -> bool:
        nx, ny = self.normal
        return (abs(nx) == 1.0 and ny == 0.0) or (abs(ny) == 1.0 and nx == 0.0)

    def distance_to(self, x: float, y: float) -> float:
        (ax, ay), (bx, by) = self.p0, self.p1
        dx, dy = bx - ax, by - ay
        t = ((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)
        t = min(1.0, max(0.0, t))
        return math.hypot(x - (ax + t * dx), y - (ay + t * dy))


@dataclass(frozen=True)
class DeviceLayout:
    outline: tuple[float, float, float, float]
    substrate: Substrate
    cylinders: tuple[Cylinder, ...]
    ports: tuple[ModalPort, ...]
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def port(self, pid: int) -> ModalPort:
        for p in self.ports:
            if p.id == pid:
                return p
        raise KeyError(f"no port {pid}")

    @property
    def nports(self) -> int:
        return len(self.ports)

    def centers(self) -> np.ndarray:
        return np.array([(c.x, c.y) for c in self.cylinders]).reshape(-1, 2)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


def validate_layout(layout: DeviceLayout) -> list[Violation]:
    out: list[Violation] = []
    x0, y0, x1, y1 = layout.outline
    if not (x1 > x0 and y1 > y0):
        out.append(Violation("outline", f"degenerate outline {layout.outline}"))
    cyl = layout.cylinders
    for i, c in enumerate(cyl):
        if not (c.x - c.r > x0 and c.x + c.r < x1 and c.y - c.r > y0 and c.y + c.r < y1):
            out.append(Violation("outside", f"cylinder {i} at ({c.x:.6g}, {c.y:.6g}) leaves the outline"))
    if len(cyl) > 1:
        xy = layout.centers()
        r = np.array([c.r for c in cyl])
        for i in range(len(cyl) - 1):
            dist = np.hypot(xy[i + 1:, 0] - xy[i, 0], xy[i + 1:, 1] - xy[i, 1])
            hit = np.nonzero(dist < r[i + 1:] + r[i] - TOL)[0]
            for j in hit + i + 1:
                out.append(Violation("overlap", f"cylinders {i} and {j} overlap"))
    for p in layout.ports:
        for i, c in enumerate(cyl):
            if p.distance_to(c.x, c.y) < c.r - TOL:
                out.append(Violation("port-obstruction", f"cylinder {i} crosses port {p.id}"))
        for px, py in (p.p0, p.p1):
            if not (x0 - TOL <= px <= x1 + TOL and y0 - TOL <= py <= y1 + TOL):
                out.append(Violation("outside", f"port {p.id} leaves the outline"))
    ids = sorted(p.id for p in layout.ports)
    if ids != list(range(1, len(ids) + 1)):
        out.append(Violation("port-ids", f"port ids {ids} are not contiguous from 1"))
    return out


def _wall(start: tuple[float, float], direction: tuple[float, float], pitch: float,
          count: int, r: float, first: int = 0) -> list[Cylinder]:
    return [
        Cylinder(start[0] + k * pitch * direction[0], start[1] + k * pitch * direction[1], r)
        for k in range(first, count)
    ]


def _count(length: float, pitch: float) -> int:
    return int(math.floor(length / pitch + 1e-9)) + 1


def generate_rsiw(spec: SiwSpec, length: float) -> DeviceLayout:
    """Straight guide: ports 1 (x=0) and 2 (x=length), rows at y=+-W/2."""
    p, d, w = spec.p, spec.d, spec.w_siw
    if length < 2 * p - TOL:
        raise ValueError(f"length {length} too short to hold two posts per row (need >= {2 * p})")
    n = _count(length, p)
    cyl = _wall((0.0, -w / 2), (1.0, 0.0), p, n, d / 2) + _wall((0.0, w / 2), (1.0, 0.0), p, n, d / 2)
    half = (w - d) / 2
    ports = (
        ModalPort(1, (0.0, -half), (0.0, half), (1.0, 0.0)),
        ModalPort(2, (length, -half), (length, half), (-1.0, 0.0)),
    )
    m = w / 2 + 2 * p
    outline = (-p / 2, -m, length + p / 2, m)
    return DeviceLayout(outline, spec.substrate, tuple(cyl), ports, "rsiw",
                        {"length": length, "posts_per_row": n})


def generate_tee_divider(spec: SiwSpec, arm_length: float, post_radius: float = 0.0,
                         post_offset: float = 0.0) -> DeviceLayout:
    """T-junction divider, input along +x on the y=0 axis.

    Input arm walls y=+-W/2 for x in [0, L]; output arms occupy
    x in [L, L+W] and run to y=+-(W/2+L) where ports 2 (top) and 3 (bottom)
    sit.  A single corner post is shared at each inner corner (L, +-W/2);
    every wall is laid out at pitch p starting from that corner.
    """
    p, d, w = spec.p, spec.d, spec.w_siw
    L = arm_length
    if L < 2 * p:
        raise ValueError("arm length must hold at least two posts")
    r = d / 2
    ytop = w / 2 + L
    cyl: list[Cylinder] = []
    n_in = _count(L, p)
    for s in (1.0, -1.0):
        cyl += _wall((L, s * w / 2), (-1.0, 0.0), p, n_in, r)
        cyl += _wall((L, s * w / 2), (0.0, s), p, _count(L, p), r, first=1)
    kmax = int(math.floor((ytop - r) / p - 1e-9))
    cyl += [Cylinder(L + w, k * p, r) for k in range(-kmax, kmax + 1)]
    if post_radius > 0:
        tuner = Cylinder(post_offset, 0.0, post_radius)
        if post_offset - post_radius <= 0:
            raise ValueError("tuning post crosses the port-1 reference plane")
        for c in cyl:
            if math.hypot(c.x - tuner.x, c.y - tuner.y) < c.r + tuner.r + TOL:
                raise ValueError(
                    f"tuning post (x_p={post_offset:.6g}, r={post_radius:.6g}) overlaps a wall post"
                )
        cyl.append(tuner)
    half = (w - d) / 2
    ports = (
        ModalPort(1, (0.0, -half), (0.0, half), (1.0, 0.0)),
        ModalPort(2, (L + d / 2, ytop), (L + w - d / 2, ytop), (0.0, -1.0)),
        ModalPort(3, (L + d / 2, -ytop), (L + w - d / 2, -ytop), (0.0, 1.0)),
    )
    outline = (-p / 2, -(ytop + p / 2), L + w + 2 * p, ytop + p / 2)
    meta = {"arm_length": L, "post_radius": post_radius, "post_offset": post_offset}
    return DeviceLayout(outline, spec.substrate, tuple(cyl), ports, "divider", meta)


def generate_aperture_coupler(spec: SiwSpec, total_length: float, w_ap: float, l_ap: float,
                              w_s: float, l_s: float) -> DeviceLayout:
    """Two guides side by side sharing a post wall on y=0, centered on the
    origin; the shared wall is opened over |x| < w_ap/2.

    Port numbering: 1 input (upper left), 2 through (upper right),
    3 coupled (lower right), 4 isolated (lower left).  ``l_ap`` sets the
    inset of the two outer walls toward the center over the aperture
    (narrowing the coupling region); ``w_s`` and ``l_s`` size the feed stubs
    at the ports and are carried as metadata only, since the microstrip
    feeds are outside the 2-D model.
    """
    p, d, w = spec.p, spec.d, spec.w_siw
    L = total_length
    if not (w_ap < L and min(L, l_ap, w_s, l_s) > 0 and w_ap >= 0):
        raise ValueError("coupler dimensions must be positive with w_ap < total length")
    if 2 * l_ap >= w - d:
        raise ValueError("aperture inset closes the guides")
    r = d / 2
    half_len = L / 2
    cyl: list[Cylinder] = []
    # shared wall, symmetric about x = 0
    if w_ap == 0:
        n = _count(half_len, p)
        cyl += _wall((0.0, 0.0), (1.0, 0.0), p, n, r)
        cyl += _wall((0.0, 0.0), (-1.0, 0.0), p, n, r, first=1)
    else:
        n = _count(half_len - w_ap / 2, p)
        cyl += _wall((w_ap / 2, 0.0), (1.0, 0.0), p, n, r)
        cyl += _wall((-w_ap / 2, 0.0), (-1.0, 0.0), p, n, r)
    # outer walls: straight sections from the ports inward, stepped section over the aperture
    for s in (1.0, -1.0):
        if w_ap == 0 or l_ap == 0:
            n = _count(half_len, p)
            cyl += _wall((0.0, s * w), (1.0, 0.0), p, n, r)
            cyl += _wall((0.0, s * w), (-1.0, 0.0), p, n, r, first=1)
            continue
        yin = s * (w - l_ap)
        n_out = _count(half_len - w_ap / 2, p)
        for sx in (1.0, -1.0):
            cyl += _wall((sx * half_len, s * w), (-sx, 0.0), p, n_out, r)
        n_in = _count(w_ap / 2, p)
        cyl += _wall((0.0, yin), (1.0, 0.0), p, n_in, r)
        cyl += _wall((0.0, yin), (-1.0, 0.0), p, n_in, r, first=1)
    cyl = _dedupe(cyl)
    half = (w - d) / 2
    yu, yl = w / 2, -w / 2
    ports = (
        ModalPort(1, (-half_len, yu - half), (-half_len, yu + half), (1.0, 0.0)),
        ModalPort(2, (half_len, yu - half), (half_len, yu + half), (-1.0, 0.0)),
        ModalPort(3, (half_len, yl - half), (half_len, yl + half), (-1.0, 0.0)),
        ModalPort(4, (-half_len, yl - half), (-half_len, yl + half), (1.0, 0.0)),
    )
    m = w + 2 * p
    outline = (-half_len - p / 2, -m, half_len + p / 2, m)
    meta = {"total_length": L, "w_ap": w_ap, "l_ap": l_ap, "w_s": w_s, "l_s": l_s}
    return DeviceLayout(outline, spec.substrate, tuple(cyl), ports, "coupler", meta)


def _dedupe(cyl: Iterable[Cylinder]) -> list[Cylinder]:
    out: list[Cylinder] = []
    for c in cyl:
        if not any(abs(c.x - o.x) < 1e-12 and abs(c.y - o.y) < 1e-12 for o in out):
            out.append(c)
    return out


def _rot(x: float, y: float, ang: float) -> tuple[float, float]:
    ca, sa = math.cos(ang), math.sin(ang)
    return (ca * x - sa * y, sa * x + ca * y)


def generate_circulator_skeleton(spec: SiwSpec, arm_length: float, ferrite_radius: float,
                                 eps_f: float = 13.7) -> DeviceLayout:
    """Three guides at 120 degrees around a central ferrite disk.

    Port 1 sits on the -x axis, ports 2 and 3 at +60 and -60 degrees, so a
    rotation by -120 degrees maps port k onto port k+1.  The disk is a plain
    dielectric cylinder; gyrotropy is not modelled.
    """
    if not ferrite_radius > 0:
        raise ValueError("ferrite radius must be positive")
    p, d, w = spec.p, spec.d, spec.w_siw
    r = d / 2
    s0 = w / (2 * math.sqrt(3))  # axial position where neighbouring walls meet
    n = _count(arm_length, p)
    arm: list[Cylinder] = []
    # arm along -x: u = (-1, 0), v = rot(u, +90deg) = (0, -1)
    u, v = (-1.0, 0.0), (0.0, -1.0)
    for side, first in ((1.0, 0), (-1.0, 1)):
        start = (s0 * u[0] + side * w / 2 * v[0], s0 * u[1] + side * w / 2 * v[1])
        arm += _wall(start, u, p, n, r, first=first)
    s_port = s0 + arm_length
    half = (w - d) / 2
    port0 = ((-s_port, half), (-s_port, -half))
    cyl: list[Cylinder] = []
    ports: list[ModalPort] = []
    for k in range(3):
        ang = -2 * math.pi / 3 * k
        for c in arm:
            cx, cy = _rot(c.x, c.y, ang)
            cyl.append(Cylinder(cx, cy, c.r))
        a0 = _rot(*port0[0], ang)
        a1 = _rot(*port0[1], ang)
        nrm = _rot(1.0, 0.0, ang)
        ports.append(ModalPort(k + 1, a0, a1, nrm))
    inner = w / math.sqrt(3) - r
    if ferrite_radius >= inner - TOL or ferrite_radius >= s0:
        raise ValueError(
            f"ferrite disk (R_f={ferrite_radius:.6g}) intersects the arm walls"
        )
    cyl.append(Cylinder(0.0, 0.0, ferrite_radius, eps=eps_f))
    xy = np.array([(c.x, c.y) for c in cyl] + [pt for q in ports for pt in (q.p0, q.p1)])
    m = 2 * p
    outline = (xy[:, 0].min() - m, xy[:, 1].min() - m, xy[:, 0].max() + m, xy[:, 1].max() + m)
    meta = {
        "arm_length": arm_length,
        "ferrite_radius": ferrite_radius,
        "eps_f": eps_f,
        "gyrotropy": "not modelled; ferrite is an isotropic dielectric",
    }
    return DeviceLayout(outline, spec.substrate, tuple(cyl), tuple(ports), "circulator", meta)


def mirror_layout(layout: DeviceLayout, axis: str, about: float = 0.0) -> DeviceLayout:
    """Reflect about the line ``y = about`` (axis='x') or ``x = about`` (axis='y')."""
    def f(x, y):
        return (x, 2 * about - y) if axis == "x" else (2 * about - x, y)

    def fv(x, y):
        return (x, -y) if axis == "x" else (-x, y)

    cyl = tuple(replace(c, x=f(c.x, c.y)[0], y=f(c.x, c.y)[1]) for c in layout.cylinders)
    ports = tuple(replace(q, p0=f(*q.p0), p1=f(*q.p1), normal=fv(*q.normal)) for q in layout.ports)
    x0, y0, x1, y1 = layout.outline
    a, b = f(x0, y0), f(x1, y1)
    outline = (min(a[0], b[0]), min(a[1], b[1]), max(a[0], b[0]), max(a[1], b[1]))
    return replace(layout, outline=outline, cylinders=cyl, ports=ports)


def rotate_layout(layout: DeviceLayout, angle: float) -> DeviceLayout:
    cyl = tuple(replace(c, x=_rot(c.x, c.y, angle)[0], y=_rot(c.x, c.y, angle)[1])
                for c in layout.cylinders)
    ports = tuple(replace(q, p0=_rot(*q.p0, angle), p1=_rot(*q.p1, angle),
                          normal=_rot(*q.normal, angle)) for q in layout.ports)
    return replace(layout, cylinders=cyl, ports=ports)


def same_cylinders(a: DeviceLayout, b: DeviceLayout, tol: float = 1e-12) -> bool:
    """True when both layouts hold the same cylinder set, in any order."""
    if len(a.cylinders) != len(b.cylinders):
        return False
    pb = b.centers()
    rb = np.array([c.r for c in b.cylinders])
    used = np.zeros(len(pb), dtype=bool)
    for c in a.cylinders:
        dist = np.hypot(pb[:, 0] - c.x, pb[:, 1] - c.y)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        if dist[j] > tol or abs(rb[j] - c.r) > tol or b.cylinders[j].eps != c.eps:
            return False
        used[j] = True
    return True


def port_matches(a: ModalPort, b: ModalPort, tol: float = 1e-12) -> bool:
    """Same reference plane and normal, endpoints in either order."""
    def close(u, v):
        return abs(u[0] - v[0]) <= tol and abs(u[1] - v[1]) <= tol

    same = (close(a.p0, b.p0) and close(a.p1, b.p1)) or (close(a.p0, b.p1) and close(a.p1, b.p0))
    return same and close(a.normal, b.normal)


# Serialization


class LayoutFormatError(ValueError):
    pass


def _num(v: float) -> str:
    return repr(float(v))


def write_layout(layout: DeviceLayout) -> str:
    s = layout.substrate
    lines = ["SIWLAYOUT 1"]
    if layout.name:
        lines.append(f"# device: {layout.name}")
    for k, v in layout.meta.items():
        lines.append(f"# {k}: {v}")
    lines.append(f"SUBSTRATE h_eps_tand {_num(s.h)} {_num(s.eps_r)} {_num(s.tan_d)}")
    lines.append("OUTLINE " + " ".join(_num(v) for v in layout.outline))
    for c in layout.cylinders:
        mat = "PEC" if c.is_pec else f"DIEL:{_num(c.eps)}"
        lines.append(f"CYL {_num(c.x)} {_num(c.y)} {_num(c.r)} {mat}")
    for q in layout.ports:
        nums = (*q.p0, *q.p1, *q.normal)
        lines.append(f"PORT {q.id} " + " ".join(_num(v) for v in nums) + f" {q.modes}")
    return "\n".join(lines) + "\n"


def parse_layout(text: str) -> DeviceLayout:
    lines = text.splitlines()
    substrate = outline = None
    cyl: list[Cylinder] = []
    ports: list[ModalPort] = []
    name = ""
    header = False
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# device:"):
                name = line.split(":", 1)[1].strip()
            continue
        tok = line.split()
        tag = tok[0]
        try:
            if not header:
                if tok != ["SIWLAYOUT", "1"]:
                    raise LayoutFormatError(f"line {lineno}: expected 'SIWLAYOUT 1' header")
                header = True
            elif tag == "SUBSTRATE":
                if len(tok) != 5 or tok[1] != "h_eps_tand":
                    raise LayoutFormatError(f"line {lineno}: malformed SUBSTRATE record")
                substrate = Substrate(float(tok[2]), float(tok[3]), float(tok[4]))
            elif tag == "OUTLINE":
                if len(tok) != 5:
                    raise LayoutFormatError(f"line {lineno}: OUTLINE needs 4 numbers")
                outline = tuple(float(t) for t in tok[1:])
            elif tag == "CYL":
                if len(tok) != 5:
                    raise LayoutFormatError(f"line {lineno}: CYL needs x y r material")
                if tok[4] == "PEC":
                    eps = None
                elif tok[4].startswith("DIEL:"):
                    eps = float(tok[4][5:])
                else:
                    raise LayoutFormatError(f"line {lineno}: unknown material {tok[4]!r}")
                cyl.append(Cylinder(float(tok[1]), float(tok[2]), float(tok[3]), eps))
            elif tag == "PORT":
                if len(tok) != 9:
                    raise LayoutFormatError(f"line {lineno}: PORT needs 8 fields")
                v = [float(t) for t in tok[2:8]]
                ports.append(ModalPort(int(tok[1]), (v[0], v[1]), (v[2], v[3]), (v[4], v[5]),
                                       int(tok[8])))
            else:
                raise LayoutFormatError(f"line {lineno}: unknown record tag {tag!r}")
        except LayoutFormatError:
            raise
        except ValueError as exc:
            raise LayoutFormatError(f"line {lineno}: {exc}") from None
    if not header:
        raise LayoutFormatError("missing 'SIWLAYOUT 1' header")
    if substrate is None or outline is None:
        raise LayoutFormatError("layout needs SUBSTRATE and OUTLINE records")
    return DeviceLayout(outline, substrate, tuple(cyl), tuple(ports), name)
