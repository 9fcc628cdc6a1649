"""2-D finite-difference frequency-domain solver for post-wall circuits.

Fields of TE_n0 type have no variation across the substrate height, so the
vertical electric field obeys the scalar Helmholtz equation

    d/dx(1/sx d/dx Ez)/sx + d/dy(1/sy d/dy Ez)/sy + k0^2 eps_r Ez = 0

in plan view.  It is discretized with the five-point stencil on a uniform
node grid; metal posts are staircased (Ez = 0 on every node inside one).
The equation is multiplied through by sx*sy*dx*dy so the system matrix is
complex symmetric, which makes the extracted S-matrix reciprocal to
round-off.

Every port is an axis-aligned reference plane on the edge of the (cropped)
computational box.  Beyond it the domain is continued analytically by a
solid-wall guide of the port's equivalent width: each discrete transverse
mode gets its exact one-cell discrete Dirichlet-to-Neumann closure, which
injects the incident TE10 wave and absorbs every outgoing mode without
reflection.  Edges away from ports carry a stretched-coordinate absorbing
layer.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .geometry import DeviceLayout, ModalPort, generate_rsiw, validate_layout
from .network import ScatteringData
from .waveguide import (
    C0,
    DispersionTable,
    RectGuideSpec,
    SiwSpec,
    propagation_constant,
    te_cutoff_frequency,
)

log = logging.getLogger(__name__)

SIDES = ("x0", "x1", "y0", "y1")
_NORMAL_SIDE = {(1.0, 0.0): "x0", (-1.0, 0.0): "x1", (0.0, 1.0): "y0", (0.0, -1.0): "y1"}


class SolverError(RuntimeError):
    def __init__(self, message: str, frequency: float | None = None):
        if frequency is not None:
            message = f"{message} (at {frequency / 1e9:.6g} GHz)"
        super().__init__(message)
        self.frequency = frequency


@dataclass(frozen=True)
class SolverConfig:
    cells_per_wavelength: float = 20.0
    cells_per_diameter: float = 6.0
    port_modes: int = 1
    pml_cells: int = 10
    max_cells: int = 4_000_000
    workers: int = 1
    pml_reflection: float = 1e-8

    def __post_init__(self):
        for name in ("cells_per_wavelength", "cells_per_diameter", "port_modes", "pml_cells",
                     "max_cells", "workers"):
            if not getattr(self, name) >= 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class FieldMap:
    x0: float
    y0: float
    dx: float
    dy: float
    ez: np.ndarray  # shape (nx, ny), ez[i, j] at (x0 + i*dx, y0 + j*dy)
    frequency: float

    def __post_init__(self):
        if np.ndim(self.ez) != 2 or not np.all(np.isfinite(self.ez)):
            raise ValueError("field samples must be a finite 2-D array")

    @property
    def shape(self) -> tuple[int, int]:
        return self.ez.shape

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.ez.shape
        return self.x0 + self.dx * np.arange(nx), self.y0 + self.dy * np.arange(ny)

    def to_csv(self) -> str:
        x, y = self.coords()
        lines = ["x_m,y_m,re_ez,im_ez"]
        for j in range(len(y)):
            for i in range(len(x)):
                v = self.ez[i, j]
                lines.append(f"{x[i]:.9g},{y[j]:.9g},{v.real:.9g},{v.imag:.9g}")
        return "\n".join(lines) + "\n"

    def to_pgm(self) -> str:
        mag = np.abs(self.ez)
        peak = mag.max()
        img = np.zeros_like(mag, dtype=int) if peak == 0 else np.rint(255 * mag / peak).astype(int)
        nx, ny = img.shape
        rows = [" ".join(str(v) for v in img[:, j]) for j in range(ny - 1, -1, -1)]
        return f"P2\n{nx} {ny}\n255\n" + "\n".join(rows) + "\n"


@dataclass(frozen=True)
class PortGrid:
    """A port's footprint on the box edge: K transverse nodes whose outer
    neighbours (indices -1 and K) act as the walls of the continuation guide."""

    id: int
    side: str
    nodes: np.ndarray  # flat node indices, ordered along the edge
    dn: float  # spacing normal to the plane
    dt: float  # spacing along the plane
    mode_width: float
    eps: complex

    @property
    def k(self) -> int:
        return len(self.nodes)

    def modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal discrete sine modes (columns) and their transverse
        eigenvalues (1/m^2)."""
        K = self.k
        m = np.arange(1, K + 1)
        kk = np.arange(1, K + 1)
        phi = math.sqrt(2.0 / (K + 1)) * np.sin(np.pi * np.outer(kk, m) / (K + 1))
        mu = (2.0 / self.dt * np.sin(np.pi * m / (2 * (K + 1)))) ** 2
        return phi, mu

    def multipliers(self, k0: float) -> np.ndarray:
        """Per-mode one-cell propagation factor lambda of the outgoing wave."""
        _, mu = self.modes()
        q = 1.0 - 0.5 * self.dn**2 * (k0**2 * self.eps - mu)
        q = q.astype(complex)
        root = np.sqrt(q * q - 1.0)
        lam = q - root
        alt = q + root
        swap = np.abs(lam) > np.abs(alt) + 1e-12
        lam = np.where(swap, alt, lam)
        # lossless propagating modes: |lambda| = 1, outgoing is exp(-j theta)
        ring = np.abs(np.abs(lam) - 1.0) < 1e-12
        lam = np.where(ring & (lam.imag > 0), np.conj(lam), lam)
        return lam

    def propagating(self, k0: float) -> int:
        _, mu = self.modes()
        q = 1.0 - 0.5 * self.dn**2 * (k0**2 * self.eps.real - mu)
        return int(np.count_nonzero(np.abs(q) < 1.0))

    def norm(self, lam1: complex) -> float:
        """Power normalization of the TE10 amplitude."""
        theta = -np.angle(lam1)
        return math.sqrt(self.dt * abs(math.sin(theta)) / self.dn)


@dataclass(frozen=True)
class Grid:
    x: np.ndarray
    y: np.ndarray
    eps: np.ndarray  # complex relative permittivity per node
    pec: np.ndarray  # bool per node
    sx: np.ndarray
    sy: np.ndarray
    ports: tuple[PortGrid, ...]
    cell: float

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.x), len(self.y))

    @property
    def ncells(self) -> int:
        return len(self.x) * len(self.y)

    def port(self, pid: int) -> PortGrid:
        for p in self.ports:
            if p.id == pid:
                return p
        raise KeyError(pid)


def port_mode_width(layout: DeviceLayout, port: ModalPort) -> float:
    """Equivalent width of the guide feeding ``port``.

    The port segment spans the clear aperture W_SIW - d between the posts
    flanking it; d and the pitch p are read off the flanking posts and the
    empirical post-wall correction W_SIW - d^2/(0.95 p) is applied.  Without
    flanking posts the segment length is used as a solid-wall width.
    """
    pec = [c for c in layout.cylinders if c.is_pec]
    if len(pec) < 2:
        return port.length
    xy = np.array([(c.x, c.y) for c in pec])
    widths = []
    for ex, ey in (port.p0, port.p1):
        dist = np.hypot(xy[:, 0] - ex, xy[:, 1] - ey)
        i = int(np.argmin(dist))
        c = pec[i]
        nn = np.hypot(xy[:, 0] - c.x, xy[:, 1] - c.y)
        nn[i] = np.inf
        pitch = float(nn.min())
        if dist[i] > c.r + pitch:
            return port.length
        d = 2 * c.r
        widths.append(port.length + d - d * d / (0.95 * pitch))
    return float(np.mean(widths))


def _box(layout: DeviceLayout) -> tuple[float, float, float, float]:
    x0, y0, x1, y1 = layout.outline
    box = {"x0": x0, "x1": x1, "y0": y0, "y1": y1}
    planes: dict[str, float] = {}
    for q in layout.ports:
        if not q.axis_aligned:
            raise SolverError(f"port {q.id} is not axis-aligned; the solver needs ports on x or y planes")
        side = _NORMAL_SIDE[tuple(float(v) for v in q.normal)]
        coord = q.p0[0] if side[0] == "x" else q.p0[1]
        other = q.p1[0] if side[0] == "x" else q.p1[1]
        if abs(coord - other) > 1e-12:
            raise SolverError(f"port {q.id} segment is not perpendicular to its normal")
        if side in planes and abs(planes[side] - coord) > 1e-12:
            raise SolverError(f"ports facing the same way must share one plane (port {q.id})")
        planes[side] = coord
    box.update(planes)
    return box["x0"], box["y0"], box["x1"], box["y1"]


def _axis(lo: float, hi: float, cell: float) -> np.ndarray:
    n = max(2, int(math.ceil((hi - lo) / cell - 1e-9)))
    d = (hi - lo) / n
    c = 0.5 * (lo + hi)
    return c + (np.arange(n + 1) - n / 2) * d


def _port_nodes(t: np.ndarray, center: float, width: float) -> tuple[int, int]:
    """First node index and count K of a port whose continuation guide is
    ``width`` wide; K is picked so (K+1)*dt matches width with the node set
    centered on ``center``."""
    dt = t[1] - t[0]
    uc = (center - t[0]) / dt
    target = width / dt - 1
    best = None
    for K in range(max(1, int(target) - 2), int(target) + 4):
        j0 = int(round(uc - (K - 1) / 2))
        # centering outranks width: an off-center footprint breaks mirror symmetry
        err = 10 * abs(j0 + (K - 1) / 2 - uc) + abs(K - target)
        if best is None or err < best[0] - 1e-9:
            best = (err, j0, K)
    _, j0, K = best
    if j0 < 1 or j0 + K > len(t) - 1:
        raise SolverError("port continuation guide does not fit on the box edge")
    return j0, K


def cell_size(layout: DeviceLayout, config: SolverConfig, f_max: float) -> float:
    lam_g = np.inf
    for q in layout.ports:
        guide = RectGuideSpec(port_mode_width(layout, q), layout.substrate)
        beta = propagation_constant(guide, f_max).imag
        if beta > 0:
            lam_g = min(lam_g, 2 * math.pi / beta)
    if not np.isfinite(lam_g):
        lam_g = C0 / f_max / math.sqrt(layout.substrate.eps_r)
    cell = lam_g / config.cells_per_wavelength
    if layout.cylinders:
        d_min = min(2 * c.r for c in layout.cylinders)
        cell = min(cell, d_min / config.cells_per_diameter)
    return cell


def rasterize(layout: DeviceLayout, config: SolverConfig, f_max: float) -> Grid:
    problems = validate_layout(layout)
    if problems:
        raise SolverError("invalid layout: " + "; ".join(v.message for v in problems[:5]))
    cell = cell_size(layout, config, f_max)
    X0, Y0, X1, Y1 = _box(layout)
    nx_est = (X1 - X0) / cell + 1
    ny_est = (Y1 - Y0) / cell + 1
    if nx_est * ny_est > config.max_cells:
        raise SolverError(
            f"grid of ~{int(nx_est)}x{int(ny_est)} cells exceeds the budget of {config.max_cells}"
        )
    x = _axis(X0, X1, cell)
    y = _axis(Y0, Y1, cell)
    dx, dy = x[1] - x[0], y[1] - y[0]
    sub = layout.substrate
    eps_bg = sub.eps_r * (1 - 1j * sub.tan_d)
    eps = np.full((len(x), len(y)), eps_bg, dtype=complex)
    pec = np.zeros((len(x), len(y)), dtype=bool)
    for c in layout.cylinders:
        i0 = max(0, int(math.floor((c.x - c.r - x[0]) / dx)))
        i1 = min(len(x), int(math.ceil((c.x + c.r - x[0]) / dx)) + 1)
        j0 = max(0, int(math.floor((c.y - c.r - y[0]) / dy)))
        j1 = min(len(y), int(math.ceil((c.y + c.r - y[0]) / dy)) + 1)
        if i0 >= i1 or j0 >= j1:
            continue
        ddx = x[i0:i1, None] - c.x
        ddy = y[None, j0:j1] - c.y
        # closed disk; the slack keeps nodes lying on the rim from being lost to rounding
        inside = ddx * ddx + ddy * ddy <= c.r * c.r * (1 + 1e-9)
        if c.is_pec:
            pec[i0:i1, j0:j1] |= inside
        else:
            eps[i0:i1, j0:j1][inside] = c.eps
    ny = len(y)
    ports = []
    spans: dict[str, list[tuple[float, float]]] = {s: [] for s in SIDES}
    for q in layout.ports:
        side = _NORMAL_SIDE[tuple(float(v) for v in q.normal)]
        width = port_mode_width(layout, q)
        if side[0] == "x":
            t, center = y, q.center[1]
            i = 0 if side == "x0" else len(x) - 1
            j0, K = _port_nodes(t, center, width)
            nodes = i * ny + np.arange(j0, j0 + K)
            dn, dt = dx, dy
        else:
            t, center = x, q.center[0]
            j = 0 if side == "y0" else ny - 1
            j0, K = _port_nodes(t, center, width)
            nodes = np.arange(j0, j0 + K) * ny + j
            dn, dt = dy, dx
        spans[side].append((t[j0 - 1], t[j0 + K]))
        ports.append(PortGrid(q.id, side, nodes, dn, dt, width, eps_bg))
    sx, sy = _stretch(x, y, spans, config, f_max, sub.eps_r)
    ports.sort(key=lambda p: p.id)
    return Grid(x, y, eps, pec, sx, sy, tuple(ports), cell)


def _stretch(x, y, spans, config: SolverConfig, f_max: float, eps_r: float):
    """Polynomial stretched-coordinate profiles on the box edges, masked
    off along port footprints."""
    n = config.pml_cells
    sx = np.ones((len(x), len(y)), dtype=complex)
    sy = np.ones_like(sx)
    k = 2 * math.pi * f_max / C0 * math.sqrt(eps_r)
    for side in SIDES:
        along_x = side[0] == "x"
        h = (x[1] - x[0]) if along_x else (y[1] - y[0])
        t = y if along_x else x
        depth = n * h
        smax = 4 * math.log(1 / config.pml_reflection) / (2 * k * depth)
        mask = np.ones(len(t), dtype=bool)
        for a, b in spans[side]:
            mask &= ~((t >= a - 1e-12) & (t <= b + 1e-12))
        nn = min(n, (len(x) if along_x else len(y)) // 2)
        for kk in range(nn):
            rho = (n - kk) / n
            s = 1 - 1j * smax * rho**3
            idx = kk if side.endswith("0") else (len(x) if along_x else len(y)) - 1 - kk
            if along_x:
                sx[idx, mask] = s
            else:
                sy[mask, idx] = s
    return sx, sy


class _Operator:
    """Frequency-independent part of the system plus per-frequency assembly."""

    def __init__(self, grid: Grid):
        self.grid = grid
        nx, ny = grid.shape
        dx, dy = grid.dx, grid.dy
        free = ~grid.pec.ravel()
        self.free = free
        self.unknown = np.full(nx * ny, -1, dtype=np.int64)
        self.unknown[free] = np.arange(int(free.sum()))
        n = int(free.sum())
        self.n = n
        sx, sy = grid.sx, grid.sy
        idx = np.arange(nx * ny).reshape(nx, ny)
        diag = np.zeros(nx * ny, dtype=complex)
        rows, cols, vals = [], [], []
        # x-directed edges
        cx = (dy / dx) * 0.5 * (sy[:-1, :] + sy[1:, :]) / (0.5 * (sx[:-1, :] + sx[1:, :]))
        a, b = idx[:-1, :].ravel(), idx[1:, :].ravel()
        c = cx.ravel()
        np.add.at(diag, a, -c)
        np.add.at(diag, b, -c)
        rows += [a, b]
        cols += [b, a]
        vals += [c, c]
        cy = (dx / dy) * 0.5 * (sx[:, :-1] + sx[:, 1:]) / (0.5 * (sy[:, :-1] + sy[:, 1:]))
        a, b = idx[:, :-1].ravel(), idx[:, 1:].ravel()
        c = cy.ravel()
        np.add.at(diag, a, -c)
        np.add.at(diag, b, -c)
        rows += [a, b]
        cols += [b, a]
        vals += [c, c]
        # edges to the node just outside the box: Dirichlet unless a port closes them
        gx = (dy / dx) * sy / sx
        gy = (dx / dy) * sx / sy
        diag[idx[0, :]] -= gx[0, :]
        diag[idx[-1, :]] -= gx[-1, :]
        diag[idx[:, 0]] -= gy[:, 0]
        diag[idx[:, -1]] -= gy[:, -1]
        r = np.concatenate(rows)
        cc = np.concatenate(cols)
        v = np.concatenate(vals)
        keep = free[r] & free[cc]
        r = np.concatenate([self.unknown[r[keep]], self.unknown[np.nonzero(free)[0]]])
        cc = np.concatenate([self.unknown[cc[keep]], self.unknown[np.nonzero(free)[0]]])
        v = np.concatenate([v[keep], diag[free]])
        self.stencil = sp.csc_matrix((v, (r, cc)), shape=(n, n))
        self.mass = (grid.eps * sx * sy).ravel()[free] * dx * dy
        self.port_data = []
        for p in grid.ports:
            ok = free[p.nodes]
            self.port_data.append((p, ok, self.unknown[p.nodes[ok]]))

    def assemble(self, k0: float):
        blocks_r, blocks_c, blocks_v = [], [], []
        sources = {}
        for p, ok, unk in self.port_data:
            phi, _ = p.modes()
            lam = p.multipliers(k0)
            coef = p.dt / p.dn
            phi_ok = phi[ok, :]
            dtn = coef * (phi_ok * lam) @ phi_ok.T
            blocks_r.append(np.repeat(unk, len(unk)))
            blocks_c.append(np.tile(unk, len(unk)))
            blocks_v.append(dtn.ravel())
            src = -coef * (1 / lam[0] - lam[0]) * phi_ok[:, 0]
            sources[p.id] = (src, lam)
        a = self.stencil + sp.diags(k0 * k0 * self.mass, format="csc")
        if blocks_r:
            a = a + sp.csc_matrix(
                (np.concatenate(blocks_v), (np.concatenate(blocks_r), np.concatenate(blocks_c))),
                shape=(self.n, self.n),
            )
        return a.tocsc(), sources


def _check_ports(grid: Grid, k0: float, config: SolverConfig, f: float) -> None:
    for p in grid.ports:
        nprop = p.propagating(k0)
        if nprop < 1:
            raise SolverError(f"port {p.id} is below its TE10 cutoff", f)
        if nprop > config.port_modes:
            raise SolverError(
                f"port {p.id} carries {nprop} propagating modes but port_modes={config.port_modes}", f
            )


RESIDUAL_TOL = 1e-10


def _residual(a, x, b) -> float:
    return float(np.linalg.norm(a @ x - b) / np.linalg.norm(b))


def _direct_solve(a, rhs: np.ndarray, f: float) -> np.ndarray:
    """Sparse LU solve meeting a relative-residual contract.

    The matrix is complex symmetric, so a symmetric-mode factorization
    without pivoting is tried first (several times less fill); if its
    residual misses the contract the solve is repeated with partial
    pivoting.
    """
    attempts = (
        dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True)),
        dict(permc_spec="MMD_AT_PLUS_A"),
    )
    res = np.inf
    reason = "non-finite solution"
    for kw in attempts:
        try:
            lu = spl.splu(a, **kw)
        except RuntimeError as exc:
            reason = str(exc)
            continue
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            continue
        res = _residual(a, sol, rhs)
        if res <= RESIDUAL_TOL:
            return sol
        log.debug("residual %.3g after %s, retrying", res, kw)
    if not np.isfinite(res):
        raise SolverError(f"singular or ill-conditioned system: {reason}", f)
    raise SolverError(f"linear solve residual {res:.3g} exceeds {RESIDUAL_TOL:g}", f)


def _solve_frequency(op: _Operator, f: float, excite: list[int], config: SolverConfig,
                     keep_fields: bool):
    grid = op.grid
    k0 = 2 * math.pi * f / C0
    _check_ports(grid, k0, config, f)
    a, sources = op.assemble(k0)
    rhs = np.zeros((op.n, len(excite)), dtype=complex)
    for col, pid in enumerate(excite):
        src, _ = sources[pid]
        _, _, unk = op.port_data[[p.id for p in grid.ports].index(pid)]
        rhs[unk, col] = src
    sol = _direct_solve(a, rhs, f)
    nports = len(grid.ports)
    s_cols = np.zeros((nports, len(excite)), dtype=complex)
    fields = []
    for col, pid in enumerate(excite):
        e = np.zeros(grid.ncells, dtype=complex)
        e[op.free] = sol[:, col]
        norm_j = grid.port(pid).norm(sources[pid][1][0])
        for i, (p, _, _) in enumerate(op.port_data):
            phi, _ = p.modes()
            c1 = phi[:, 0] @ e[p.nodes]
            b1 = c1 - (1.0 if p.id == pid else 0.0)
            s_cols[i, col] = b1 * p.norm(sources[p.id][1][0]) / norm_j
        if keep_fields:
            fields.append(FieldMap(float(grid.x[0]), float(grid.y[0]), grid.dx, grid.dy,
                                   e.reshape(grid.shape), f))
    return s_cols, fields


def solve_port_excitation(grid: Grid, f: float, excited: int,
                          config: SolverConfig | None = None) -> tuple[np.ndarray, FieldMap]:
    """One solve with a unit TE10 wave incident at port ``excited``.

    Returns the S-matrix column (ordered by port id) and the field map."""
    config = config or SolverConfig()
    op = _Operator(grid)
    cols, fields = _solve_frequency(op, f, [excited], config, True)
    return cols[:, 0], fields[0]


@dataclass(frozen=True)
class SweepResult:
    data: ScatteringData
    grid: Grid
    fields: dict  # (frequency index, port id) -> FieldMap
    error: SolverError | None = None  # set when a partial sweep stopped early

    @property
    def complete(self) -> bool:
        return self.error is None


def simulate(layout: DeviceLayout, frequencies, config: SolverConfig | None = None,
             excite: list[int] | None = None, field_at: list[int] | None = None,
             partial: bool = False) -> SweepResult:
    """Solve ``layout`` at each frequency, exciting each port in ``excite``
    (default: all).  Columns of unexcited ports are left at zero.

    With ``partial`` the sweep runs in order and stops at the first
    frequency that fails; the samples solved so far are returned together
    with the error.
    """
    config = config or SolverConfig()
    freqs = np.asarray(frequencies, dtype=float)
    grid = rasterize(layout, config, float(freqs.max()))
    op = _Operator(grid)
    ids = [p.id for p in grid.ports]
    excite = ids if excite is None else list(excite)
    field_at = set(field_at or [])
    log.info("grid %dx%d (%d unknowns), %d frequencies", *grid.shape, op.n, len(freqs))

    def run(k):
        return _solve_frequency(op, float(freqs[k]), excite, config, k in field_at)

    error = None
    if partial:
        results = []
        for k in range(len(freqs)):
            try:
                results.append(run(k))
            except SolverError as exc:
                error = exc
                break
        if not results:
            raise error
        freqs = freqs[: len(results)]
    elif config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, range(len(freqs))))
    else:
        results = [run(k) for k in range(len(freqs))]
    s = np.zeros((len(freqs), len(ids), len(ids)), dtype=complex)
    fields = {}
    for k, (cols, fl) in enumerate(results):
        for col, pid in enumerate(excite):
            s[k, :, ids.index(pid)] = cols[:, col]
            if fl:
                fields[(k, pid)] = fl[col]
    return SweepResult(ScatteringData(freqs, s), grid, fields, error)


def sweep(layout: DeviceLayout, band: tuple[float, float], npoints: int,
          config: SolverConfig | None = None) -> ScatteringData:
    if npoints < 2:
        raise ValueError("npoints must be >= 2")
    freqs = np.linspace(band[0], band[1], npoints)
    return simulate(layout, freqs, config).data


def extract_beta(spec: SiwSpec, band: tuple[float, float], npoints: int,
                 config: SolverConfig | None = None,
                 lengths: tuple[float, float] | None = None) -> DispersionTable:
    """Phase constant of a post-wall guide from the S21 phase of two
    straight sections, beta = -(arg S21(L2) - arg S21(L1)) / (L2 - L1).

    Both sections are whole multiples of the pitch so their port planes
    see congruent post positions.  By default L2 - L1 is the longest such
    difference for which beta*(L2 - L1) < pi at the band's lower edge, so
    the lowest sample is unambiguous; the rest are unwrapped across
    frequency.
    """
    config = config or SolverConfig()
    f_lo, f_hi = band
    if npoints < 2:
        raise ValueError("npoints must be >= 2")
    guide = spec.equivalent_guide()
    if f_lo <= te_cutoff_frequency(guide, 1):
        raise SolverError("band reaches below the guide's TE10 cutoff", f_lo)
    p = spec.p
    if lengths is None:
        k_lo = 2 * math.pi * f_lo / C0 * math.sqrt(spec.substrate.eps_r)
        n = max(1, int(math.floor(math.pi / (k_lo * p) - 1e-9)))
        l1 = 10 * p
        lengths = (l1, l1 + n * p)
    l1, l2 = lengths
    if not l2 > l1:
        raise ValueError("need L2 > L1")
    freqs = np.linspace(f_lo, f_hi, npoints)
    s1 = simulate(generate_rsiw(spec, l1), freqs, config, excite=[1]).data.entry(2, 1)
    s2 = simulate(generate_rsiw(spec, l2), freqs, config, excite=[1]).data.entry(2, 1)
    dphi = np.angle(s2 * np.conj(s1))
    steps = np.diff(dphi)
    wrapped = (steps + np.pi) % (2 * np.pi) - np.pi
    if np.any(np.abs(wrapped) > np.pi / 2):
        k = int(np.argmax(np.abs(wrapped)))
        raise SolverError(
            f"phase unwrap is ambiguous between {freqs[k] / 1e9:.6g} and {freqs[k + 1] / 1e9:.6g} GHz"
            f" (step {abs(wrapped[k]):.3g} rad with L2-L1 = {(l2 - l1) * 1e3:.4g} mm); raise npoints",
            freqs[k],
        )
    phase = np.concatenate(([dphi[0]], dphi[0] + np.cumsum(wrapped)))
    beta = -phase / (l2 - l1)
    if np.any(beta <= 0):
        raise SolverError("extracted phase constant is not positive; check the band and lengths")
    return DispersionTable(freqs, (1,), beta[:, None], np.full((npoints, 1), np.nan))
