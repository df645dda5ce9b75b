"""Reflectance lookup tables over (mua, musp) and their inversion.

A table holds diffuse reflectance at two spatial frequencies (DC and one
AC frequency) on a rectangular optical-property grid.  It is built from
one white Monte Carlo run: for each grid node the joint (radius,
pathlength) histogram is reweighted for absorption and projected onto the
node's scaled frequency, fx / musp, which is what makes a single
simulation sufficient for the whole grid.

Forward queries interpolate bilinearly in (log mua, log musp).  Inversion
runs a damped Newton iteration on that same piecewise-bilinear surface,
seeded by a nearest-node search, so forward and inverse are consistent by
construction.  diffusion_rd provides an independent closed-form check for
the diffusive regime.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import j0

from .errors import (
    InvalidConfigError,
    IoError,
    MalformedMetadataError,
    NonMonotonicError,
    OutOfGridError,
)
from .mc import RadialReflectance, TransportConfig, simulate_white_mc

DEFAULT_FX_AC = 0.2
LUT_MAGIC = b"SFLUT1"

# Inversion acceptance: converged when the (rd_dc, rd_ac) residual norm
# is below this; larger residuals flag the pixel invalid.
INVERT_RESIDUAL_TOL = 1e-3
_INVERT_MAX_ITER = 60
_EDGE_EPS = 1e-9


def default_mua_grid() -> np.ndarray:
    return np.geomspace(0.001, 0.5, 128)


def default_musp_grid() -> np.ndarray:
    return np.geomspace(0.05, 5.0, 128)


def _check_grid(name: str, grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2:
        raise InvalidConfigError(f"{name} must be 1-D with at least 2 nodes")
    if not np.all(np.isfinite(grid)) or grid[0] <= 0.0:
        raise InvalidConfigError(f"{name} must be finite and positive")
    if not np.all(np.diff(grid) > 0.0):
        raise NonMonotonicError(f"{name} must be strictly ascending")
    return grid


@dataclass(frozen=True)
class LookupTable:
    """Tabulated (rd_dc, rd_ac) on a strictly ascending positive grid.

    rd_dc and rd_ac have shape (len(mua_grid), len(musp_grid)).  Physics
    invariants are enforced at construction: reflectances in [0, 1],
    rd_dc strictly decreasing along mua, and rd_ac <= rd_dc nodewise.
    """

    mua_grid: np.ndarray
    musp_grid: np.ndarray
    rd_dc: np.ndarray
    rd_ac: np.ndarray
    fx_ac: float
    anisotropy_g: float
    n_medium: float
    n_ambient: float
    photon_count: int
    rng_seed: int

    def __post_init__(self):
        object.__setattr__(self, "mua_grid", _check_grid("mua_grid", self.mua_grid))
        object.__setattr__(self, "musp_grid", _check_grid("musp_grid", self.musp_grid))
        shape = (self.mua_grid.size, self.musp_grid.size)
        for name in ("rd_dc", "rd_ac"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise InvalidConfigError(f"{name} shape {arr.shape} != grid shape {shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidConfigError(f"{name} contains non-finite values")
            if arr.min() < 0.0 or arr.max() > 1.0 + 1e-9:
                raise InvalidConfigError(f"{name} out of [0, 1]")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.fx_ac > 0.0):
            raise InvalidConfigError(f"fx_ac must be positive, got {self.fx_ac}")
        if not np.all(np.diff(self.rd_dc, axis=0) < 0.0):
            raise NonMonotonicError("rd_dc must decrease strictly with mua")
        if np.any(self.rd_ac > self.rd_dc + 1e-12):
            raise InvalidConfigError("rd_ac exceeds rd_dc at some grid node")
        for name in ("mua_grid", "musp_grid"):
            getattr(self, name).setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rd_dc.shape

    @cached_property
    def _log_mua(self) -> np.ndarray:
        return np.log(self.mua_grid)

    @cached_property
    def _log_musp(self) -> np.ndarray:
        return np.log(self.musp_grid)

    @cached_property
    def _node_tree(self) -> cKDTree:
        """KD-tree over node (rd_dc, rd_ac) pairs for inversion seeding."""
        pts = np.column_stack([self.rd_dc.ravel(), self.rd_ac.ravel()])
        return cKDTree(pts)


def build_lut(
    cfg: TransportConfig,
    mua_grid: np.ndarray | None = None,
    musp_grid: np.ndarray | None = None,
    fx_ac: float = DEFAULT_FX_AC,
    threads: int = 1,
    white: RadialReflectance | None = None,
) -> LookupTable:
    """Build a table from a white run (simulated here unless supplied).

    For node (mua_m, musp_s) the reflectance at physical frequency fx is

        sum_{r,l} W[r,l] * exp(-mua_m * L_l / musp_s) * J0(2 pi (fx / musp_s) rho_r)

    evaluated in the factorised order (path-profile per frequency, then a
    single matrix product over the absorption axis), which keeps the full
    128 x 128 default grid in the hundreds of megaflops.
    """
    mua = _check_grid("mua_grid", mua_grid if mua_grid is not None else default_mua_grid())
    musp = _check_grid(
        "musp_grid", musp_grid if musp_grid is not None else default_musp_grid()
    )
    if fx_ac <= 0.0:
        raise InvalidConfigError(f"fx_ac must be positive, got {fx_ac}")
    if white is None:
        white = simulate_white_mc(cfg, threads=threads)
    elif white.mua != 0.0 or white.musp != 1.0:
        raise InvalidConfigError("white profile must have mua=0, musp=1")

    weight = white.weight
    rho = white.radial_midpoints
    l_mid = white.path_midpoints
    path_profile_dc = weight.sum(axis=0)

    rd_dc = np.empty((mua.size, musp.size))
    rd_ac = np.empty_like(rd_dc)
    for s, musp_s in enumerate(musp):
        decay = np.exp(-np.outer(mua / musp_s, l_mid))
        bessel = j0(2.0 * np.pi * (fx_ac / musp_s) * rho)
        rd_dc[:, s] = decay @ path_profile_dc
        rd_ac[:, s] = decay @ (weight.T @ bessel)
    np.clip(rd_dc, 0.0, 1.0, out=rd_dc)
    np.clip(rd_ac, 0.0, 1.0, out=rd_ac)

    return LookupTable(
        mua_grid=mua,
        musp_grid=musp,
        rd_dc=rd_dc,
        rd_ac=rd_ac,
        fx_ac=fx_ac,
        anisotropy_g=white.anisotropy_g,
        n_medium=white.n_medium,
        n_ambient=white.n_ambient,
        photon_count=white.photon_count,
        rng_seed=white.rng_seed,
    )


# -- forward interpolation ---------------------------------------------------


def _locate(grid_log: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cell index and fractional coordinate of log-space queries."""
    idx = np.searchsorted(grid_log, q, side="right") - 1
    idx = np.clip(idx, 0, grid_log.size - 2)
    frac = (q - grid_log[idx]) / (grid_log[idx + 1] - grid_log[idx])
    return idx, frac


def lut_forward_map(
    lut: LookupTable, mua: np.ndarray, musp: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised bilinear forward query in (log mua, log musp).

    Raises OutOfGridError if any query leaves the tabulated ranges.
    """
    mua = np.asarray(mua, dtype=np.float64)
    musp = np.asarray(musp, dtype=np.float64)
    if mua.shape != musp.shape:
        raise InvalidConfigError("mua and musp query shapes differ")
    g = lut.mua_grid
    h = lut.musp_grid
    if (
        mua.size == 0
        or mua.min() < g[0]
        or mua.max() > g[-1]
        or musp.min() < h[0]
        or musp.max() > h[-1]
    ):
        raise OutOfGridError(
            f"query outside grid: mua in [{g[0]:.4g}, {g[-1]:.4g}], "
            f"musp in [{h[0]:.4g}, {h[-1]:.4g}]"
        )
    i, t = _locate(lut._log_mua, np.log(mua))
    s_idx, s = _locate(lut._log_musp, np.log(musp))

    out = []
    for table in (lut.rd_dc, lut.rd_ac):
        f00 = table[i, s_idx]
        f10 = table[i + 1, s_idx]
        f01 = table[i, s_idx + 1]
        f11 = table[i + 1, s_idx + 1]
        out.append(
            f00 * (1 - t) * (1 - s) + f10 * t * (1 - s) + f01 * (1 - t) * s + f11 * t * s
        )
    return out[0], out[1]


def lut_forward(lut: LookupTable, mua: float, musp: float) -> tuple[float, float]:
    """Reflectance pair (rd_dc, rd_ac) at one optical-property point."""
    rd_dc, rd_ac = lut_forward_map(lut, np.array([mua]), np.array([musp]))
    return float(rd_dc[0]), float(rd_ac[0])


# -- inversion ----------------------------------------------------------------


def lut_invert_map(
    lut: LookupTable, rd_dc: np.ndarray, rd_ac: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Invert reflectance pairs to (mua, musp, valid), vectorised.

    Never raises per pixel: non-convergent or edge-clamped pixels come
    back with best-effort values and valid = False.  The iteration is a
    damped 2x2 Newton solve on the bilinear surface, started from the
    nearest table node, with steps limited to one cell per iteration.
    """
    q_dc = np.asarray(rd_dc, dtype=np.float64).ravel()
    q_ac = np.asarray(rd_ac, dtype=np.float64).ravel()
    if q_dc.shape != q_ac.shape:
        raise InvalidConfigError("rd_dc and rd_ac query shapes differ")
    shape = np.asarray(rd_dc).shape
    nm, ns = lut.shape

    finite = np.isfinite(q_dc) & np.isfinite(q_ac)
    q_dc = np.where(finite, q_dc, 0.0)
    q_ac = np.where(finite, q_ac, 0.0)

    _, flat = lut._node_tree.query(np.column_stack([q_dc, q_ac]))
    u = (flat // ns).astype(np.float64)
    v = (flat % ns).astype(np.float64)

    def residual_and_jacobian(u, v, q0, q1):
        i = np.clip(np.floor(u).astype(np.intp), 0, nm - 2)
        j = np.clip(np.floor(v).astype(np.intp), 0, ns - 2)
        t = u - i
        s = v - j
        r = np.empty((2, u.size))
        d_t = np.empty_like(r)
        d_s = np.empty_like(r)
        for k, (table, q) in enumerate(((lut.rd_dc, q0), (lut.rd_ac, q1))):
            f00 = table[i, j]
            f10 = table[i + 1, j]
            f01 = table[i, j + 1]
            f11 = table[i + 1, j + 1]
            r[k] = (
                f00 * (1 - t) * (1 - s)
                + f10 * t * (1 - s)
                + f01 * (1 - t) * s
                + f11 * t * s
                - q
            )
            d_t[k] = (f10 - f00) * (1 - s) + (f11 - f01) * s
            d_s[k] = (f01 - f00) * (1 - t) + (f11 - f10) * t
        return r, d_t, d_s

    active = np.arange(u.size)
    for _ in range(_INVERT_MAX_ITER):
        r, d_t, d_s = residual_and_jacobian(
            u[active], v[active], q_dc[active], q_ac[active]
        )
        det = d_t[0] * d_s[1] - d_s[0] * d_t[1]
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        du = (-r[0] * d_s[1] + r[1] * d_s[0]) / det
        dv = (-r[1] * d_t[0] + r[0] * d_t[1]) / det
        np.clip(du, -1.0, 1.0, out=du)  # at most one cell per iteration
        np.clip(dv, -1.0, 1.0, out=dv)
        u[active] = np.clip(u[active] + du, 0.0, nm - 1.0)
        v[active] = np.clip(v[active] + dv, 0.0, ns - 1.0)
        moving = (np.abs(du) > 1e-12) | (np.abs(dv) > 1e-12)
        active = active[moving]
        if active.size == 0:
            break

    r, _, _ = residual_and_jacobian(u, v, q_dc, q_ac)
    resid = np.hypot(r[0], r[1])
    clamped = (
        (u < _EDGE_EPS)
        | (u > nm - 1.0 - _EDGE_EPS)
        | (v < _EDGE_EPS)
        | (v > ns - 1.0 - _EDGE_EPS)
    )
    valid = finite & (resid <= INVERT_RESIDUAL_TOL) & ~clamped

    mua = np.exp(np.interp(u, np.arange(nm), lut._log_mua))
    musp = np.exp(np.interp(v, np.arange(ns), lut._log_musp))
    return mua.reshape(shape), musp.reshape(shape), valid.reshape(shape)


def lut_invert(lut: LookupTable, rd_dc: float, rd_ac: float) -> tuple[float, float, bool]:
    """Invert one reflectance pair; returns (mua, musp, valid)."""
    mua, musp, valid = lut_invert_map(lut, np.array([rd_dc]), np.array([rd_ac]))
    return float(mua[0]), float(musp[0]), bool(valid[0])


# -- closed-form diffusion check ----------------------------------------------


def diffusion_rd(mua, musp, fx, n_medium: float = 1.4):
    """Diffusion-approximation diffuse reflectance at spatial frequency fx.

    Standard semi-infinite form with the internal-reflection parameter
    from the polynomial fit R_eff(n); accurate only in the diffusive
    regime (albedo near 1 and fx well below musp).  Accepts scalars or
    arrays; fx is in cycles/mm.

        mutr   = mua + musp
        mueff' = sqrt(3 mua mutr + (2 pi fx)^2)
        Rd     = 3 A a' / ((mueff'/mutr + 1)(mueff'/mutr + 3A))
    """
    mua = np.asarray(mua, dtype=np.float64)
    musp = np.asarray(musp, dtype=np.float64)
    fx = np.asarray(fx, dtype=np.float64)
    if np.any(mua < 0.0) or np.any(musp <= 0.0) or np.any(fx < 0.0):
        raise InvalidConfigError("need mua >= 0, musp > 0, fx >= 0")
    if n_medium < 1.0:
        raise InvalidConfigError(f"n_medium must be >= 1, got {n_medium}")
    n = n_medium
    r_eff = 0.0636 * n + 0.668 + 0.710 / n - 1.440 / n**2
    a_coef = (1.0 - r_eff) / (2.0 * (1.0 + r_eff))
    mutr = mua + musp
    albedo = musp / mutr
    q = np.sqrt(3.0 * mua * mutr + (2.0 * np.pi * fx) ** 2) / mutr
    rd = 3.0 * a_coef * albedo / ((q + 1.0) * (q + 3.0 * a_coef))
    if rd.ndim == 0:
        return float(rd)
    return rd


# -- persistence ---------------------------------------------------------------
#
# Binary layout (little-endian) after the 6-byte magic:
#   u32 n_mua, u32 n_musp,
#   f64 fx_ac, f64 anisotropy_g, f64 n_medium, f64 n_ambient,
#   i64 photon_count, i64 rng_seed,
# then float64 arrays: mua_grid, musp_grid, rd_dc (row-major), rd_ac.
# A JSON twin with identical content is written next to it for interop.

_HEADER = struct.Struct("<IIddddqq")


def save_lut(lut: LookupTable, path: str | Path) -> Path:
    """Write binary table plus a JSON twin at <path>.json."""
    path = Path(path)
    nm, ns = lut.shape
    blob = bytearray(LUT_MAGIC)
    blob += _HEADER.pack(
        nm,
        ns,
        lut.fx_ac,
        lut.anisotropy_g,
        lut.n_medium,
        lut.n_ambient,
        lut.photon_count,
        lut.rng_seed,
    )
    for arr in (lut.mua_grid, lut.musp_grid, lut.rd_dc, lut.rd_ac):
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    twin = {
        "magic": LUT_MAGIC.decode(),
        "fx_ac": lut.fx_ac,
        "anisotropy_g": lut.anisotropy_g,
        "n_medium": lut.n_medium,
        "n_ambient": lut.n_ambient,
        "photon_count": lut.photon_count,
        "rng_seed": lut.rng_seed,
        "mua_grid": lut.mua_grid.tolist(),
        "musp_grid": lut.musp_grid.tolist(),
        "rd_dc": lut.rd_dc.tolist(),
        "rd_ac": lut.rd_ac.tolist(),
    }
    try:
        path.write_bytes(bytes(blob))
        path.with_name(path.name + ".json").write_text(json.dumps(twin))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def load_lut(path: str | Path) -> LookupTable:
    """Read a table saved by :func:`save_lut` (binary or its JSON twin)."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if path.suffix == ".json" or blob[:1] == b"{":
        try:
            twin = json.loads(blob)
            return LookupTable(
                mua_grid=np.array(twin["mua_grid"]),
                musp_grid=np.array(twin["musp_grid"]),
                rd_dc=np.array(twin["rd_dc"]),
                rd_ac=np.array(twin["rd_ac"]),
                fx_ac=twin["fx_ac"],
                anisotropy_g=twin["anisotropy_g"],
                n_medium=twin["n_medium"],
                n_ambient=twin["n_ambient"],
                photon_count=twin["photon_count"],
                rng_seed=twin["rng_seed"],
            )
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise MalformedMetadataError(f"bad JSON table {path}: {exc}") from exc

    if blob[: len(LUT_MAGIC)] != LUT_MAGIC:
        raise MalformedMetadataError(f"{path} lacks the {LUT_MAGIC.decode()} magic")
    off = len(LUT_MAGIC)
    try:
        nm, ns, fx_ac, g, n_med, n_amb, photons, seed = _HEADER.unpack_from(blob, off)
    except struct.error as exc:
        raise MalformedMetadataError(f"{path}: truncated header") from exc
    off += _HEADER.size
    need = off + 8 * (nm + ns + 2 * nm * ns)
    if len(blob) < need:
        raise MalformedMetadataError(f"{path}: payload truncated ({len(blob)} < {need} bytes)")

    def take(count, shape):
        nonlocal off
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape)
        off += 8 * count
        return arr.copy()

    mua_grid = take(nm, (nm,))
    musp_grid = take(ns, (ns,))
    rd_dc = take(nm * ns, (nm, ns))
    rd_ac = take(nm * ns, (nm, ns))
    return LookupTable(
        mua_grid=mua_grid,
        musp_grid=musp_grid,
        rd_dc=rd_dc,
        rd_ac=rd_ac,
        fx_ac=fx_ac,
        anisotropy_g=g,
        n_medium=n_med,
        n_ambient=n_amb,
        photon_count=photons,
        rng_seed=seed,
    )
