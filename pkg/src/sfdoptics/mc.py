"""Photon transport in a scattering half-space.

A single "white" simulation is run with zero absorption and unit reduced
scattering (mus' = 1 mm^-1).  Escaping photons are histogrammed jointly
over exit radius and total pathlength, which lets one reference run serve
every (mua, musp) pair afterwards:

* absorption is applied after the fact by Beer-Lambert reweighting,
  exp(-mua * L / musp), because at zero absorption the random walk does
  not depend on mua;
* changing musp only rescales lengths, so radii and pathlengths recorded
  at musp = 1 map to a target musp by dividing by musp.

Determinism is organised around logical RNG streams, not threads: the
photon budget is split over a fixed number of xoshiro256++ streams, each
stream fills its own histogram, and the per-stream histograms are summed
in stream order.  Results are therefore bit-identical for any worker
count.

Geometry: the medium occupies z > 0, photons launch at the origin heading
straight down (+z), and the z = 0 plane is the only boundary.  Refractive
index mismatch is handled by statistical Fresnel reflection at each
surface hit.  Because the walk length at zero absorption has a heavy
1/sqrt(L) tail, photons are stopped and recorded once their pathlength
reaches max_pathlength_mm; this keeps termination guaranteed while
conserving total weight exactly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy.special import j0

from .errors import InvalidConfigError

# Shortest resolved pathlength; the first histogram bin spans [0, PATH_FLOOR_MM).
PATH_FLOOR_MM = 0.01


@dataclass(frozen=True)
class TransportConfig:
    """Settings for one white Monte Carlo run.

    photon_count        launched photons, >= 1000
    anisotropy_g        Henyey-Greenstein g, in (-1, 1)
    n_medium/n_ambient  refractive indices (mismatch -> Fresnel boundary)
    radial_bin_width    exit-radius bin width in mm (at musp' = 1)
    radial_extent       outer edge of the finite radial bins, mm, >= 100
    rng_seed            base seed; combined with the stream index
    roulette_threshold  weight below which Russian roulette triggers
    roulette_survival   survival probability (weight divided by it on survive)
    n_streams           logical RNG streams; fixes results across thread counts
    max_pathlength_mm   hard stop for the random walk; survivors are
                        recorded at their current radius with this length
    path_bins           pathlength bins (log-spaced above PATH_FLOOR_MM)
    """

    photon_count: int = 10_000_000
    anisotropy_g: float = 0.9
    n_medium: float = 1.4
    n_ambient: float = 1.0
    radial_bin_width: float = 0.05
    radial_extent: float = 200.0
    rng_seed: int = 12345
    roulette_threshold: float = 1e-4
    roulette_survival: float = 0.1
    n_streams: int = 16
    max_pathlength_mm: float = 1000.0
    path_bins: int = 512

    def __post_init__(self):
        if self.photon_count < 1000:
            raise InvalidConfigError(f"photon_count must be >= 1000, got {self.photon_count}")
        if not (-1.0 < self.anisotropy_g < 1.0):
            raise InvalidConfigError(f"anisotropy_g must be in (-1, 1), got {self.anisotropy_g}")
        if self.n_medium <= 0.0 or self.n_ambient <= 0.0:
            raise InvalidConfigError("refractive indices must be positive")
        if self.n_medium < self.n_ambient:
            raise InvalidConfigError("n_medium below n_ambient is not supported")
        if self.radial_bin_width <= 0.0:
            raise InvalidConfigError("radial_bin_width must be positive")
        if self.radial_extent < 100.0:
            raise InvalidConfigError("radial_extent must be >= 100 mm")
        if not (0.0 < self.roulette_threshold < 1.0):
            raise InvalidConfigError("roulette_threshold must be in (0, 1)")
        if not (0.0 < self.roulette_survival < 1.0):
            raise InvalidConfigError("roulette_survival must be in (0, 1)")
        if self.n_streams < 1:
            raise InvalidConfigError("n_streams must be >= 1")
        if self.max_pathlength_mm <= 10.0 * PATH_FLOOR_MM:
            raise InvalidConfigError("max_pathlength_mm too small")
        if self.path_bins < 8:
            raise InvalidConfigError("path_bins must be >= 8")

    @property
    def n_radial_bins(self) -> int:
        return int(round(self.radial_extent / self.radial_bin_width))


@dataclass(frozen=True)
class RadialReflectance:
    """Escaping-photon weight over (exit radius, pathlength) bins.

    weight has shape (nr + 1, nl): nr finite radial rings plus one
    overflow row for exits beyond bin_edges[-1].  Entries are fractions
    of launched photons, so summing everything gives total diffuse
    reflectance.  bin_edges has length nr + 1 (finite edges only).

    A freshly simulated profile is "white" (mua = 0, musp = 1, all
    lengths in reference units); :func:`rescale_absorption` converts it
    to a physical (mua, musp) pair and collapses the pathlength axis.
    """

    bin_edges: np.ndarray
    path_edges: np.ndarray
    weight: np.ndarray
    photon_count: int
    mua: float
    musp: float
    anisotropy_g: float
    n_medium: float
    n_ambient: float
    rng_seed: int

    def __post_init__(self):
        for name in ("bin_edges", "path_edges", "weight"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        nr = self.bin_edges.size - 1
        nl = self.path_edges.size - 1
        if self.weight.shape != (nr + 1, nl):
            raise InvalidConfigError(
                f"weight shape {self.weight.shape} inconsistent with "
                f"{nr} radial and {nl} path bins"
            )

    @property
    def total_weight(self) -> float:
        """Total escaped weight per launched photon (diffuse reflectance)."""
        return float(self.weight.sum())

    @property
    def radial_weight(self) -> np.ndarray:
        """Weight per radial bin (finite rings then overflow), path-summed."""
        return self.weight.sum(axis=1)

    @property
    def rd_per_area(self) -> np.ndarray:
        """Reflectance per unit area (mm^-2) in each finite ring."""
        ring_area = np.pi * np.diff(self.bin_edges**2)
        return self.radial_weight[:-1] / ring_area

    @property
    def radial_midpoints(self) -> np.ndarray:
        """Representative radius per row: ring midpoints, then the outer
        edge for the overflow row (its weight is tiny by construction)."""
        mids = 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])
        return np.append(mids, self.bin_edges[-1])

    @property
    def path_midpoints(self) -> np.ndarray:
        return 0.5 * (self.path_edges[:-1] + self.path_edges[1:])


# -- xoshiro256++ with splitmix64 seeding, all in wrapping uint64 ------------

_U64 = np.uint64
_SM_GAMMA = _U64(0x9E3779B97F4A7C15)
_SM_MUL1 = _U64(0xBF58476D1CE4E5B9)
_SM_MUL2 = _U64(0x94D049BB133111EB)
_TO_DOUBLE = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True, inline="always")
def _splitmix64(state):
    state = state + _SM_GAMMA
    z = state
    z = (z ^ (z >> _U64(30))) * _SM_MUL1
    z = (z ^ (z >> _U64(27))) * _SM_MUL2
    z = z ^ (z >> _U64(31))
    return z, state


@njit(cache=True, inline="always")
def _rotl(x, k, nk):
    return (x << k) | (x >> nk)


@njit(cache=True, inline="always")
def _rng_next(s0, s1, s2, s3):
    """One xoshiro256++ step; returns a double in [0, 1) and the new state."""
    result = _rotl(s0 + s3, _U64(23), _U64(41)) + s0
    t = s1 << _U64(17)
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = _rotl(s3, _U64(45), _U64(19))
    return float(result >> _U64(11)) * _TO_DOUBLE, s0, s1, s2, s3


@njit(cache=True, inline="always")
def _fresnel_reflectance(cos_i, n_med, n_amb):
    """Unpolarised Fresnel reflectance for a photon inside the medium
    hitting the surface with incidence cosine cos_i."""
    n_rel = n_med / n_amb
    sin2_t = n_rel * n_rel * (1.0 - cos_i * cos_i)
    if sin2_t >= 1.0:
        return 1.0
    cos_t = np.sqrt(1.0 - sin2_t)
    rs = (n_med * cos_i - n_amb * cos_t) / (n_med * cos_i + n_amb * cos_t)
    rp = (n_amb * cos_i - n_med * cos_t) / (n_amb * cos_i + n_med * cos_t)
    return 0.5 * (rs * rs + rp * rp)


@njit(cache=True, nogil=True)
def _transport_stream(
    seed,
    stream_idx,
    n_photons,
    mus,
    g,
    n_med,
    n_amb,
    dr,
    nr,
    log_l_lo,
    inv_dlog,
    nl,
    l_max,
    w_threshold,
    w_survival,
    hist,
):
    """Trace one stream's photon share into hist (shape (nr + 1, nl)).

    Pure function of (seed, stream_idx, n_photons) plus physics settings;
    scheduling does not enter, which is what makes thread counts
    irrelevant to the result.
    """
    # Decorrelate streams: splitmix64 seeded from base seed and stream index.
    sm = _U64(seed) ^ (_U64(stream_idx + 1) * _SM_GAMMA)
    s0, sm = _splitmix64(sm)
    s1, sm = _splitmix64(sm)
    s2, sm = _splitmix64(sm)
    s3, sm = _splitmix64(sm)
    if s0 | s1 | s2 | s3 == _U64(0):
        s0 = _U64(1)

    matched = abs(n_med - n_amb) < 1e-12
    inv_mus = 1.0 / mus
    l_floor = PATH_FLOOR_MM

    for _ in range(n_photons):
        x = 0.0
        y = 0.0
        z = 0.0
        ux = 0.0
        uy = 0.0
        uz = 1.0
        w = 1.0
        path = 0.0
        alive = True
        while alive:
            u, s0, s1, s2, s3 = _rng_next(s0, s1, s2, s3)
            step = -np.log(1.0 - u) * inv_mus
            z_new = z + uz * step

            if z_new < 0.0:
                # Surface hit: walk to the boundary, then escape or reflect.
                s_b = -z / uz
                x += ux * s_b
                y += uy * s_b
                z = 0.0
                path += s_b
                escape = True
                if path < l_max and not matched:
                    refl = _fresnel_reflectance(-uz, n_med, n_amb)
                    u, s0, s1, s2, s3 = _rng_next(s0, s1, s2, s3)
                    if u < refl:
                        escape = False
                if escape:
                    if path > l_max:
                        path = l_max
                    rho = np.sqrt(x * x + y * y)
                    ir = int(rho / dr)
                    if ir > nr:
                        ir = nr
                    if path <= l_floor:
                        il = 0
                    else:
                        il = 1 + int((np.log(path) - log_l_lo) * inv_dlog)
                        if il >= nl:
                            il = nl - 1
                    hist[ir, il] += w
                    alive = False
                else:
                    uz = -uz
                continue

            x += ux * step
            y += uy * step
            z = z_new
            path += step
            if path >= l_max:
                # Heavy-tail stop: record the survivor where it stands.
                rho = np.sqrt(x * x + y * y)
                ir = int(rho / dr)
                if ir > nr:
                    ir = nr
                hist[ir, nl - 1] += w
                alive = False
                continue

            # Henyey-Greenstein deflection plus uniform azimuth.
            u, s0, s1, s2, s3 = _rng_next(s0, s1, s2, s3)
            if g != 0.0:
                tmp = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
                ct = (1.0 + g * g - tmp * tmp) / (2.0 * g)
            else:
                ct = 1.0 - 2.0 * u
            if ct > 1.0:
                ct = 1.0
            elif ct < -1.0:
                ct = -1.0
            st = np.sqrt(1.0 - ct * ct)
            u, s0, s1, s2, s3 = _rng_next(s0, s1, s2, s3)
            phi = 2.0 * np.pi * u
            cp = np.cos(phi)
            sp = np.sin(phi)
            if uz > 0.99999 or uz < -0.99999:
                ux = st * cp
                uy = st * sp
                uz = ct if uz > 0.0 else -ct
            else:
                den = np.sqrt(1.0 - uz * uz)
                ux_new = st * (ux * uz * cp - uy * sp) / den + ux * ct
                uy_new = st * (uy * uz * cp + ux * sp) / den + uy * ct
                uz_new = -den * st * cp + uz * ct
                ux = ux_new
                uy = uy_new
                uz = uz_new

            if w < w_threshold:
                u, s0, s1, s2, s3 = _rng_next(s0, s1, s2, s3)
                if u < w_survival:
                    w /= w_survival
                else:
                    alive = False  # absorbed; nothing recorded


def _path_edges(cfg: TransportConfig) -> np.ndarray:
    """Pathlength bin edges: [0, floor, ... log-spaced ... max]."""
    log_edges = np.geomspace(PATH_FLOOR_MM, cfg.max_pathlength_mm, cfg.path_bins)
    return np.concatenate(([0.0], log_edges))


def simulate_white_mc(cfg: TransportConfig, threads: int = 1) -> RadialReflectance:
    """Run the zero-absorption reference simulation.

    threads only controls how many streams execute concurrently; the
    histogram is identical for any value because streams are merged in
    stream order.
    """
    if threads < 1:
        raise InvalidConfigError(f"threads must be >= 1, got {threads}")
    nr = cfg.n_radial_bins
    nl = cfg.path_bins
    mus = 1.0 / (1.0 - cfg.anisotropy_g)  # musp' = 1 reference medium
    log_l_lo = np.log(PATH_FLOOR_MM)
    # nl - 1 log-spaced edges above the floor bin.
    inv_dlog = (nl - 1) / (np.log(cfg.max_pathlength_mm) - log_l_lo)

    base = cfg.photon_count // cfg.n_streams
    extra = cfg.photon_count % cfg.n_streams
    shares = [base + (1 if i < extra else 0) for i in range(cfg.n_streams)]

    def run_stream(idx: int) -> np.ndarray:
        hist = np.zeros((nr + 1, nl), dtype=np.float64)
        _transport_stream(
            cfg.rng_seed,
            idx,
            shares[idx],
            mus,
            cfg.anisotropy_g,
            cfg.n_medium,
            cfg.n_ambient,
            cfg.radial_bin_width,
            nr,
            log_l_lo,
            inv_dlog,
            nl,
            cfg.max_pathlength_mm,
            cfg.roulette_threshold,
            cfg.roulette_survival,
            hist,
        )
        return hist

    if threads == 1:
        parts = [run_stream(i) for i in range(cfg.n_streams)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_stream, range(cfg.n_streams)))

    weight = np.stack(parts).sum(axis=0) / float(cfg.photon_count)
    edges = np.arange(nr + 1, dtype=np.float64) * cfg.radial_bin_width
    return RadialReflectance(
        bin_edges=edges,
        path_edges=_path_edges(cfg),
        weight=weight,
        photon_count=cfg.photon_count,
        mua=0.0,
        musp=1.0,
        anisotropy_g=cfg.anisotropy_g,
        n_medium=cfg.n_medium,
        n_ambient=cfg.n_ambient,
        rng_seed=cfg.rng_seed,
    )


def rescale_absorption(rr: RadialReflectance, mua: float, musp: float) -> RadialReflectance:
    """Map a white profile to a physical (mua, musp) pair.

    Each (radius, pathlength) cell is reweighted by
    exp(-mua * L / musp) and all lengths are divided by musp.  The
    pathlength axis is collapsed afterwards since the absorption is now
    baked in.
    """
    if rr.mua != 0.0 or rr.musp != 1.0:
        raise InvalidConfigError("rescale_absorption needs a white (mua=0, musp=1) profile")
    if mua < 0.0:
        raise InvalidConfigError(f"mua must be >= 0, got {mua}")
    if musp <= 0.0:
        raise InvalidConfigError(f"musp must be positive, got {musp}")
    decay = np.exp(-(mua / musp) * rr.path_midpoints)
    collapsed = (rr.weight @ decay)[:, np.newaxis]
    return replace(
        rr,
        bin_edges=rr.bin_edges / musp,
        path_edges=np.array([0.0, rr.path_edges[-1] / musp]),
        weight=collapsed,
        mua=mua,
        musp=musp,
    )


def radial_to_frequency(rr: RadialReflectance, fx: float) -> float:
    """Project a radial profile onto one spatial frequency (cycles/mm).

    Evaluates sum_r w_r * J0(2 pi fx rho_r) over representative radii,
    i.e. the zero-order Hankel transform of the point-spread reflectance
    sampled at the bin level.  At fx = 0 this reduces to total weight.
    """
    if fx < 0.0:
        raise InvalidConfigError(f"fx must be >= 0, got {fx}")
    return float(np.sum(rr.radial_weight * j0(2.0 * np.pi * fx * rr.radial_midpoints)))
