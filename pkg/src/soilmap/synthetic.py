"""Deterministic synthetic study region: covariates, observations, regions.

Everything is derived from counter-based Philox streams (algorithm id
recorded in the stack metadata), so a seed fully determines the world.
Covariates are smooth correlated random fields with physically motivated
couplings: terrain derivatives come from one elevation surface, climate is
generated on a coarse grid and bilinearly upsampled, and the nine
satellite channels mix vegetation/moisture/terrain latents with
band-specific texture.

Label rules are plain affine scores over named channels with all
constants kept on :class:`SyntheticConfig`, so tests can recompute any
label from the finished band values. Presence/absence uses a three
channel score (min January temperature, wetness index, elevation) plus a
bounded smooth noise field; the threshold is the score quantile at the
sampled points that yields the configured presence rate. Soil order uses
a wetness/elevation decision table, with the same presence score carving
out the permafrost-affected order.

Observations are sampled in clumps, like real field campaigns, which is
what gives spatial cross-validation schemes something to hold out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geo import GeoTransform
from .observations import SOIL_ORDERS, FieldObservation, RegionPartition
from .raster import COVARIATE, SATELLITE, CovariateStack, stack_from_bands, upsample_band

RNG_ALGORITHM = "philox4x64"

# Stream ids for independent Philox streams derived from one seed.
_STREAM_FIELDS = 1
_STREAM_POINTS = 2
_STREAM_LABELS = 3
_STREAM_REGIONS = 4

SATELLITE_BAND_NAMES = (
    "sat_blue", "sat_green", "sat_red", "sat_re1", "sat_re2",
    "sat_re3", "sat_nir", "sat_swir1", "sat_swir2",
)
TERRAIN_BAND_NAMES = (
    "elevation", "aspect", "max_curvature", "slope", "spi", "tpi", "swi",
)
CLIMATE_BAND_NAMES = ("precip", "summer_warmth", "min_jan_temp")

# Mixing of (veg, moist, elev_n, texture, offset) into each satellite band.
_SAT_MIX = (
    (-0.35, 0.25, 0.10, 0.30, 0.12),
    (-0.45, 0.20, 0.10, 0.30, 0.15),
    (-0.55, 0.10, 0.15, 0.30, 0.18),
    (0.35, -0.10, 0.10, 0.25, 0.25),
    (0.55, -0.10, 0.05, 0.25, 0.28),
    (0.65, -0.15, 0.05, 0.25, 0.30),
    (0.80, -0.25, 0.00, 0.25, 0.35),
    (-0.20, -0.55, 0.20, 0.30, 0.25),
    (-0.15, -0.65, 0.25, 0.30, 0.22),
)


@dataclass(frozen=True)
class SyntheticConfig:
    """Every constant of the generator, in one auditable block."""

    seed: int = 0
    width: int = 1024
    height: int = 1024
    pixel_size: float = 40.0
    n_points: int = 3000

    # field correlation lengths, meters
    elev_corr: float = 8000.0
    wet_corr: float = 2500.0
    veg_corr: float = 1200.0
    moist_corr: float = 900.0
    texture_corr: float = 250.0
    climate_corr: float = 6000.0
    climate_res: float = 800.0

    # observation clumping
    clump_rate: float = 1.0 / 40.0      # clumps per point
    clump_sigma: float = 150.0          # meters
    clump_min_sep: float = 2500.0       # meters between clump centers
    background_frac: float = 0.08       # uniform points outside clumps
    edge_inset: float = 1500.0          # keep points off the raster edge

    # presence/absence rule: score over three named channels
    score_channels: tuple = ("min_jan_temp", "swi", "elevation")
    w_cold: float = 0.45
    w_wet: float = 0.35
    w_elev: float = 0.30
    cold_norm: tuple = (-10.0, 30.0)    # coldness = (-(minjan) + lo) / scale
    wet_norm: tuple = (2.0, 6.0)        # wetness = (swi - lo) / scale
    elev_norm: tuple = (0.0, 1200.0)    # elev_n = (elevation - lo) / scale
    presence_rate: float = 0.23
    noise_amp: float = 0.05             # bounded label noise, score units
    noise_corr: float = 1000.0          # meters

    # soil-order decision table over (wetness, elev_n) + presence score
    gelisols_margin: float = 0.04       # score > tau + margin -> Gelisols
    andisols_elev: float = 0.78
    histosols_wet: float = 0.78
    entisols_elev: float = 0.30
    entisols_wet: float = 0.40
    mollisols_wet: float = 0.05
    mollisols_elev: tuple = (0.25, 0.55)
    inceptisols_elev: float = 0.45
    tax_noise_amp: float = 0.04

    # label completeness
    nsp_drop: float = 0.05
    tax_drop: float = 0.05

    n_regions: int = 8

    def validate(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("degenerate raster dimensions (need >= 32 px)")
        if self.n_points < 50:
            raise ValueError("n_points must be >= 50")
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be positive")


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed, stream_id)))


def _smooth_field(rng, height, width, pixel_size, corr_len):
    """Zero-mean unit-variance field with a Gaussian spectrum."""
    white = rng.standard_normal((height, width))
    fy = np.fft.fftfreq(height, d=pixel_size)
    fx = np.fft.fftfreq(width, d=pixel_size)
    k2 = fy[:, None] ** 2 + fx[None, :] ** 2
    spec = np.fft.fft2(white) * np.exp(-0.25 * k2 * corr_len ** 2)
    out = np.real(np.fft.ifft2(spec))
    std = out.std()
    if std < 1e-12:
        return np.zeros_like(out)
    return (out - out.mean()) / std


def _terrain_bands(cfg: SyntheticConfig, rng):
    h, w, px = cfg.height, cfg.width, cfg.pixel_size
    elev_base = _smooth_field(rng, h, w, px, cfg.elev_corr)
    ridges = _smooth_field(rng, h, w, px, cfg.elev_corr / 4)
    elevation = 600.0 + 420.0 * elev_base + 90.0 * ridges

    dzdy, dzdx = np.gradient(elevation, px)
    slope = np.degrees(np.arctan(np.hypot(dzdx, dzdy)))
    aspect = np.degrees(np.arctan2(-dzdx, dzdy)) % 360.0
    d2y = np.gradient(dzdy, px, axis=0)
    d2x = np.gradient(dzdx, px, axis=1)
    max_curvature = 1000.0 * np.maximum(np.abs(d2x), np.abs(d2y))

    # mean over a 5x5 neighborhood via separable box filter
    kernel = np.ones(5) / 5.0
    local = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="same"), 1, elevation)
    local = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="same"), 0, local)
    tpi = elevation - local

    lowness = -elev_base
    wet_extra = _smooth_field(rng, h, w, px, cfg.wet_corr)
    slope_n = slope / (slope.std() + 1e-9)
    swi = 4.0 + 1.6 * (0.7 * lowness + 0.5 * wet_extra - 0.4 * slope_n)
    accum = np.exp(1.2 * (0.6 * lowness + 0.4 * wet_extra))
    spi = np.log1p(accum * np.tan(np.radians(np.clip(slope, 0, 60))))

    bands = {
        "elevation": elevation, "aspect": aspect, "max_curvature": max_curvature,
        "slope": slope, "spi": spi, "tpi": tpi, "swi": swi,
    }
    latents = {"elev_base": elev_base, "lowness": lowness, "wet_extra": wet_extra}
    return bands, latents


def _climate_bands(cfg: SyntheticConfig, rng, elevation):
    """Generate at climate_res then bilinearly upsample to the grid."""
    h, w, px = cfg.height, cfg.width, cfg.pixel_size
    scale = cfg.climate_res / px
    hc = max(4, math.ceil(h / scale))
    wc = max(4, math.ceil(w / scale))

    block = max(1, int(round(scale)))
    pad_h, pad_w = hc * block, wc * block
    elev_pad = np.pad(elevation, ((0, pad_h - h), (0, pad_w - w)), mode="edge")
    elev_c = elev_pad.reshape(hc, block, wc, block).mean(axis=(1, 3))

    northness = 1.0 - np.arange(hc, dtype=np.float64)[:, None] / max(hc - 1, 1)
    northness = np.broadcast_to(northness, (hc, wc))
    f1 = _smooth_field(rng, hc, wc, cfg.climate_res, cfg.climate_corr)
    f2 = _smooth_field(rng, hc, wc, cfg.climate_res, cfg.climate_corr)
    f3 = _smooth_field(rng, hc, wc, cfg.climate_res, cfg.climate_corr)

    coarse = {
        "precip": 900.0 + 280.0 * f1 + 0.15 * (elev_c - 600.0),
        "summer_warmth": 42.0 - 14.0 * northness - 0.012 * elev_c + 4.0 * f2,
        "min_jan_temp": -10.0 - 16.0 * northness - 0.009 * elev_c + 3.0 * f3,
    }
    out = {}
    for name, grid in coarse.items():
        up = upsample_band(grid, cfg.climate_res, px)
        out[name] = up[:h, :w]
    return out


def _satellite_bands(cfg: SyntheticConfig, rng, latents):
    h, w, px = cfg.height, cfg.width, cfg.pixel_size
    veg = 0.6 * _smooth_field(rng, h, w, px, cfg.veg_corr) - 0.4 * latents["elev_base"]
    moist = 0.5 * (0.7 * latents["lowness"] + 0.5 * latents["wet_extra"]) \
        + 0.5 * _smooth_field(rng, h, w, px, cfg.moist_corr)
    textures = [_smooth_field(rng, h, w, px, cfg.texture_corr) for _ in range(3)]
    elev_n = (latents["elev_base"] - latents["elev_base"].min())
    elev_n /= max(elev_n.max(), 1e-9)

    out = {}
    n = min(len(SATELLITE_BAND_NAMES), 9)
    for k in range(n):
        a, b, c, d, off = _SAT_MIX[k]
        out[SATELLITE_BAND_NAMES[k]] = (
            a * veg + b * moist + c * elev_n + d * textures[k % 3] + off
        )
    return out


# ---------------------------------------------------------------------------
# Label rules (recomputable from the finished bands)


def presence_score(cfg: SyntheticConfig, min_jan_temp, swi, elevation):
    """The documented three-channel score; higher means more permafrost-prone."""
    cold = (-(np.asarray(min_jan_temp, dtype=np.float64)) + cfg.cold_norm[0]) / cfg.cold_norm[1]
    wet = (np.asarray(swi, dtype=np.float64) - cfg.wet_norm[0]) / cfg.wet_norm[1]
    elev = (np.asarray(elevation, dtype=np.float64) - cfg.elev_norm[0]) / cfg.elev_norm[1]
    return cfg.w_cold * cold + cfg.w_wet * wet + cfg.w_elev * elev


def presence_score_at(stack: CovariateStack, cfg: SyntheticConfig, xs, ys):
    """Recompute the noise-free presence score at point locations."""
    cols, rows = _pixel_of(stack, xs, ys)
    chans = [stack.data[stack.band_index(c)][rows, cols] for c in cfg.score_channels]
    return presence_score(cfg, *chans)


def wet_elev_at(stack: CovariateStack, cfg: SyntheticConfig, xs, ys):
    cols, rows = _pixel_of(stack, xs, ys)
    swi = stack.data[stack.band_index("swi")][rows, cols]
    elev = stack.data[stack.band_index("elevation")][rows, cols]
    wet = (np.asarray(swi, dtype=np.float64) - cfg.wet_norm[0]) / cfg.wet_norm[1]
    elev_n = (np.asarray(elev, dtype=np.float64) - cfg.elev_norm[0]) / cfg.elev_norm[1]
    return wet, elev_n


def soil_order_labels(cfg: SyntheticConfig, wet, elev_n, score, tau):
    """Decision table mapping (wetness, elevation, presence score) to orders."""
    wet = np.asarray(wet, dtype=np.float64)
    elev_n = np.asarray(elev_n, dtype=np.float64)
    score = np.asarray(score, dtype=np.float64)
    lab = np.full(wet.shape, SOIL_ORDERS.index("Spodosols"), dtype=np.int64)
    lab[elev_n > cfg.inceptisols_elev] = SOIL_ORDERS.index("Inceptisols")
    moll = (wet < cfg.mollisols_wet) & (elev_n > cfg.mollisols_elev[0]) & (elev_n < cfg.mollisols_elev[1])
    lab[moll] = SOIL_ORDERS.index("Mollisols")
    ent = (elev_n < cfg.entisols_elev) & (wet > cfg.entisols_wet)
    lab[ent] = SOIL_ORDERS.index("Entisols")
    lab[wet > cfg.histosols_wet] = SOIL_ORDERS.index("Histosols")
    lab[elev_n > cfg.andisols_elev] = SOIL_ORDERS.index("Andisols")
    lab[score > tau + cfg.gelisols_margin] = SOIL_ORDERS.index("Gelisols")
    return lab


def _pixel_of(stack: CovariateStack, xs, ys):
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_1d(np.asarray(ys, dtype=np.float64))
    t = stack.transform
    cols = np.clip(np.floor((xs - t.origin_x) / t.pixel_w).astype(int), 0, stack.width - 1)
    rows = np.clip(np.floor((ys - t.origin_y) / t.pixel_h).astype(int), 0, stack.height - 1)
    return cols, rows


# ---------------------------------------------------------------------------
# Point sampling


def _sample_clump_centers(cfg: SyntheticConfig, rng, n_clumps, bounds):
    xmin, ymin, xmax, ymax = bounds
    centers = []
    attempts = 0
    max_attempts = 200 * n_clumps
    while len(centers) < n_clumps and attempts < max_attempts:
        attempts += 1
        cand = (rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))
        ok = all((cand[0] - cx) ** 2 + (cand[1] - cy) ** 2 >= cfg.clump_min_sep ** 2
                 for cx, cy in centers)
        if ok:
            centers.append(cand)
    if len(centers) < n_clumps:
        # world too small for the requested separation; fall back to uniform
        while len(centers) < n_clumps:
            centers.append((rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)))
    return np.array(centers)


def _sample_points(cfg: SyntheticConfig, rng, transform: GeoTransform):
    xmin, ymin, xmax, ymax = transform.bounds(cfg.width, cfg.height)
    inset = min(cfg.edge_inset, 0.25 * (xmax - xmin), 0.25 * (ymax - ymin))
    bounds = (xmin + inset, ymin + inset, xmax - inset, ymax - inset)
    n_clumps = max(5, int(round(cfg.n_points * cfg.clump_rate)))
    centers = _sample_clump_centers(cfg, rng, n_clumps, bounds)

    n_bg = int(round(cfg.n_points * cfg.background_frac))
    n_clumped = cfg.n_points - n_bg
    which = rng.integers(0, n_clumps, size=n_clumped)
    offsets = rng.normal(0.0, cfg.clump_sigma, size=(n_clumped, 2))
    pts = centers[which] + offsets
    bg = np.column_stack([
        rng.uniform(bounds[0], bounds[2], size=n_bg),
        rng.uniform(bounds[1], bounds[3], size=n_bg),
    ])
    pts = np.vstack([pts, bg])
    pts[:, 0] = np.clip(pts[:, 0], bounds[0], bounds[2])
    pts[:, 1] = np.clip(pts[:, 1], bounds[1], bounds[3])
    return pts


# ---------------------------------------------------------------------------
# Entry point


def generate_synthetic_world(seed: int, width: int, height: int, n_points: int,
                             **overrides):
    """Build (CovariateStack, [FieldObservation], RegionPartition).

    Deterministic in ``seed``; keyword overrides map onto
    :class:`SyntheticConfig` fields for non-default worlds (larger
    extents, noise-free labels, different clumping).
    """
    cfg = SyntheticConfig(seed=seed, width=width, height=height,
                          n_points=n_points, **overrides)
    cfg.validate()
    transform = GeoTransform(origin_x=0.0, origin_y=height * cfg.pixel_size,
                             pixel_w=cfg.pixel_size, pixel_h=-cfg.pixel_size)

    f_rng = _stream(seed, _STREAM_FIELDS)
    terrain, latents = _terrain_bands(cfg, f_rng)
    climate = _climate_bands(cfg, f_rng, terrain["elevation"])
    satellite = _satellite_bands(cfg, f_rng, latents)
    noise_field = np.tanh(_smooth_field(f_rng, height, width, cfg.pixel_size, cfg.noise_corr))

    bands = [(name, SATELLITE, satellite[name]) for name in satellite]
    bands += [(name, COVARIATE, terrain[name]) for name in TERRAIN_BAND_NAMES]
    bands += [(name, COVARIATE, climate[name]) for name in CLIMATE_BAND_NAMES]
    stack = stack_from_bands(bands, transform)

    pts = _sample_points(cfg, _stream(seed, _STREAM_POINTS), transform)
    cols, rows = _pixel_of(stack, pts[:, 0], pts[:, 1])
    score = presence_score_at(stack, cfg, pts[:, 0], pts[:, 1])
    eta = cfg.noise_amp * noise_field[rows, cols]
    noisy = score + eta
    tau = float(np.quantile(noisy, 1.0 - cfg.presence_rate))
    nsp = (noisy > tau).astype(int)

    wet, elev_n = wet_elev_at(stack, cfg, pts[:, 0], pts[:, 1])
    tax_eta = cfg.tax_noise_amp * noise_field[rows, cols]
    tax = soil_order_labels(cfg, wet + tax_eta, elev_n + tax_eta, noisy, tau)

    l_rng = _stream(seed, _STREAM_LABELS)
    drop_nsp = l_rng.random(cfg.n_points) < cfg.nsp_drop
    drop_tax = l_rng.random(cfg.n_points) < cfg.tax_drop
    drop_tax &= ~drop_nsp  # never drop both
    day_offsets = l_rng.integers(0, 26 * 365, size=cfg.n_points)

    base = np.datetime64("1998-01-01")
    observations = []
    for i in range(cfg.n_points):
        observations.append(FieldObservation(
            x=float(pts[i, 0]),
            y=float(pts[i, 1]),
            nsp_label=None if drop_nsp[i] else int(nsp[i]),
            tax_label=None if drop_tax[i] else int(tax[i]),
            date=str(base + np.timedelta64(int(day_offsets[i]), "D")),
            source="synthetic-survey",
        ))

    r_rng = _stream(seed, _STREAM_REGIONS)
    partition = _voronoi_partition(cfg, r_rng, transform)

    stack.meta.update({
        "rng_algorithm": RNG_ALGORITHM,
        "seed": str(seed),
        "presence_threshold": repr(tau),
        "presence_rate": repr(cfg.presence_rate),
        "noise_amp": repr(cfg.noise_amp),
        "score_channels": ",".join(cfg.score_channels),
        "score_weights": f"{cfg.w_cold!r},{cfg.w_wet!r},{cfg.w_elev!r}",
    })
    return stack, observations, partition


def _voronoi_partition(cfg: SyntheticConfig, rng, transform: GeoTransform):
    xmin, ymin, xmax, ymax = transform.bounds(cfg.width, cfg.height)
    centers = np.column_stack([
        rng.uniform(xmin, xmax, size=cfg.n_regions),
        rng.uniform(ymin, ymax, size=cfg.n_regions),
    ])
    cx = transform.origin_x + (np.arange(cfg.width) + 0.5) * transform.pixel_w
    cy = transform.origin_y + (np.arange(cfg.height) + 0.5) * transform.pixel_h
    d2 = ((cx[None, :, None] - centers[None, None, :, 0]) ** 2
          + (cy[:, None, None] - centers[None, None, :, 1]) ** 2)
    labels = np.argmin(d2, axis=2).astype(np.int32)
    names = {i: f"region_{i}" for i in range(cfg.n_regions)}
    return RegionPartition("synthetic_regions", labels, transform, names)
