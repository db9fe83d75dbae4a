"""System configuration, unit conversion, geometry sampling and RNG streams.

All powers are kept in linear milliwatt internally; dB/dBm appear only at
the configuration and reporting boundary. Angles are radians.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration value or malformed configuration file."""


def from_decibels(value_db: float, kind: str = "power-ratio") -> float:
    """Convert a dB (dimensionless ratio) or dBm (-> mW) value to linear scale."""
    if kind not in ("power-ratio", "dbm"):
        raise ConfigError(f"unknown dB kind {kind!r}")
    if not math.isfinite(value_db):
        raise ConfigError(f"non-finite dB value: {value_db!r}")
    return 10.0 ** (value_db / 10.0)


def to_decibels(value_linear: float) -> float:
    if value_linear <= 0:
        raise ConfigError(f"cannot take dB of non-positive value {value_linear!r}")
    return 10.0 * math.log10(value_linear)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario parameters of one cell.

    Powers and noise variances are linear mW; gain-over-noise figures and the
    SCNR threshold stay in dB (they are thresholds/ratios, converted where
    consumed); angles in radians, distances in meters.
    """

    n_tx: int = 8
    n_rx: int = 8
    n_cue: int = 3
    n_d2d: int = 2
    n_clutter: int = 2
    bs_power_budget: float = 1000.0        # mW
    d2d_power_budget: float = 10.0         # mW per pair
    comm_noise: float = 1e-7               # mW
    radar_noise: float = 1e-7              # mW
    target_angle: float = 0.0
    clutter_angles: tuple[float, ...] = (-math.pi / 6, math.pi / 6)
    target_gain_over_noise_db: float = 20.0
    clutter_gain_over_noise_db: tuple[float, ...] = (80.0, 80.0)
    scnr_threshold_db: float = 30.0
    pathloss_exponent: float = 2.0
    bs_ue_distance: float = 100.0
    d2d_pair_distance: float = 10.0
    max_iterations: int = 8
    convergence_tol: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigError("antenna counts must be >= 1")
        if self.n_cue < 1:
            raise ConfigError("need at least one cellular user")
        if self.n_d2d < 0 or self.n_clutter < 0:
            raise ConfigError("counts must be nonnegative")
        for name in ("bs_power_budget", "d2d_power_budget", "comm_noise", "radar_noise"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be strictly positive, got {v!r}")
        if len(self.clutter_angles) != self.n_clutter:
            raise ConfigError("clutter_angles length must equal n_clutter")
        if len(self.clutter_gain_over_noise_db) != self.n_clutter:
            raise ConfigError("clutter_gain_over_noise_db length must equal n_clutter")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ConfigError("convergence_tol must be positive")
        if self.bs_ue_distance <= 0 or self.d2d_pair_distance <= 0:
            raise ConfigError("distances must be positive")

    @property
    def scnr_threshold_linear(self) -> float:
        return from_decibels(self.scnr_threshold_db)

    def to_json_dict(self) -> dict:
        """Snapshot with power-like fields rendered in dBm, as in config files."""
        return {
            "n_tx": self.n_tx,
            "n_rx": self.n_rx,
            "n_cue": self.n_cue,
            "n_d2d": self.n_d2d,
            "n_clutter": self.n_clutter,
            "bs_power_budget_dbm": to_decibels(self.bs_power_budget),
            "d2d_power_budget_dbm": to_decibels(self.d2d_power_budget),
            "comm_noise_dbm": to_decibels(self.comm_noise),
            "radar_noise_dbm": to_decibels(self.radar_noise),
            "target_angle_rad": self.target_angle,
            "clutter_angles_rad": list(self.clutter_angles),
            "target_gain_over_noise_db": self.target_gain_over_noise_db,
            "clutter_gain_over_noise_db": list(self.clutter_gain_over_noise_db),
            "scnr_threshold_db": self.scnr_threshold_db,
            "pathloss_exponent": self.pathloss_exponent,
            "bs_ue_distance_m": self.bs_ue_distance,
            "d2d_pair_distance_m": self.d2d_pair_distance,
            "max_iterations": self.max_iterations,
            "convergence_tol": self.convergence_tol,
            "rng_seed": self.rng_seed,
        }


def default_config() -> SystemConfig:
    """The reference simulation setup (all SystemConfig defaults)."""
    return SystemConfig()


_JSON_KEYS = {
    "n_tx": ("n_tx", int),
    "n_rx": ("n_rx", int),
    "n_cue": ("n_cue", int),
    "n_d2d": ("n_d2d", int),
    "n_clutter": ("n_clutter", int),
    "bs_power_budget_dbm": ("bs_power_budget", "dbm"),
    "d2d_power_budget_dbm": ("d2d_power_budget", "dbm"),
    "comm_noise_dbm": ("comm_noise", "dbm"),
    "radar_noise_dbm": ("radar_noise", "dbm"),
    "target_angle_rad": ("target_angle", float),
    "clutter_angles_rad": ("clutter_angles", "float_tuple"),
    "target_gain_over_noise_db": ("target_gain_over_noise_db", float),
    "clutter_gain_over_noise_db": ("clutter_gain_over_noise_db", "float_tuple"),
    "scnr_threshold_db": ("scnr_threshold_db", float),
    "pathloss_exponent": ("pathloss_exponent", float),
    "bs_ue_distance_m": ("bs_ue_distance", float),
    "d2d_pair_distance_m": ("d2d_pair_distance", float),
    "max_iterations": ("max_iterations", int),
    "convergence_tol": ("convergence_tol", float),
    "rng_seed": ("rng_seed", int),
}


def config_from_dict(data: dict) -> SystemConfig:
    """Build a SystemConfig from a JSON-style dict (dBm-valued power fields).

    Missing keys fall back to the defaults; unknown keys are rejected.
    """
    unknown = set(data) - set(_JSON_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        field_name, conv = _JSON_KEYS[key]
        try:
            if conv == "dbm":
                kwargs[field_name] = from_decibels(float(value), kind="dbm")
            elif conv == "float_tuple":
                kwargs[field_name] = tuple(float(v) for v in value)
            else:
                kwargs[field_name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return SystemConfig(**kwargs)


def load_config(path: str) -> SystemConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    return config_from_dict(data)


@dataclass(frozen=True)
class RngStream:
    """Named, reproducible random sub-stream.

    Identical (seed, label) pairs always yield the same draw sequence, and
    distinct labels are independent, so adding a consumer never perturbs
    another consumer's draws.
    """

    seed: int
    label: str

    def generator(self) -> np.random.Generator:
        # crc32 of the label folds it into the seed material deterministically
        tag = zlib.crc32(self.label.encode("utf-8"))
        return np.random.default_rng(np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFF, tag]))


@dataclass(frozen=True)
class Geometry:
    """2-D node positions in meters; the BS sits at the origin."""

    bs_position: np.ndarray
    cue_positions: np.ndarray        # (K, 2)
    d2d_tx_positions: np.ndarray     # (D, 2)
    d2d_rx_positions: np.ndarray     # (D, 2)


def sample_geometry(cfg: SystemConfig, rng: RngStream) -> Geometry:
    """Place CUEs and D2D transmitters on the BS circle, receivers next to
    their transmitters, all at uniform random angles."""
    gen = rng.generator()
    cue_ang = gen.uniform(0.0, 2.0 * np.pi, size=cfg.n_cue)
    tx_ang = gen.uniform(0.0, 2.0 * np.pi, size=cfg.n_d2d)
    rx_ang = gen.uniform(0.0, 2.0 * np.pi, size=cfg.n_d2d)

    cue = cfg.bs_ue_distance * np.stack([np.cos(cue_ang), np.sin(cue_ang)], axis=1)
    tx = cfg.bs_ue_distance * np.stack([np.cos(tx_ang), np.sin(tx_ang)], axis=1)
    rx = tx + cfg.d2d_pair_distance * np.stack([np.cos(rx_ang), np.sin(rx_ang)], axis=1)
    return Geometry(
        bs_position=np.zeros(2),
        cue_positions=cue,
        d2d_tx_positions=tx.reshape(cfg.n_d2d, 2),
        d2d_rx_positions=rx.reshape(cfg.n_d2d, 2),
    )
