"""Network configuration and unit-bearing JSON ingestion.

All fields of :class:`NetworkConfig` are SI: meters, seconds, hertz, watts,
densities per square meter and linear power ratios. The JSON layer carries
the unit in every key name and converts on the way in and out.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

__all__ = [
    "ConfigError",
    "NetworkConfig",
    "QuadratureSettings",
    "db_to_lin",
    "lin_to_db",
    "dbm_to_watt",
    "watt_to_dbm",
    "config_from_mapping",
    "config_to_mapping",
    "load_config",
    "CONFIG_KEYS",
]

SPEED_OF_LIGHT = 3.0e8


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    if x <= 0:
        return -math.inf
    return 10.0 * math.log10(x)


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


@dataclass(frozen=True)
class QuadratureSettings:
    """Grid sizes for the conditional (d, phi') expectations.

    Attributes
    ----------
    n_d : int
        Midpoint cells along the distance axis.
    n_phi : int
        Midpoint samples per angular arc.
    refine : bool
        Compare against the half-resolution grid and double once when the
        two differ by more than ``refine_tol``.
    refine_tol : float
        Absolute tolerance for the refinement test.
    tail_mass : float
        Mass discarded from the no-serving distance tail.
    """

    n_d: int = 256
    n_phi: int = 512
    refine: bool = True
    refine_tol: float = 5e-4
    tail_mass: float = 1e-6


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and protocol parameters of one analysis run (SI units).

    ``r_o``, ``r_t`` and ``L`` default to the density-derived values when
    left as ``None``.
    """

    lambda_b: float = 10e-6
    lambda_r: float = 1000e-6
    P_t: float = 10.0
    f_c: float = 3e9
    c: float = SPEED_OF_LIGHT
    alpha: float = 4.0
    D: float = 50.0
    N: int = 100
    v: float = 20.0
    T_d: float = 0.010
    gamma_ho: float = 1.0
    T_t: float = 0.480
    T_p: float = 1.0
    Q_out: float = db_to_lin(-8.0)
    r_o: float | None = None
    r_t: float | None = None
    L: float | None = None
    quad: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            ("lambda_b", self.lambda_b > 0, "must be > 0"),
            ("lambda_r", self.lambda_r >= 0, "must be >= 0"),
            ("P_t", self.P_t > 0, "must be > 0"),
            ("f_c", self.f_c > 0, "must be > 0"),
            ("alpha", self.alpha > 2, "must be > 2"),
            ("D", self.D > 0, "must be > 0"),
            ("N", self.N >= 0 and int(self.N) == self.N, "must be a non-negative integer"),
            ("v", self.v > 0, "must be > 0"),
            ("T_d", self.T_d > 0, "must be > 0"),
            ("gamma_ho", self.gamma_ho > 0, "must be a positive linear ratio"),
            ("T_t", self.T_t >= 0, "must be >= 0"),
            ("T_p", self.T_p > self.T_t, "must exceed T_t"),
            ("Q_out", self.Q_out > 0, "must be a positive linear ratio"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(name, msg)
        if self.L is not None and self.L <= 0:
            raise ConfigError("L", "must be > 0")

    @property
    def delta_x(self) -> float:
        return self.T_d * self.v

    @property
    def j(self) -> int:
        """Number of TTT states, floor(T_t/T_d) + 1."""
        return int(math.floor(self.T_t / self.T_d + 1e-9)) + 1

    @property
    def u(self) -> int:
        """Number of ping-pong sojourn states, ceil((T_p - T_t)/T_d)."""
        return max(1, int(math.ceil((self.T_p - self.T_t) / self.T_d - 1e-9)))

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)


# JSON key -> (attribute, to_si, from_si)
CONFIG_KEYS: dict[str, tuple[str, Any, Any]] = {
    "lambda_b_per_km2": ("lambda_b", lambda x: x * 1e-6, lambda x: x * 1e6),
    "lambda_r_per_km2": ("lambda_r", lambda x: x * 1e-6, lambda x: x * 1e6),
    "p_t_dbm": ("P_t", dbm_to_watt, watt_to_dbm),
    "f_c_ghz": ("f_c", lambda x: x * 1e9, lambda x: x * 1e-9),
    "alpha": ("alpha", float, float),
    "d_m": ("D", float, float),
    "n_elements": ("N", int, int),
    "v_mps": ("v", float, float),
    "t_d_ms": ("T_d", lambda x: x * 1e-3, lambda x: x * 1e3),
    "gamma_ho_db": ("gamma_ho", db_to_lin, lin_to_db),
    "t_t_ms": ("T_t", lambda x: x * 1e-3, lambda x: x * 1e3),
    "t_p_s": ("T_p", float, float),
    "q_out_db": ("Q_out", db_to_lin, lin_to_db),
    "r_o_m": ("r_o", float, float),
    "r_t_m": ("r_t", float, float),
    "l_m": ("L", float, float),
}
RUN_KEYS = {"seed", "n_trials", "gamma_irs_db", "pp_coupling"}


def config_from_mapping(raw: Mapping[str, Any]) -> tuple[NetworkConfig, dict]:
    """Build a config from a unit-keyed mapping.

    Returns
    -------
    config : NetworkConfig
    run : dict
        Run-level options (``seed``, ``n_trials``, ``pp_coupling``) present
        in the mapping.

    Raises
    ------
    ConfigError
        Unknown key, non-numeric value, both or neither of ``d_m`` and
        ``gamma_irs_db`` conflicts, or a failed invariant.
    """
    from .channel import ChannelParams, serving_distance_from_threshold

    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    kwargs: dict[str, Any] = {}
    run: dict[str, Any] = {}
    for key, val in raw.items():
        if key == "quadrature":
            kwargs["quad"] = _quadrature_from_mapping(val)
            continue
        if key in RUN_KEYS:
            run[key] = val
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        if val is None:
            continue
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(key, f"expected a number, got {val!r}")
        attr, to_si, _ = CONFIG_KEYS[key]
        kwargs[attr] = to_si(val)
    if "d_m" in raw and "gamma_irs_db" in raw:
        raise ConfigError("d_m", "give exactly one of d_m and gamma_irs_db")
    try:
        cfg = NetworkConfig(**kwargs)
    except ConfigError:
        raise
    if "gamma_irs_db" in run:
        g = run.pop("gamma_irs_db")
        if isinstance(g, bool) or not isinstance(g, (int, float)):
            raise ConfigError("gamma_irs_db", f"expected a number, got {g!r}")
        params = ChannelParams.from_config(cfg)
        if cfg.N == 0:
            raise ConfigError("gamma_irs_db", "undefined for N = 0")
        cfg = cfg.replace(D=serving_distance_from_threshold(db_to_lin(g), params))
    if "seed" in run and (not isinstance(run["seed"], int) or run["seed"] < 0):
        raise ConfigError("seed", "must be a non-negative integer")
    if "pp_coupling" in run and run["pp_coupling"] not in ("literal", "flow"):
        raise ConfigError("pp_coupling", "must be 'literal' or 'flow'")
    if "n_trials" in run and (not isinstance(run["n_trials"], int) or run["n_trials"] < 1):
        raise ConfigError("n_trials", "must be a positive integer")
    return cfg, run


_QUAD_TYPES = {"n_d": int, "n_phi": int, "refine": bool, "refine_tol": float, "tail_mass": float}


def _quadrature_from_mapping(raw) -> QuadratureSettings:
    """Optional ``quadrature`` object: any subset of the grid settings."""
    if not isinstance(raw, Mapping):
        raise ConfigError("quadrature", "must be a JSON object")
    vals = {}
    for k, v in raw.items():
        want = _QUAD_TYPES.get(k)
        if want is None:
            raise ConfigError(f"quadrature.{k}", "unknown key")
        ok = isinstance(v, bool) if want is bool else isinstance(v, (int, float)) and not isinstance(v, bool)
        if want is int:
            ok = ok and float(v).is_integer()
        if not ok:
            raise ConfigError(f"quadrature.{k}", f"expected {want.__name__}, got {v!r}")
        vals[k] = want(v)
    q = QuadratureSettings(**vals)
    if q.n_d < 2 or q.n_phi < 2:
        raise ConfigError("quadrature", "n_d and n_phi must be >= 2")
    if not (q.refine_tol > 0 and 0 < q.tail_mass < 1):
        raise ConfigError("quadrature", "refine_tol must be > 0 and tail_mass in (0, 1)")
    return q


def config_to_mapping(cfg: NetworkConfig) -> dict[str, Any]:
    out = {}
    for key, (attr, _, from_si) in CONFIG_KEYS.items():
        val = getattr(cfg, attr)
        if val is not None:
            out[key] = from_si(val)
    if cfg.quad != QuadratureSettings():
        out["quadrature"] = dataclasses.asdict(cfg.quad)
    return out


def load_config(path) -> tuple[NetworkConfig, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return config_from_mapping(raw)
