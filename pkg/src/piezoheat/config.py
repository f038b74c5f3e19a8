"""Run configuration: an INI-style file with fixed sections, plus named presets.

Grammar (``#`` and ``;`` start comments, keys are case-sensitive)::

    [material]    rho chi gamma beta mu_mag kappa ell1 ell2
    [fractional]  alpha eta
    [grid]        n_heat n_beam K Xi
    [simulation]  dt t_end scheme trace_stride initial_condition
    [spectral]    lambda_min lambda_max n_lambdas lambda
    [sweep]       alphas etas         (comma-separated lists)
    [run]         seed

Every key is optional; missing keys take the defaults below.  Unknown
sections or keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, MaterialParams, StateVector
from .fracdiff import FractionalParams, XiQuadrature, build_xi_quadrature
from .timestep import SimConfig

__all__ = ["ConfigError", "GridSpec", "SpectralSpec", "SweepSpec", "RunConfig", "PRESETS", "preset", "initial_state"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_heat: int = 30
    n_beam: int = 30
    K: int = 24
    Xi: float = 1e4

    def __post_init__(self):
        if self.n_heat < 3 or self.n_beam < 3:
            raise ValueError("n_heat and n_beam must be >= 3")
        if self.K < 0 or self.K == 1:
            raise ValueError("K must be 0 or >= 2")
        if not self.Xi > 0:
            raise ValueError("Xi must be > 0")


@dataclass(frozen=True)
class SpectralSpec:
    lambda_min: float = 0.1
    lambda_max: float = 1000.0
    n_lambdas: int = 60
    lambda_: float = 0.0

    def __post_init__(self):
        if not 0 < self.lambda_min < self.lambda_max:
            raise ValueError("need 0 < lambda_min < lambda_max")
        if self.n_lambdas < 3:
            raise ValueError("n_lambdas must be >= 3")

    def lambdas(self) -> np.ndarray:
        return np.logspace(np.log10(self.lambda_min), np.log10(self.lambda_max), self.n_lambdas)


@dataclass(frozen=True)
class SweepSpec:
    alphas: tuple = (0.3, 0.5, 0.7)
    etas: tuple = (1.0,)


@dataclass(frozen=True)
class RunConfig:
    material: MaterialParams = field(default_factory=MaterialParams)
    fractional: FractionalParams = field(default_factory=lambda: FractionalParams(0.5, 1.0))
    grid: GridSpec = field(default_factory=GridSpec)
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=1e-2, t_end=20.0, trace_stride=10))
    spectral: SpectralSpec = field(default_factory=SpectralSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    seed: int = 0

    def build_grid(self) -> Grid:
        g = self.grid
        if g.K:
            rule = build_xi_quadrature(self.fractional, g.K, Xi=g.Xi, tol=np.inf)
        else:
            rule = XiQuadrature.empty()
        return Grid.build(self.material, g.n_heat, g.n_beam, rule)

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)

    # ---- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        sim = self.sim
        return {
            "material": dataclasses.asdict(self.material),
            "fractional": {"alpha": self.fractional.alpha, "eta": self.fractional.eta},
            "grid": dataclasses.asdict(self.grid),
            "simulation": {
                "dt": sim.dt,
                "t_end": sim.t_end,
                "scheme": sim.scheme.value,
                "trace_stride": sim.trace_stride,
                "initial_condition": sim.initial_condition,
            },
            "spectral": {
                "lambda_min": self.spectral.lambda_min,
                "lambda_max": self.spectral.lambda_max,
                "n_lambdas": self.spectral.n_lambdas,
                "lambda": self.spectral.lambda_,
            },
            "sweep": {"alphas": list(self.sweep.alphas), "etas": list(self.sweep.etas)},
            "run": {"seed": self.seed},
        }

    @classmethod
    def from_dict(cls, d: dict, base: "RunConfig | None" = None) -> "RunConfig":
        """Inverse of :meth:`to_dict`; missing keys are taken from ``base``."""
        return _build(d, lambda section, key: f"[{section}] {key}", base)

    def to_ini(self) -> str:
        lines = []
        for section, values in self.to_dict().items():
            lines.append(f"[{section}]")
            for key, val in values.items():
                if isinstance(val, list):
                    val = ", ".join(repr(float(x)) for x in val)
                elif isinstance(val, float):
                    val = repr(val)
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_ini(cls, text: str, source: str = "<config>", base: "RunConfig | None" = None) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        lines = text.splitlines()

        def where(section, key):
            current = None
            for i, line in enumerate(lines, start=1):
                stripped = line.strip()
                if stripped.startswith("["):
                    current = stripped.strip("[]").strip()
                elif current == section and stripped.split("=")[0].strip() == key:
                    return f"{source}:{i}: [{section}] {key}"
            return f"{source}: [{section}] {key}"

        raw = {s: dict(parser[s]) for s in parser.sections()}
        return _build(raw, where, base)


_SCHEMA = {
    "material": {f.name: float for f in dataclasses.fields(MaterialParams)},
    "fractional": {"alpha": float, "eta": float},
    "grid": {"n_heat": int, "n_beam": int, "K": int, "Xi": float},
    "simulation": {"dt": float, "t_end": float, "scheme": str, "trace_stride": int, "initial_condition": str},
    "spectral": {"lambda_min": float, "lambda_max": float, "n_lambdas": int, "lambda": float},
    "sweep": {"alphas": "list", "etas": "list"},
    "run": {"seed": int},
}


def _convert(kind, val):
    if kind == "list":
        if isinstance(val, str):
            return tuple(float(x) for x in val.split(",") if x.strip())
        return tuple(float(x) for x in val)
    if kind is int:
        if isinstance(val, str):
            return int(val.strip())
        if isinstance(val, float) and not val.is_integer():
            raise ValueError(f"expected an integer, got {val!r}")
        return int(val)
    if kind is float:
        return float(val)
    return str(val).strip()


def _build(raw: dict, where, base: RunConfig | None = None) -> RunConfig:
    base = (base or RunConfig()).to_dict()
    for section, values in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, val in values.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{where(section, key)}: unknown key")
            try:
                base[section][key] = _convert(_SCHEMA[section][key], val)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where(section, key)}: {exc}") from exc

    def make(section, factory, **kw):
        try:
            return factory(**kw)
        except (TypeError, ValueError) as exc:
            given = list(raw.get(section, {}))
            # point at the key the message names, else the first one set
            named = [k for k in given if k in str(exc)] or given
            loc = where(section, named[0]) if named else f"[{section}]"
            raise ConfigError(f"{loc}: {exc}") from exc

    s = base["simulation"]
    sp = base["spectral"]
    return RunConfig(
        material=make("material", MaterialParams, **base["material"]),
        fractional=make("fractional", FractionalParams, **base["fractional"]),
        grid=make("grid", GridSpec, **base["grid"]),
        sim=make("simulation", SimConfig, **s),
        spectral=make(
            "spectral", SpectralSpec, lambda_min=sp["lambda_min"], lambda_max=sp["lambda_max"],
            n_lambdas=sp["n_lambdas"], lambda_=sp["lambda"],
        ),
        sweep=make("sweep", SweepSpec, alphas=tuple(base["sweep"]["alphas"]), etas=tuple(base["sweep"]["etas"])),
        seed=_convert(int, base["run"]["seed"]),
    )


# ---- initial conditions and presets --------------------------------------


def initial_state(name: str, grid: Grid, seed: int = 0, mp: MaterialParams | None = None) -> StateVector:
    """Named initial data; memory variables always start at rest.

    ``zero``      everything 0.
    ``standard``  z = sin(pi (x + l1) / l1), v = c sin(pi x / l2), p = gamma v,
                  velocities 0, with c = -kappa l2 / (chi1 l1).  This choice
                  satisfies both interface balances at x = 0 and keeps
                  z_xx(0) = v_xx(0) = 0, so the run starts without a layer.
    ``heat``      the z part of ``standard``; the beam at rest.
    ``beam``      v = cos(pi x / (2 l2)), p = gamma v, z and velocities 0.
    ``random``    uniform on [-1, 1] for z, v, V, p, P from ``seed``.
    """
    mp = mp or MaterialParams()
    U = StateVector.zeros(grid)
    xh, xb = grid.x_heat, grid.x_beam
    l1, l2 = grid.ell1, grid.ell2
    if name == "zero":
        return U
    if name in ("standard", "heat"):
        U.z = np.sin(np.pi * (xh + l1) / l1)
    if name == "standard":
        U.v = -(mp.kappa * l2 / (mp.chi1 * l1)) * np.sin(np.pi * xb / l2)
        U.p = mp.gamma * U.v
    if name == "beam":
        U.v = np.cos(np.pi * xb / (2 * l2))
        U.p = mp.gamma * U.v
    if name == "random":
        rng = np.random.default_rng(seed)
        U.z, U.v, U.V, U.p, U.P = (rng.uniform(-1, 1, a.size) for a in (U.z, U.v, U.V, U.p, U.P))
    if name not in ("zero", "standard", "heat", "beam", "random"):
        raise ConfigError(f"unknown initial condition {name!r}")
    return U


def _standard(alpha: float) -> RunConfig:
    # long enough for the energy to fall below 1e-6 of its start
    return RunConfig(
        fractional=FractionalParams(alpha, 1.0),
        sim=SimConfig(dt=0.05, t_end=300.0, trace_stride=4, initial_condition="standard"),
    )


PRESETS = {
    "zero": RunConfig(sim=SimConfig(dt=1e-2, t_end=1.0, trace_stride=10, initial_condition="zero")),
    "standard-a03": _standard(0.3),
    "standard-a05": _standard(0.5),
    "standard-a07": _standard(0.7),
    # a heavy beam pins the interface velocity, decoupling the rod
    "heat-only": RunConfig(
        material=MaterialParams(rho=1e6, mu_mag=1e6),
        sim=SimConfig(dt=1e-3, t_end=0.5, trace_stride=10, initial_condition="heat"),
    ),
    "beam-only": RunConfig(sim=SimConfig(dt=1e-2, t_end=20.0, trace_stride=10, initial_condition="beam")),
}


def preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
