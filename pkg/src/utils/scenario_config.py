"""Scenario files: flat ``key = value`` lines with dotted section names.

    main.m = 5.5
    main.k = 8
    main.delta = 0.4
    main.avg_snr_db = 10     # or main.sigma2, exactly one of the two
    eaves.m = 5.5
    ...
    rate.value = 1
    rate.unit = bits

Parsing goes through python-dotenv's stream parser so every binding keeps its
line number; all problems are reported as ``<path>:<line>: <message>``.
"""
import io
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from dotenv.parser import parse_stream

from src.channel.ftr_model import (
    DEFAULT_N_MAX,
    DEFAULT_TARGET_EPS,
    FtrParams,
    LinkBudget,
    sigma2_for_average_snr,
)
from src.numerics.quadrature import DEFAULT_REL_TOL
from src.secrecy.scenario import RATE_UNITS, TruncationTargets, WiretapScenario, rate_unit_convert
from src.simulation.mc_oracle import DEFAULT_BATCH, DEFAULT_SAMPLES, DEFAULT_SEED, SampleConfig
from src.utils.errors import ConfigError, DomainError

TARGET_EPS_RANGE = (1e-9, 1.0)

CHANNELS = ("main", "eaves")


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class ChannelSpec:
    """One channel as written in the file; ``None`` marks an absent key."""

    m: Optional[float] = None
    k: Optional[float] = None
    delta: Optional[float] = None
    sigma2: Optional[float] = None
    avg_snr_db: Optional[float] = None


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed scenario file."""

    main: ChannelSpec = field(default_factory=ChannelSpec)
    eaves: ChannelSpec = field(default_factory=ChannelSpec)

    eb_n0_db: float = 0.0
    r: float = 1.0
    eta: float = 2.0
    r_los: float = 1.0

    rate_value: float = 0.0
    rate_unit: str = "bits"

    target_eps: float = DEFAULT_TARGET_EPS
    n_max: int = DEFAULT_N_MAX
    quad_rel_tol: float = DEFAULT_REL_TOL
    common_order: bool = False

    mc_samples: int = DEFAULT_SAMPLES
    mc_seed: int = DEFAULT_SEED

    source: str = field(default="<string>", compare=False)
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    # ------------------------------------------------------------------
    # Loading

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        """Read and validate a scenario file."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"{path}: cannot read scenario file ({e.strerror or e})")
        return cls.loads(text, source=str(path))

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "ScenarioConfig":
        """Parse scenario text; raises ConfigError listing every problem."""
        errors = []
        values = {}
        lines = {}
        rejected = set()

        for binding in parse_stream(io.StringIO(text)):
            line = _binding_line(binding)
            if binding.error:
                errors.append(f"{source}:{line}: cannot parse {binding.original.string.strip()!r}")
                continue
            if binding.key is None:
                continue  # blank line or comment
            key = binding.key
            if key not in _KEYS:
                errors.append(f"{source}:{line}: unknown key {key!r}")
                continue
            if key in values:
                errors.append(f"{source}:{line}: duplicate key {key!r} (first set on line {lines[key]})")
                continue
            if binding.value is None or not binding.value.strip():
                errors.append(f"{source}:{line}: missing value for {key!r}")
                rejected.add(key)
                continue
            try:
                values[key] = _KEYS[key](binding.value.strip())
            except ValueError as e:
                errors.append(f"{source}:{line}: {key}: {e}")
                rejected.add(key)
                continue
            lines[key] = line

        config = cls._from_values(values, source, lines)
        errors.extend(config._located(config._problems(frozenset(rejected))))
        if errors:
            raise ConfigError(errors)
        return config

    @classmethod
    def _from_values(cls, values: dict, source: str, lines: dict) -> "ScenarioConfig":
        channels = {
            name: ChannelSpec(
                **{f.name: values.get(f"{name}.{f.name}") for f in fields(ChannelSpec)}
            )
            for name in CHANNELS
        }
        flat = {
            attr: values[key]
            for key, attr in _FLAT_KEYS.items()
            if key in values
        }
        return cls(main=channels["main"], eaves=channels["eaves"], source=source, lines=lines, **flat)

    # ------------------------------------------------------------------
    # Validation

    def validate(self) -> list[str]:
        """Validate configuration and return list of errors."""
        return self._located(self._problems())

    def _located(self, problems: list) -> list[str]:
        located = []
        for key, message in problems:
            line = self.lines.get(key)
            prefix = f"{self.source}:{line}" if line else self.source
            located.append(f"{prefix}: {message}")
        return located

    def _problems(self, rejected: frozenset = frozenset()) -> list[tuple[str, str]]:
        """(key, message) pairs; the key locates the message in the file.

        Keys in ``rejected`` were present but unreadable and count as set.
        """
        problems = []

        for name in CHANNELS:
            spec = getattr(self, name)
            for attr in ("m", "k", "delta"):
                if getattr(spec, attr) is None and f"{name}.{attr}" not in rejected:
                    problems.append((f"{name}.{attr}", f"missing required key {name}.{attr}"))
            has_sigma2 = spec.sigma2 is not None or f"{name}.sigma2" in rejected
            has_avg_snr = spec.avg_snr_db is not None or f"{name}.avg_snr_db" in rejected
            if has_sigma2 == has_avg_snr:
                problems.append(
                    (f"{name}.sigma2" if spec.sigma2 is not None else f"{name}.avg_snr_db",
                     f"exactly one of {name}.sigma2 or {name}.avg_snr_db must be set")
                )
            problems.extend(_channel_problems(name, spec))

        try:
            self.link_budget().check()
        except DomainError as e:
            problems.append(("budget.r", str(e)))

        if self.rate_unit not in RATE_UNITS:
            problems.append(("rate.unit", f"rate.unit must be one of {', '.join(RATE_UNITS)}, got {self.rate_unit!r}"))
        if not (self.rate_value >= 0 and math.isfinite(self.rate_value)):
            problems.append(("rate.value", f"rate.value must be nonnegative, got {self.rate_value}"))

        low, high = TARGET_EPS_RANGE
        if not low <= self.target_eps <= high:
            problems.append(("numerics.target_eps", f"numerics.target_eps must lie in [{low:g}, {high:g}], got {self.target_eps}"))
        if self.n_max < 1:
            problems.append(("numerics.n_max", f"numerics.n_max must be at least 1, got {self.n_max}"))
        if not 0 < self.quad_rel_tol < 1:
            problems.append(("numerics.quad_rel_tol", f"numerics.quad_rel_tol must lie in (0, 1), got {self.quad_rel_tol}"))

        if self.mc_samples < 1:
            problems.append(("mc.samples", f"mc.samples must be positive, got {self.mc_samples}"))
        if not 0 <= self.mc_seed < 2**64:
            problems.append(("mc.seed", f"mc.seed must be a 64-bit unsigned integer, got {self.mc_seed}"))

        if not problems and not rejected:
            for name in CHANNELS:
                try:
                    self.channel_params(name)
                except DomainError as e:
                    problems.append((f"{name}.avg_snr_db", f"{name}: {e}"))
        return problems

    # ------------------------------------------------------------------
    # Model objects

    def link_budget(self) -> LinkBudget:
        return LinkBudget.from_db(self.eb_n0_db, r=self.r, eta=self.eta, r_los=self.r_los)

    def channel_params(self, name: str) -> FtrParams:
        """Fading parameters of channel ``name`` before the link budget is applied."""
        spec = getattr(self, name)
        sigma2 = spec.sigma2
        if sigma2 is None:
            sigma2 = sigma2_for_average_snr(db_to_linear(spec.avg_snr_db), spec.k, self.link_budget())
        return FtrParams(m=spec.m, k=spec.k, delta=spec.delta, sigma2=sigma2)

    @property
    def rate_nats(self) -> float:
        return rate_unit_convert(self.rate_value, self.rate_unit)

    def scenario(self) -> WiretapScenario:
        """Wiretap scenario over the received SNRs of both channels."""
        budget = self.link_budget()
        budget.check()
        return WiretapScenario(
            main=self.channel_params("main").scaled(budget),
            eaves=self.channel_params("eaves").scaled(budget),
            rate_nats=self.rate_nats,
        )

    def truncation_targets(self) -> TruncationTargets:
        return TruncationTargets(
            main_eps=self.target_eps,
            eaves_eps=self.target_eps,
            n_max=self.n_max,
            common_order=self.common_order,
        )

    def sample_config(self, batch: int = DEFAULT_BATCH, samples: Optional[int] = None, seed: Optional[int] = None) -> SampleConfig:
        return SampleConfig(
            n_samples=self.mc_samples if samples is None else samples,
            seed=self.mc_seed if seed is None else seed,
            batch=batch,
        )

    # ------------------------------------------------------------------
    # Sweep helpers

    def with_channel(self, name: str, **changes) -> "ScenarioConfig":
        return replace(self, **{name: replace(getattr(self, name), **changes)})

    def with_avg_snr_db(self, name: str, avg_snr_db: float) -> "ScenarioConfig":
        """Channel ``name`` re-targeted to a received average SNR."""
        return self.with_channel(name, sigma2=None, avg_snr_db=avg_snr_db)

    def avg_snr_db(self, name: str) -> float:
        """Received average SNR of channel ``name`` in dB."""
        spec = getattr(self, name)
        if spec.avg_snr_db is not None:
            return spec.avg_snr_db
        budget = self.link_budget()
        return linear_to_db(self.channel_params(name).scaled(budget).mean_snr)

    # ------------------------------------------------------------------
    # Serialization

    def dumps(self) -> str:
        """Canonical text form; ``loads(dumps())`` gives equal values."""
        out = []
        for name in CHANNELS:
            spec = getattr(self, name)
            for f in fields(ChannelSpec):
                value = getattr(spec, f.name)
                if value is not None:
                    out.append(f"{name}.{f.name} = {_format(value)}")
        for key, attr in _FLAT_KEYS.items():
            out.append(f"{key} = {_format(getattr(self, attr))}")
        return "\n".join(out) + "\n"


def _channel_problems(name: str, spec: ChannelSpec) -> list[tuple[str, str]]:
    problems = []
    if spec.m is not None and not (spec.m > 0 and math.isfinite(spec.m)):
        problems.append((f"{name}.m", f"{name}.m must be positive, got {spec.m}"))
    if spec.k is not None and not (spec.k >= 0 and math.isfinite(spec.k)):
        problems.append((f"{name}.k", f"{name}.k must be nonnegative, got {spec.k}"))
    if spec.delta is not None and not 0.0 <= spec.delta <= 1.0:
        problems.append((f"{name}.delta", f"{name}.delta must lie in [0, 1], got {spec.delta}"))
    if spec.sigma2 is not None and not (spec.sigma2 > 0 and math.isfinite(spec.sigma2)):
        problems.append((f"{name}.sigma2", f"{name}.sigma2 must be positive, got {spec.sigma2}"))
    if spec.avg_snr_db is not None and not math.isfinite(spec.avg_snr_db):
        problems.append((f"{name}.avg_snr_db", f"{name}.avg_snr_db must be finite, got {spec.avg_snr_db}"))
    return problems


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"malformed number {text!r}")
    if math.isnan(value):
        raise ValueError(f"malformed number {text!r}")
    return value


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    value = _parse_float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _parse_str(text: str) -> str:
    return text


_CHANNEL_KEYS = {
    f"{name}.{attr}": _parse_float
    for name in CHANNELS
    for attr in ("m", "k", "delta", "sigma2", "avg_snr_db")
}

_FLAT_KEYS = {
    "budget.eb_n0_db": "eb_n0_db",
    "budget.r": "r",
    "budget.eta": "eta",
    "budget.r_los": "r_los",
    "rate.value": "rate_value",
    "rate.unit": "rate_unit",
    "numerics.target_eps": "target_eps",
    "numerics.n_max": "n_max",
    "numerics.quad_rel_tol": "quad_rel_tol",
    "numerics.common_order": "common_order",
    "mc.samples": "mc_samples",
    "mc.seed": "mc_seed",
}

_FLAT_PARSERS = {
    "budget.eb_n0_db": _parse_float,
    "budget.r": _parse_float,
    "budget.eta": _parse_float,
    "budget.r_los": _parse_float,
    "rate.value": _parse_float,
    "rate.unit": _parse_str,
    "numerics.target_eps": _parse_float,
    "numerics.n_max": _parse_int,
    "numerics.quad_rel_tol": _parse_float,
    "numerics.common_order": _parse_bool,
    "mc.samples": _parse_int,
    "mc.seed": _parse_int,
}

_KEYS = {**_CHANNEL_KEYS, **_FLAT_PARSERS}


def _binding_line(binding) -> int:
    """Line of the binding's key; the parser's mark sits before leading blank lines."""
    text = binding.original.string
    leading = text[: len(text) - len(text.lstrip())]
    return binding.original.line + leading.count("\n")
