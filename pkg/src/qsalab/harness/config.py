"""Typed experiment configuration: strict parser, validator, serializer.

The format is flat `key = value` lines under `[section]` headers with `#`
comments. Unknown sections, unknown keys, duplicates, and keys that do not
apply to the experiment kind are all hard errors, so a config file is a
complete and auditable record of one experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import QsaError
from ..gfo import DimensionMismatch, UnknownObjective, builtin_objective
from ..probing import DependentFrequencies, NonPositiveFrequency
from ..probing import make_log_rational_frequencies


class ParseError(QsaError):
    """Malformed config text; the message carries file, line, and key."""


class ValidationError(QsaError):
    """Well-formed config that violates a documented precondition."""


KINDS = ("linear_example", "qmc", "gfo")
CHANNELS = ("raw", "pr", "fb")
COMPARATORS = ("mc", "spsa1", "spsa2")
WAVEFORMS = ("cosine", "triangle")
PROBE_STYLES = ("model", "explicit", "random_sin")
METHODS = ("1qsgd", "2qsgd")

DEFAULT_OMEGA_RAD = (
    math.pi / 5.0,
    math.sqrt(3.0) / 5.0,
    4.0 / 5.0,
    math.sqrt(5.0) / 5.0,
)

_SCHEMA: dict[str, tuple[str, ...]] = {
    "experiment": ("kind", "runs", "master_seed", "channels", "comparators", "out"),
    "model": (
        "a_star_diag", "omega_rad", "forcing_scale", "theta0", "theta0_range",
        "gamma", "dim", "objective", "epsilon", "method",
        "box_lower", "box_upper",
    ),
    "probe": (
        "style", "waveform", "log_rational_pairs", "omega", "phi_cycles", "v",
        "freq_range_rad", "amplitude", "phase_range_rad",
    ),
    "gain": ("a0", "rho", "capped"),
    "integration": ("T", "Ts", "store_stride"),
    "averaging": ("kappa",),
}


@dataclass(frozen=True)
class GainConfig:
    a0: float
    rho: float
    capped: bool


@dataclass(frozen=True)
class IntegrationConfig:
    T: float
    Ts: float
    store_stride: int


@dataclass(frozen=True)
class ProbeConfig:
    style: str
    waveform: str = "cosine"
    log_rational_pairs: tuple[tuple[int, int], ...] | None = None
    omega: tuple[float, ...] | None = None
    phi_cycles: tuple[float, ...] | str | None = None
    v: tuple[tuple[float, ...], ...] | str = "identity"
    freq_range_rad: tuple[float, float] | None = None
    amplitude: float | None = None
    phase_range_rad: tuple[float, float] | None = None


@dataclass(frozen=True)
class ModelConfig:
    a_star_diag: float | None = None
    omega_rad: tuple[float, ...] | None = None
    forcing_scale: float | None = None
    theta0: tuple[float, ...] | str | None = None
    theta0_range: tuple[float, float] | None = None
    gamma: float | None = None
    dim: int | None = None
    objective: str | None = None
    epsilon: float | None = None
    method: str | None = None
    box_lower: tuple[float, ...] | None = None
    box_upper: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    runs: int
    master_seed: int
    channels: tuple[str, ...]
    comparators: tuple[str, ...]
    out: str | None
    model: ModelConfig
    probe: ProbeConfig
    gain: GainConfig
    integration: IntegrationConfig
    kappa: float


_MISSING = object()


def _parse_int(s: str) -> int:
    return int(s)


def _parse_float(s: str) -> float:
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan is not a valid value")
    return v


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(f"expected true or false, got {s!r}")


def _parse_str(s: str) -> str:
    return s


def _parse_floats(s: str) -> tuple[float, ...]:
    parts = [p.strip() for p in s.split(",")]
    return tuple(_parse_float(p) for p in parts if p)


def _parse_names(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _parse_pairs(s: str) -> tuple[tuple[int, int], ...]:
    out = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        a, sep, b = part.partition("/")
        if not sep:
            raise ValueError(f"expected a/b integer pair, got {part!r}")
        out.append((int(a.strip()), int(b.strip())))
    return tuple(out)


def _parse_matrix(s: str) -> tuple[tuple[float, ...], ...] | str:
    if s.strip() == "identity":
        return "identity"
    return tuple(_parse_floats(row) for row in s.split(";"))


def _parse_theta0(s: str) -> tuple[float, ...] | str:
    if s.strip() in ("uniform", "uniform_box"):
        return s.strip()
    return _parse_floats(s)


def _parse_phi(s: str) -> tuple[float, ...] | str:
    if s.strip() == "uniform":
        return "uniform"
    return _parse_floats(s)


def _split_sections(
    text: str, origin: str
) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ParseError(f"{origin}:{lineno}: unknown section [{name}]")
            if name in sections:
                raise ParseError(f"{origin}:{lineno}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ParseError(f"{origin}:{lineno}: expected `key = value`")
        if current is None:
            raise ParseError(f"{origin}:{lineno}: key outside any [section]")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in _SCHEMA[current]:
            raise ParseError(
                f"{origin}:{lineno}: unknown key {key!r} in section [{current}]"
            )
        if key in sections[current]:
            raise ParseError(f"{origin}:{lineno}: duplicate key {key!r}")
        sections[current][key] = (value.strip(), lineno)
    return sections


class _Section:
    """One raw section with typed, consume-tracking access."""

    def __init__(self, origin: str, name: str, raw: dict[str, tuple[str, int]]):
        self.origin = origin
        self.name = name
        self.raw = dict(raw)

    def take(self, key: str, parser, default=_MISSING):
        if key in self.raw:
            value, lineno = self.raw.pop(key)
            try:
                return parser(value)
            except ValueError as exc:
                raise ParseError(
                    f"{self.origin}:{lineno}: bad value for {key!r}: {exc}"
                ) from None
        if default is _MISSING:
            raise ValidationError(
                f"section [{self.name}] requires key {key!r}"
            )
        return default

    def finish(self) -> None:
        if self.raw:
            key, (_, lineno) = next(iter(self.raw.items()))
            raise ParseError(
                f"{self.origin}:{lineno}: key {key!r} does not apply here"
            )


def _canonical_subset(given: tuple[str, ...], allowed: tuple[str, ...],
                      what: str) -> tuple[str, ...]:
    for name in given:
        if name not in allowed:
            raise ValidationError(
                f"unknown {what} {name!r}; choices: {', '.join(allowed)}"
            )
    return tuple(name for name in allowed if name in given)


def parse_config(text: str, origin: str = "<config>") -> ExperimentConfig:
    """Parse and fully validate config text; returns the resolved config."""
    raw = _split_sections(text, origin)

    exp = _Section(origin, "experiment", raw.pop("experiment", {}))
    kind = exp.take("kind", _parse_str)
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {', '.join(KINDS)}")
    runs = exp.take("runs", _parse_int, default=1)
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    master_seed = exp.take("master_seed", _parse_int, default=0)
    if master_seed < 0:
        raise ValidationError("master_seed must be >= 0")
    channels = _canonical_subset(
        exp.take("channels", _parse_names, default=("raw", "pr")),
        CHANNELS, "channel",
    )
    if not channels:
        raise ValidationError("channels must name at least one of raw, pr, fb")
    comparators = _canonical_subset(
        exp.take("comparators", _parse_names, default=()),
        COMPARATORS, "comparator",
    )
    out = exp.take("out", _parse_str, default=None)
    exp.finish()

    gain_sec = _Section(origin, "gain", raw.pop("gain", {}))
    a0 = gain_sec.take("a0", _parse_float, default=1.0)
    rho = gain_sec.take("rho", _parse_float)
    capped = gain_sec.take("capped", _parse_bool, default=False)
    gain_sec.finish()
    if not a0 > 0:
        raise ValidationError("gain a0 must be positive")
    if not 0.0 < rho <= 1.0:
        raise ValidationError("gain rho must lie in (0, 1]")

    integ_sec = _Section(origin, "integration", raw.pop("integration", {}))
    T = integ_sec.take("T", _parse_float)
    Ts = integ_sec.take("Ts", _parse_float)
    stride = integ_sec.take("store_stride", _parse_int, default=1)
    integ_sec.finish()
    if not Ts > 0 or T < Ts:
        raise ValidationError("integration requires T >= Ts > 0")
    n_steps = int(round(T / Ts))
    if stride < 1 or n_steps % stride != 0:
        raise ValidationError(
            f"store_stride must be >= 1 and divide the {n_steps} Euler steps"
        )

    avg_sec = _Section(origin, "averaging", raw.pop("averaging", {}))
    kappa = avg_sec.take("kappa", _parse_float)
    avg_sec.finish()
    if not kappa > 1.0:
        raise ValidationError("averaging kappa must be > 1")

    model_sec = _Section(origin, "model", raw.pop("model", {}))
    probe_sec = _Section(origin, "probe", raw.pop("probe", {}))
    if raw:
        name = next(iter(raw))
        raise ValidationError(f"section [{name}] is not recognized")

    if kind == "linear_example":
        model, probe = _resolve_linear(model_sec, probe_sec, comparators)
    elif kind == "qmc":
        model, probe = _resolve_qmc(model_sec, probe_sec, comparators)
    else:
        model, probe = _resolve_gfo(model_sec, probe_sec, comparators)
    model_sec.finish()
    probe_sec.finish()

    return ExperimentConfig(
        kind=kind,
        runs=runs,
        master_seed=master_seed,
        channels=channels,
        comparators=comparators,
        out=out,
        model=model,
        probe=probe,
        gain=GainConfig(a0=a0, rho=rho, capped=capped),
        integration=IntegrationConfig(T=T, Ts=Ts, store_stride=stride),
        kappa=kappa,
    )


def _resolve_linear(model_sec: _Section, probe_sec: _Section,
                    comparators: tuple[str, ...]) -> tuple[ModelConfig, ProbeConfig]:
    if comparators:
        raise ValidationError("linear_example supports no comparators")
    a_star_diag = model_sec.take("a_star_diag", _parse_float, default=-0.8)
    if not a_star_diag < 0:
        raise ValidationError("a_star_diag must be negative (Hurwitz)")
    omega_rad = model_sec.take("omega_rad", _parse_floats,
                               default=DEFAULT_OMEGA_RAD)
    if len(omega_rad) != 4 or any(w <= 0 for w in omega_rad):
        raise ValidationError("omega_rad must list four positive frequencies")
    forcing_scale = model_sec.take("forcing_scale", _parse_float, default=10.0)
    theta0 = model_sec.take("theta0", _parse_theta0, default=(5.0, -5.0))
    if isinstance(theta0, str) or len(theta0) != 2:
        raise ValidationError("linear_example theta0 must be two numbers")
    style = probe_sec.take("style", _parse_str, default="model")
    if style != "model":
        raise ValidationError("linear_example builds its own probe; style=model")
    model = ModelConfig(
        a_star_diag=a_star_diag, omega_rad=omega_rad,
        forcing_scale=forcing_scale, theta0=theta0,
    )
    return model, ProbeConfig(style="model")


def _resolve_qmc(model_sec: _Section, probe_sec: _Section,
                 comparators: tuple[str, ...]) -> tuple[ModelConfig, ProbeConfig]:
    for name in comparators:
        if name != "mc":
            raise ValidationError(f"qmc supports only the mc comparator, not {name!r}")
    gamma = model_sec.take("gamma", _parse_float, default=1.0)
    dim = model_sec.take("dim", _parse_int, default=2)
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    theta0 = model_sec.take("theta0", _parse_theta0, default="uniform")
    theta0_range = model_sec.take("theta0_range", _parse_floats,
                                  default=(-25.0, 25.0))
    if theta0 == "uniform":
        if len(theta0_range) != 2 or not theta0_range[0] < theta0_range[1]:
            raise ValidationError("theta0_range must be lo, hi with lo < hi")
        theta0_range = (theta0_range[0], theta0_range[1])
    elif isinstance(theta0, str) or len(theta0) != 1:
        raise ValidationError("qmc theta0 must be `uniform` or one number")

    style = probe_sec.take("style", _parse_str, default="explicit")
    if style != "explicit":
        raise ValidationError("qmc probes are explicit; style=explicit")
    waveform = probe_sec.take("waveform", _parse_str, default="triangle")
    if waveform not in WAVEFORMS:
        raise ValidationError(f"waveform must be one of {', '.join(WAVEFORMS)}")
    pairs = probe_sec.take("log_rational_pairs", _parse_pairs, default=None)
    omega = probe_sec.take("omega", _parse_floats, default=None)
    if (pairs is None) == (omega is None):
        raise ValidationError(
            "probe needs exactly one of log_rational_pairs or omega"
        )
    if pairs is not None:
        try:
            spec = make_log_rational_frequencies(pairs)
        except (DependentFrequencies, NonPositiveFrequency, ValueError) as exc:
            raise ValidationError(f"log_rational_pairs rejected: {exc}") from None
        k = len(spec.omega)
    else:
        if any(w <= 0 for w in omega):
            raise ValidationError("omega entries must be positive")
        k = len(omega)
    v = probe_sec.take("v", _parse_matrix, default="identity")
    if v == "identity":
        if k != dim:
            raise ValidationError(
                f"identity v needs as many frequencies as dimensions ({dim})"
            )
    else:
        if len(v) != k or any(len(row) != dim for row in v):
            raise ValidationError(f"v must be a {k}x{dim} matrix")
    phi = probe_sec.take("phi_cycles", _parse_phi, default="uniform")
    if phi != "uniform" and len(phi) != k:
        raise ValidationError(f"phi_cycles must be `uniform` or {k} numbers")

    model = ModelConfig(gamma=gamma, dim=dim, theta0=theta0,
                        theta0_range=theta0_range if theta0 == "uniform" else None)
    probe = ProbeConfig(style="explicit", waveform=waveform,
                        log_rational_pairs=pairs, omega=omega,
                        phi_cycles=phi, v=v)
    return model, probe


def _resolve_gfo(model_sec: _Section, probe_sec: _Section,
                 comparators: tuple[str, ...]) -> tuple[ModelConfig, ProbeConfig]:
    for name in comparators:
        if name == "mc":
            raise ValidationError("gfo supports spsa1/spsa2 comparators, not mc")
    objective = model_sec.take("objective", _parse_str)
    dim = model_sec.take("dim", _parse_int)
    try:
        obj = builtin_objective(objective, dim)
    except (UnknownObjective, DimensionMismatch) as exc:
        raise ValidationError(str(exc)) from None
    epsilon = model_sec.take("epsilon", _parse_float)
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    method = model_sec.take("method", _parse_str)
    if method not in METHODS:
        raise ValidationError(f"method must be one of {', '.join(METHODS)}")
    theta0 = model_sec.take("theta0", _parse_theta0, default="uniform_box")
    if not isinstance(theta0, str) and len(theta0) != dim:
        raise ValidationError(f"explicit theta0 must have {dim} entries")
    if isinstance(theta0, str) and theta0 != "uniform_box":
        raise ValidationError("gfo theta0 must be `uniform_box` or a vector")
    box_lower = model_sec.take("box_lower", _parse_floats, default=None)
    box_upper = model_sec.take("box_upper", _parse_floats, default=None)
    if (box_lower is None) != (box_upper is None):
        raise ValidationError("box_lower and box_upper must come together")
    if box_lower is not None:
        if len(box_lower) != dim or len(box_upper) != dim:
            raise ValidationError(f"box bounds must each have {dim} entries")
        if not all(lo < hi for lo, hi in zip(box_lower, box_upper)):
            raise ValidationError("box_lower must be strictly below box_upper")

    style = probe_sec.take("style", _parse_str, default="random_sin")
    if style != "random_sin":
        raise ValidationError("gfo uses the random_sin probe protocol")
    freq_range = probe_sec.take("freq_range_rad", _parse_floats,
                                default=(0.05, 0.5))
    if len(freq_range) != 2 or not 0 < freq_range[0] < freq_range[1]:
        raise ValidationError("freq_range_rad must be 0 < lo < hi")
    amplitude = probe_sec.take("amplitude", _parse_float, default=2.0)
    if not amplitude > 0:
        raise ValidationError("amplitude must be positive")
    phase_range = probe_sec.take("phase_range_rad", _parse_floats,
                                 default=(-math.pi / 2.0, math.pi / 2.0))
    if len(phase_range) != 2 or not phase_range[0] <= phase_range[1]:
        raise ValidationError("phase_range_rad must be lo, hi with lo <= hi")

    model = ModelConfig(objective=obj.name, dim=dim, epsilon=epsilon,
                        method=method, theta0=theta0,
                        box_lower=box_lower, box_upper=box_upper)
    probe = ProbeConfig(style="random_sin",
                        freq_range_rad=(freq_range[0], freq_range[1]),
                        amplitude=amplitude,
                        phase_range_rad=(phase_range[0], phase_range[1]))
    return model, probe


def load_config(source: str | Path) -> ExperimentConfig:
    """Load from a file path, or parse directly when given multi-line text."""
    text = str(source)
    if "\n" in text:
        return parse_config(text, "<config>")
    path = Path(source)
    return parse_config(path.read_text(), str(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return str(value)


def _fmt_floats(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    comp = ", ".join(cfg.comparators)
    lines = ["[experiment]", f"kind = {cfg.kind}", f"runs = {cfg.runs}",
             f"master_seed = {cfg.master_seed}",
             f"channels = {', '.join(cfg.channels)}",
             f"comparators = {comp}" if comp else "comparators ="]
    if cfg.out is not None:
        lines.append(f"out = {cfg.out}")

    m, p = cfg.model, cfg.probe
    lines.append("")
    lines.append("[model]")
    if cfg.kind == "linear_example":
        lines.append(f"a_star_diag = {_fmt(m.a_star_diag)}")
        lines.append(f"omega_rad = {_fmt_floats(m.omega_rad)}")
        lines.append(f"forcing_scale = {_fmt(m.forcing_scale)}")
        lines.append(f"theta0 = {_fmt_floats(m.theta0)}")
    elif cfg.kind == "qmc":
        lines.append(f"gamma = {_fmt(m.gamma)}")
        lines.append(f"dim = {m.dim}")
        if m.theta0 == "uniform":
            lines.append("theta0 = uniform")
            lines.append(f"theta0_range = {_fmt_floats(m.theta0_range)}")
        else:
            lines.append(f"theta0 = {_fmt_floats(m.theta0)}")
    else:
        lines.append(f"objective = {m.objective}")
        lines.append(f"dim = {m.dim}")
        lines.append(f"epsilon = {_fmt(m.epsilon)}")
        lines.append(f"method = {m.method}")
        if isinstance(m.theta0, str):
            lines.append(f"theta0 = {m.theta0}")
        else:
            lines.append(f"theta0 = {_fmt_floats(m.theta0)}")
        if m.box_lower is not None:
            lines.append(f"box_lower = {_fmt_floats(m.box_lower)}")
            lines.append(f"box_upper = {_fmt_floats(m.box_upper)}")

    lines.append("")
    lines.append("[probe]")
    lines.append(f"style = {p.style}")
    if p.style == "explicit":
        lines.append(f"waveform = {p.waveform}")
        if p.log_rational_pairs is not None:
            pairs = ", ".join(f"{a}/{b}" for a, b in p.log_rational_pairs)
            lines.append(f"log_rational_pairs = {pairs}")
        else:
            lines.append(f"omega = {_fmt_floats(p.omega)}")
        if p.phi_cycles == "uniform":
            lines.append("phi_cycles = uniform")
        else:
            lines.append(f"phi_cycles = {_fmt_floats(p.phi_cycles)}")
        if p.v == "identity":
            lines.append("v = identity")
        else:
            rows = "; ".join(_fmt_floats(row) for row in p.v)
            lines.append(f"v = {rows}")
    elif p.style == "random_sin":
        lines.append(f"freq_range_rad = {_fmt_floats(p.freq_range_rad)}")
        lines.append(f"amplitude = {_fmt(p.amplitude)}")
        lines.append(f"phase_range_rad = {_fmt_floats(p.phase_range_rad)}")

    g, i = cfg.gain, cfg.integration
    lines.append("")
    lines.append("[gain]")
    lines.append(f"a0 = {_fmt(g.a0)}")
    lines.append(f"rho = {_fmt(g.rho)}")
    lines.append(f"capped = {_fmt(g.capped)}")
    lines.append("")
    lines.append("[integration]")
    lines.append(f"T = {_fmt(i.T)}")
    lines.append(f"Ts = {_fmt(i.Ts)}")
    lines.append(f"store_stride = {i.store_stride}")
    lines.append("")
    lines.append("[averaging]")
    lines.append(f"kappa = {_fmt(cfg.kappa)}")
    lines.append("")
    return "\n".join(lines)
