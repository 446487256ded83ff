"""Flat ``section.key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Every key of a pipeline config
must be known; unknown or duplicated keys are rejected with the file and
line number.  Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import glob
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .depth_occlusion import DensifyParams, VisibilityParams
from .errors import ParseError
from .imaging import CannyParams
from .lidar_features import SplitParams
from .pose_optimizer import RobustLoss, SolverSettings
from .cost_map import DEFAULT_TRUNCATION


class ConfigError(ParseError):
    pass


def parse_entries(text: str, source="<config>") -> dict[str, tuple[str, int]]:
    """``key -> (raw value, line number)``."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(source, lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(source, lineno, "empty key")
        if key in entries:
            raise ConfigError(source, lineno, f"duplicate key {key!r} (first on line {entries[key][1]})")
        entries[key] = (value, lineno)
    return entries


def read_entries(path) -> dict[str, tuple[str, int]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, None, f"cannot read: {exc.strerror}") from None
    return parse_entries(text, path)


def scalar(entries, key, cast, default, source="<config>"):
    if key not in entries:
        return default
    value, line = entries[key]
    try:
        return _cast(value, cast)
    except ValueError:
        raise ConfigError(source, line, f"bad value for {key}: {value!r}") from None


def indexed(entries, prefix):
    """``(index, (value, line))`` for keys ``prefix.N`` in numeric order."""
    out = []
    for key, item in entries.items():
        head, _, tail = key.rpartition(".")
        if head == prefix and tail.isdigit():
            out.append((int(tail), item))
    return sorted(out)


def _cast(value: str, cast):
    if cast is bool:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(value)
    return cast(value)


@dataclass(frozen=True)
class BenchSettings:
    seeds: int = 20
    first_seed: int = 0
    perturbations: tuple[tuple[float, float], ...] = ((2.0, 0.05),)
    range_noise: float = 0.0
    image_noise: float = 0.0
    outlier_fraction: float = 0.0
    angular_resolution_deg: float = 0.05
    workers: int = 1
    output: str = "bench.csv"


@dataclass(frozen=True)
class PipelineConfig:
    canny: CannyParams = CannyParams()
    split: SplitParams = SplitParams()
    truncation: float = DEFAULT_TRUNCATION
    loss: RobustLoss = RobustLoss()
    solver: SolverSettings = SolverSettings()
    densify: DensifyParams = DensifyParams()
    visibility: VisibilityParams = VisibilityParams()
    bench: BenchSettings = BenchSettings()
    image: Path | None = None
    intrinsics: Path | None = None
    pose: Path | None = None
    frames: tuple[Path, ...] = ()
    output_dir: Path = Path("out")
    base_dir: Path = field(default=Path("."), compare=False)


_SECTIONS = {
    "canny": "canny",
    "split": "split",
    "loss": "loss",
    "solver": "solver",
    "densify": "densify",
    "visibility": "visibility",
    "bench": "bench",
}


def _parse_perturbations(value: str):
    out = []
    for item in value.replace(",", " ").split():
        rot, _, trans = item.partition(":")
        out.append((float(rot), float(trans)))
    if not out:
        raise ValueError(value)
    return tuple(out)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    return config_from_entries(read_entries(path), path)


def config_from_entries(entries, source="<config>") -> PipelineConfig:
    source_path = Path(str(source))
    base = source_path.parent if str(source) != "<config>" else Path(".")
    cfg = PipelineConfig(base_dir=base)
    groups: dict[str, dict] = {name: {} for name in _SECTIONS}
    top = {}
    for key, (value, line) in entries.items():
        section, _, name = key.partition(".")
        if section in _SECTIONS:
            target = getattr(cfg, _SECTIONS[section])
            types = {f.name: f.type for f in fields(target)}
            if name not in types:
                raise ConfigError(source, line, f"unknown key {key!r}")
            try:
                if section == "bench" and name == "perturbations":
                    groups[section][name] = _parse_perturbations(value)
                else:
                    caster = type(getattr(target, name))
                    groups[section][name] = _cast(value, caster)
            except ValueError:
                raise ConfigError(source, line, f"bad value for {key}: {value!r}") from None
        elif key in ("cost.truncation",):
            try:
                top["truncation"] = float(value)
            except ValueError:
                raise ConfigError(source, line, f"bad value for {key}: {value!r}") from None
        elif key in ("input.image", "input.intrinsics", "input.pose"):
            top[name] = base / value
        elif key == "input.frames":
            top["frames"] = _expand_frames(base, value, source, line)
        elif key == "output.dir":
            top["output_dir"] = base / value
        else:
            raise ConfigError(source, line, f"unknown key {key!r}")
    try:
        updates = {_SECTIONS[s]: replace(getattr(cfg, _SECTIONS[s]), **kw) for s, kw in groups.items() if kw}
    except ValueError as exc:
        raise ConfigError(source, None, str(exc)) from None
    if "output_dir" not in top:
        top["output_dir"] = base / "out"
    return replace(cfg, **updates, **top)


def _expand_frames(base: Path, value: str, source, line) -> tuple[Path, ...]:
    out = []
    for pattern in value.split():
        matches = sorted(glob.glob(str(base / pattern)))
        if not matches:
            raise ConfigError(source, line, f"no frame files match {pattern!r}")
        out += [Path(m) for m in matches]
    return tuple(out)


def config_to_text(cfg: PipelineConfig, relative_to: Path | None = None) -> str:
    """Serialize every tunable; paths are written relative to ``relative_to`` when given."""

    def rel(p: Path) -> str:
        if relative_to is None:
            return str(p)
        try:
            return str(Path(p).resolve().relative_to(Path(relative_to).resolve()))
        except ValueError:
            return str(Path(p).resolve())

    lines = []
    for section, attr in _SECTIONS.items():
        obj = getattr(cfg, attr)
        for f in fields(obj):
            value = getattr(obj, f.name)
            if section == "bench" and f.name == "perturbations":
                value = ",".join(f"{r:g}:{t:g}" for r, t in value)
            lines.append(f"{section}.{f.name} = {value}")
    lines.append(f"cost.truncation = {cfg.truncation}")
    if cfg.image is not None:
        lines.append(f"input.image = {rel(cfg.image)}")
    if cfg.intrinsics is not None:
        lines.append(f"input.intrinsics = {rel(cfg.intrinsics)}")
    if cfg.pose is not None:
        lines.append(f"input.pose = {rel(cfg.pose)}")
    if cfg.frames:
        lines.append("input.frames = " + " ".join(rel(p) for p in cfg.frames))
    lines.append(f"output.dir = {rel(cfg.output_dir)}")
    return "\n".join(lines) + "\n"
