"""Experiment configuration: sectioned ``key = value`` files and validation."""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields

MODES = ("pofb", "popd-known", "popd-unknown", "diagnostics")
SOURCES = ("squares", "blobs", "mixed")
DEFAULT_DUMPS = (30, 50, 100, 300, 500, 1000, 3000)

# section of each field in the file format
_SECTIONS = {
    "experiment": ("mode", "N", "seed", "compute_objective", "timing"),
    "scene": ("source", "synthetic", "source_size", "crop_h", "crop_w", "motion_std", "integer_motion", "noise", "disp_noise"),
    "model": ("alpha", "fista_iters"),
    "steps": ("tau", "kappa", "gamma", "rho", "Lambda", "Theta"),
    "flow": ("theta", "lambda1", "T", "window", "kernel_std", "kernel_window"),
    "output": ("outdir", "dumps"),
}

SSIM_PARAMS = "gaussian window 11, std 1.5, k1 0.01, k2 0.03, range 1.0, valid region"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str = "popd-known"
    N: int = 300
    seed: int = 0
    compute_objective: bool = True
    # False writes ms = 0 so that repeated runs are byte-identical
    timing: bool = True
    source: str = ""
    synthetic: str = "squares"
    source_size: int = 256
    crop_h: int = 64
    crop_w: int = 64
    motion_std: float = 2.0
    integer_motion: bool = False
    noise: float = 0.5
    disp_noise: float = 0.05
    alpha: float = 1.0
    fista_iters: int = 10
    tau: float = 0.01
    kappa: float = 0.9
    gamma: float = 1.0
    rho: float = 0.0
    Lambda: float = 1.0
    Theta: float = 1.0
    # None means (crop_h * crop_w) * 100**3
    theta: float | None = None
    lambda1: float = 1.0
    T: float = 1.0
    window: int = 100
    kernel_std: float = 3.0
    kernel_window: int = 11
    outdir: str = "out"
    dumps: tuple = field(default=DEFAULT_DUMPS)

    @property
    def flow_theta(self):
        return float(self.crop_h * self.crop_w) * 100.0**3 if self.theta is None else float(self.theta)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if not self.source and self.synthetic not in SOURCES:
            raise ConfigError(f"synthetic must be one of {', '.join(SOURCES)}")
        for name in ("N", "crop_h", "crop_w", "source_size", "fista_iters", "window", "kernel_window"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("alpha", "tau", "kappa", "Lambda", "Theta", "T"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("motion_std", "noise", "disp_noise", "rho", "lambda1", "kernel_std"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if not self.kappa < 1:
            raise ConfigError("kappa must lie in (0, 1)")
        if self.theta is not None and self.theta < 0:
            raise ConfigError("theta must be non-negative")
        if any(d < 1 for d in self.dumps):
            raise ConfigError("frame dumps are 1-based frame indices")
        return self


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name, raw):
    t = _TYPES[name]
    raw = raw.strip()
    try:
        if name == "dumps":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if name == "theta":
            return None if raw.lower() in ("", "auto", "none") else float(raw)
        if t == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text, base=None):
    """Parse config text on top of ``base`` (defaults if omitted)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    values = asdict(base) if base is not None else {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _coerce(key, raw)
    return ExperimentConfig(**values).validate()


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return " ".join(str(i) for i in v)
    return repr(v) if isinstance(v, float) else str(v)


def snapshot(cfg: ExperimentConfig):
    """Serialise ``cfg`` in the file format; ``parse_config(snapshot(c)) == c``."""
    lines = [f"# ssim: {SSIM_PARAMS}"]
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_fmt(getattr(cfg, k))}" for k in keys)
        lines.append("")
    return "\n".join(lines)
