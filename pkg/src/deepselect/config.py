"""Run configuration: every tunable of a training or fitting run.

Configs come from key=value text files and/or CLI flags (flags win).
Field names in the file match the dataclass exactly; the architecture is
a comma-separated width list.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from deepselect.dpm import DpmHyper

LOSS_KINDS = ("ajsd", "kld", "abc")

__all__ = ["RunConfig", "parse_config_file", "config_from_sources", "LOSS_KINDS"]


@dataclass
class RunConfig:
    loss: str = "ajsd"              # ajsd (DPM), kld (GMM), abc (k-means point estimate)
    alpha: float = 0.65
    lambda3: float = 1.0
    learning_rate: float = 0.01
    mse_epochs: int = 50
    reg_epochs: int = 30
    cycles: int = 3
    truncation: int = 50            # DPM truncation tier (50 / 100 / 200)
    clusters: int = 10              # K for the kld / abc paths
    omega0: float = 2000.0
    a0: float = 1.25
    b0: float = 0.25
    m0: float = 1.0
    m0_mode: str = "fixed"          # fixed | data-mean
    lambda0: float = 0.5
    seed: int | None = None
    arch: tuple = (512, 384, 256, 128)
    sigma_head: bool = False
    prune_threshold: float = 0.05
    batch_size: int = 64
    fit_iters: int = 300

    def validate(self) -> "RunConfig":
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if not 0.0 <= self.lambda3 <= 1.0:
            raise ValueError(f"lambda3 must lie in [0, 1], got {self.lambda3}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        for name in ("mse_epochs", "reg_epochs", "cycles"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.truncation < 1 or self.clusters < 1:
            raise ValueError("truncation and clusters must be >= 1")
        if self.m0_mode not in ("fixed", "data-mean"):
            raise ValueError(f"m0_mode must be 'fixed' or 'data-mean', got {self.m0_mode!r}")
        if not 0.0 < self.prune_threshold < 1.0:
            raise ValueError("prune_threshold must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.fit_iters < 1:
            raise ValueError("fit_iters must be >= 1")
        if len(self.arch) < 2 or any(int(d) < 1 for d in self.arch):
            raise ValueError(f"arch needs at least (input, latent) positive widths, got {self.arch}")
        DpmHyper(self.omega0, self.a0, self.b0, self.m0, self.lambda0)
        return self

    def hyper(self, data=None) -> DpmHyper:
        """Mixture prior; in data-mean mode m0 becomes the column mean."""
        m0 = self.m0
        if self.m0_mode == "data-mean":
            if data is None:
                raise ValueError("data-mean m0 requested but no data supplied")
            m0 = data.mean(axis=0)
        return DpmHyper(self.omega0, self.a0, self.b0, m0, self.lambda0)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name == "arch":
        return tuple(int(tok) for tok in raw.replace(",", " ").split())
    if name in ("loss", "m0_mode"):
        return raw
    if name == "sigma_head":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"sigma_head must be a boolean, got {raw!r}")
    if name in ("mse_epochs", "reg_epochs", "cycles", "truncation", "clusters", "seed", "batch_size", "fit_iters"):
        return int(raw)
    return float(raw)


def parse_config_file(path) -> dict:
    """Read key=value lines ('#' comments and blanks ignored)."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, raw = line.split("=", 1)
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def config_from_sources(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated config from file values with flag overrides on top."""
    merged = dict(file_values or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = set(merged) - set(_FIELD_TYPES)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return replace(RunConfig(), **merged).validate()
