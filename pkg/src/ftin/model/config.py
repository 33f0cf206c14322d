"""Architecture configuration for the FTIN network."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

from ..errors import PreconditionError

ACTIVATIONS = ("relu", "gelu", "tanh", "identity")

# Table-III ablation rows: (fdl_enabled, tdl_enabled)
VARIANTS = {
    "i": (False, False),
    "ii": (True, False),
    "iii": (False, True),
    "iv": (True, True),
}


@dataclass(frozen=True)
class BackboneConfig:
    channels: tuple[int, ...] = (64, 128, 192, 256)
    strides: tuple[int, ...] = (1, 2, 2, 2)
    blocks_per_stage: int = 2
    kernel_size: int = 3


@dataclass(frozen=True)
class SlstmConfig:
    hidden_size: int = 128
    num_layers: int = 1


@dataclass(frozen=True)
class FtinConfig:
    L: int = 200
    C: int = 6
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    d: int = 32
    n_freq_layers: int = 2
    l_fre: int = 64
    fdl_enabled: bool = True
    tdl_enabled: bool = True
    slstm: SlstmConfig = field(default_factory=SlstmConfig)
    head_widths: tuple[int, int, int] = (128, 64, 2)
    activation: str = "relu"

    def __post_init__(self):
        # accept lists/dicts from JSON
        if isinstance(self.backbone, dict):
            b = {k: tuple(v) if isinstance(v, list) else v for k, v in self.backbone.items()}
            object.__setattr__(self, "backbone", BackboneConfig(**b))
        if isinstance(self.slstm, dict):
            object.__setattr__(self, "slstm", SlstmConfig(**self.slstm))
        object.__setattr__(self, "head_widths", tuple(self.head_widths))
        self.validate()

    def validate(self) -> None:
        if self.C != 6:
            raise PreconditionError("C must be 6 (3-axis accelerometer + 3-axis gyroscope)")
        if self.d < 1:
            raise PreconditionError("embedding dim d must be >= 1")
        if self.n_freq_layers < 1:
            raise PreconditionError("n_freq_layers must be >= 1")
        if len(self.head_widths) != 3 or self.head_widths[-1] != 2:
            raise PreconditionError("head must have exactly 3 layers ending in 2 outputs")
        if len(self.backbone.channels) != len(self.backbone.strides):
            raise PreconditionError("backbone channels and strides must have equal length")
        if self.activation not in ACTIVATIONS:
            raise PreconditionError(f"activation must be one of {ACTIVATIONS}")
        if self.l_res < 2:
            raise PreconditionError("window too short for the configured backbone strides")

    @property
    def c_res(self) -> int:
        return self.backbone.channels[-1]

    @property
    def l_res(self) -> int:
        n = self.L
        for s in self.backbone.strides:
            n = (n - 1) // s + 1
        return n

    @property
    def c_fre(self) -> int:
        return self.c_res

    def variant(self, name: str) -> "FtinConfig":
        fdl, tdl = VARIANTS[name]
        return replace(self, fdl_enabled=fdl, tdl_enabled=tdl)

    @property
    def variant_name(self) -> str:
        return {v: k for k, v in VARIANTS.items()}[(self.fdl_enabled, self.tdl_enabled)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["backbone"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["backbone"].items()}
        d["head_widths"] = list(self.head_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FtinConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise PreconditionError(f"unknown model config field(s): {sorted(unknown)}")
        return cls(**d)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def desk_config(**overrides) -> FtinConfig:
    """Narrow network for single-core desk-scale experiments."""
    base = FtinConfig(
        backbone=BackboneConfig(channels=(32, 48, 64, 96)),
        d=16,
        l_fre=32,
        slstm=SlstmConfig(hidden_size=64),
        head_widths=(64, 32, 2),
    )
    return replace(base, **overrides)
