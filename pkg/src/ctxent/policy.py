"""Numeric policy: the single tolerance record threaded through every module."""

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10
    proj: float = 1e-10
    unitary: float = 1e-10
    trace: float = 1e-10
    psd: float = 1e-9
    eig: float = 1e-9
    prob: float = 1e-9
    inv: float = 1e-12
    dist: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"tolerance {f.name} must be positive")

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)


DEFAULT = Tolerances()
