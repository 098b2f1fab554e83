"""Per-region physical parameters."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError


@dataclass(frozen=True)
class Region:
    """Magnitude ``m``, wave velocity ``v``, delay ``sigma`` and elastic coefficient ``c``."""

    id: int
    m: float
    v: float
    sigma: float
    c: float = 0.0

    def __post_init__(self):
        for name in ("m", "sigma"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise DomainError(f"region {self.id}: {name} must be > 0, got {val}")
        for name in ("v", "c"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise DomainError(f"region {self.id}: {name} must be >= 0, got {val}")

    @property
    def eta_eps(self) -> float:
        """Mean released energy ``m / sigma``."""
        return self.m / self.sigma

    @property
    def mean_accumulation(self) -> float:
        """Mean accumulation time ``1 / sigma``."""
        return 1.0 / self.sigma

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Region":
        unknown = set(d) - {"id", "m", "v", "sigma", "c"}
        if unknown:
            raise DomainError(f"unknown region keys: {sorted(unknown)}")
        return cls(id=int(d["id"]), m=float(d["m"]), v=float(d["v"]),
                   sigma=float(d["sigma"]), c=float(d.get("c", 0.0)))
