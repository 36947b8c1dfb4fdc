from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum


class Side(str, Enum):
    SUPPLY = "supply"
    DEMAND = "demand"

    @property
    def sign(self) -> float:
        return 1.0 if self is Side.SUPPLY else -1.0


SIDES = (Side.SUPPLY, Side.DEMAND)
INF = math.inf


@dataclass(frozen=True)
class ModelConfig:
    """Risk budget, volume set and price set shared by all bid models.

    Volumes are in MWh, prices and ``rho_tilde`` in $/MWh.  Price bounds and
    minimum segment distances are given per side as ``(supply, demand)``.
    """

    alpha: float = 0.05
    rho_tilde: float = 1.0
    total_volume: float = 1000.0
    per_position_cap: float = 50.0
    net_volume_bounds: tuple[float, float] = (-INF, INF)
    supply_price_bounds: tuple[float, float] = (-INF, INF)
    demand_price_bounds: tuple[float, float] = (-INF, INF)
    min_segment_distance: tuple[float, float] = (0.0, 0.0)
    max_segments: int = 10
    min_segment_volume: float = 1.0
    extraction_eps: float = 1e-9
    # submission prices for volume-only bids: market floor / cap
    v_supply_price: float = -1000.0
    v_demand_price: float = 1000.0
    v_allow_double_positions: bool = False
    milp_max_binaries: int = 20_000
    lp_backend: str = "auto"
    milp_backend: str = "simplex"
    tol: float = 1e-7
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.total_volume > 0:
            raise ValueError("total_volume must be positive")
        if not self.per_position_cap > 0:
            raise ValueError("per_position_cap must be positive")
        for lo, hi in (self.supply_price_bounds, self.demand_price_bounds, self.net_volume_bounds):
            if lo > hi:
                raise ValueError("lower bound exceeds upper bound")
        if self.max_segments < 0:
            raise ValueError("max_segments must be non-negative")

    def price_bounds(self, side: Side) -> tuple[float, float]:
        return self.supply_price_bounds if Side(side) is Side.SUPPLY else self.demand_price_bounds

    def min_distance(self, side: Side) -> float:
        return self.min_segment_distance[0 if Side(side) is Side.SUPPLY else 1]

    @property
    def rho(self) -> float:
        """Absolute ES bound for a model spending the whole volume budget."""
        return self.total_volume * self.rho_tilde

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d
