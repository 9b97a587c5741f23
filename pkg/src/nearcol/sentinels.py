"""Explicit non-numeric results."""

import enum


class Sentinel(enum.Enum):
    UNBOUNDED = "unbounded"
    BEYOND_HORIZON = "beyond_horizon"
    INFEASIBLE = "infeasible"

    def __repr__(self) -> str:
        return self.name


UNBOUNDED = Sentinel.UNBOUNDED
BEYOND_HORIZON = Sentinel.BEYOND_HORIZON
INFEASIBLE = Sentinel.INFEASIBLE
