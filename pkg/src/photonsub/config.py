"""Shared numeric tolerances and error types."""
from dataclasses import dataclass

__version__ = "0.1.0"

# Seed used by the CLI when --seed is not given. Fixed so runs are reproducible;
# wall-clock entropy is never used anywhere.
DEFAULT_SEED = 20240901


@dataclass(frozen=True)
class Config:
    """Numeric knobs shared across modules.

    tail_tol     relative weight at which pair-number truncation stops
    oracle_tol   agreement required between independent probability routes
    zero_band    half-width of the band treated as zero in witness verdicts
    j_cap        hard cap on the pair-number truncation index
    """
    tail_tol: float = 1e-9
    oracle_tol: float = 1e-10
    zero_band: float = 1e-12
    j_cap: int = 200


DEFAULTS = Config()


class DomainError(ValueError):
    """Input outside the validity domain of an operation."""


class TruncationError(RuntimeError):
    """Pair-number series did not meet the tail tolerance within the hard cap."""


class UndefinedWitnessError(RuntimeError):
    """Witness is undefined for this distribution (e.g. zero cross moment)."""
