"""Energy decomposition, electricity pricing, and cost accounting.

Total energy per interval splits into processor, cooling and extra
components.  The processor part follows a linear power model between
idle and peak wattage; cooling and extra overheads are proportional to
it, with a flat per-migration penalty folded into extra.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .datacenter import DatacenterState
from .errors import CoverageError, DomainError, TraceFormatError

WATTS_PER_KW = 1000.0


@dataclass(frozen=True)
class PowerModel:
    idle_power: float = 100.0  # watts
    peak_power: float = 200.0
    cooling_coefficient: float = 0.3  # cooling kWh per processor kWh
    extra_coefficient: float = 0.05  # switches/lighting kWh per processor kWh
    migration_penalty: float = 0.01  # kWh per migration

    def __post_init__(self):
        if not (0 < self.idle_power <= self.peak_power):
            raise DomainError("need 0 < idle_power <= peak_power")
        if min(self.cooling_coefficient, self.extra_coefficient, self.migration_penalty) < 0:
            raise DomainError("coefficients and penalty must be >= 0")


DEFAULT_POWER_MODEL = PowerModel()


@dataclass(frozen=True)
class EnergyBreakdown:
    processor: float  # kWh
    cooling: float
    extra: float
    total: float
    cost: float = 0.0  # currency units

    @classmethod
    def make(cls, processor: float, cooling: float, extra: float, cost: float = 0.0):
        return cls(processor, cooling, extra, processor + cooling + extra, cost)

    def plus(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        return EnergyBreakdown.make(
            self.processor + other.processor,
            self.cooling + other.cooling,
            self.extra + other.extra,
            self.cost + other.cost,
        )


ZERO_ENERGY = EnergyBreakdown.make(0.0, 0.0, 0.0)


def pm_power(utilisation: float, powered_on: bool, model: PowerModel = DEFAULT_POWER_MODEL) -> float:
    """Instantaneous draw in watts: linear between idle and peak, 0 when off."""
    if not 0.0 <= utilisation <= 1.0:
        raise DomainError(f"utilisation {utilisation} outside [0, 1]")
    if not powered_on:
        return 0.0
    return model.idle_power + (model.peak_power - model.idle_power) * utilisation


def step_energy(
    state: DatacenterState,
    model: PowerModel = DEFAULT_POWER_MODEL,
    migrations: int | Sequence[str] = 0,
    dt: float = 1.0,
) -> tuple[dict[str, EnergyBreakdown], EnergyBreakdown]:
    """Energy drawn over one interval, per PM and aggregated.

    `migrations` is either a bare count or the list of destination PM ids;
    with ids, each 0.01 kWh (default) penalty lands on the destination's
    extra component so it can be billed at that PM's location.
    """
    if dt <= 0:
        raise DomainError("dt must be > 0")
    if isinstance(migrations, int):
        migration_count = migrations
        dst_ids: tuple[str, ...] = ()
    else:
        dst_ids = tuple(migrations)
        migration_count = len(dst_ids)

    per_pm: dict[str, EnergyBreakdown] = {}
    for pm in state.pms:
        used_cores = sum(
            state.vms[v].request.cores
            for v, placed in state.placements.items()
            if placed == pm.id
        )
        watts = pm_power(used_cores / pm.cores, pm.id in state.powered_on, model)
        processor = watts * dt / WATTS_PER_KW
        cooling = model.cooling_coefficient * processor
        extra = model.extra_coefficient * processor
        extra += model.migration_penalty * sum(1 for d in dst_ids if d == pm.id)
        per_pm[pm.id] = EnergyBreakdown.make(processor, cooling, extra)

    agg_processor = sum(b.processor for b in per_pm.values())
    agg_cooling = sum(b.cooling for b in per_pm.values())
    agg_extra = sum(b.extra for b in per_pm.values())
    if not dst_ids:
        # Bare count: penalties appear in the aggregate only.
        agg_extra += model.migration_penalty * migration_count
    aggregate = EnergyBreakdown.make(agg_processor, agg_cooling, agg_extra)
    return per_pm, aggregate


@dataclass(frozen=True)
class PriceSeries:
    """Hourly electricity prices per location over [0, horizon)."""

    prices: dict[str, tuple[float, ...]]
    horizon: int

    def __post_init__(self):
        for location, series in self.prices.items():
            if len(series) != self.horizon:
                raise DomainError(
                    f"location {location!r} covers {len(series)} hours, horizon is {self.horizon}"
                )
            if any(p < 0 for p in series):
                raise DomainError(f"location {location!r} has a negative price")

    def price(self, location: str, hour: int) -> float:
        series = self.prices.get(location)
        if series is None or not 0 <= hour < self.horizon:
            raise CoverageError(location, hour)
        return series[hour]

    @property
    def locations(self) -> tuple[str, ...]:
        return tuple(self.prices)


def generate_price_series(locations: Sequence[str], horizon: int, seed: int) -> PriceSeries:
    """Per-location daily sinusoid around 0.10/kWh with seeded phase and noise."""
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    prices: dict[str, tuple[float, ...]] = {}
    for location in locations:
        phase = float(rng.uniform(0.0, 24.0))
        series = []
        for hour in range(horizon):
            base = 0.10 + 0.04 * math.sin(2.0 * math.pi * (hour + phase) / 24.0)
            noise = float(rng.uniform(-0.01, 0.01))
            series.append(max(0.01, base + noise))
        prices[location] = tuple(series)
    return PriceSeries(prices=prices, horizon=horizon)


def load_price_series(content: bytes | str) -> PriceSeries:
    """Parse the `hour,<loc>,...` CSV format, checking coverage and signs."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    rows = list(csv.reader(io.StringIO(content)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise TraceFormatError("empty price file")
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "hour" or len(header) < 2:
        raise TraceFormatError("header must be 'hour,<location>,...'", line=1)
    locations = header[1:]

    columns: dict[str, list[float]] = {loc: [] for loc in locations}
    for lineno, row in enumerate(rows[1:], start=2):
        expected_hour = lineno - 2
        if len(row) != len(header):
            raise TraceFormatError(
                f"expected {len(header)} cells, got {len(row)}", line=lineno
            )
        try:
            hour = int(row[0])
            values = [float(c) for c in row[1:]]
        except ValueError:
            raise TraceFormatError("non-numeric cell", line=lineno) from None
        if hour != expected_hour:
            raise TraceFormatError(
                f"missing hour {expected_hour} (found {hour})", line=lineno
            )
        for loc, value in zip(locations, values):
            if value < 0:
                raise TraceFormatError(f"negative price for {loc!r}", line=lineno)
            columns[loc].append(value)

    horizon = len(rows) - 1
    if horizon == 0:
        raise TraceFormatError("price file has a header but no rows")
    return PriceSeries(
        prices={loc: tuple(vals) for loc, vals in columns.items()}, horizon=horizon
    )


def price_series_to_csv(series: PriceSeries) -> str:
    locations = list(series.prices)
    lines = ["hour," + ",".join(locations)]
    for hour in range(series.horizon):
        cells = [str(hour)] + [repr(series.prices[loc][hour]) for loc in locations]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def energy_cost(
    series: Iterable[tuple[str, str, int, EnergyBreakdown]], prices: PriceSeries
) -> float:
    """Total cost of a (pm, location, hour, breakdown) series at the given prices."""
    cost = 0.0
    for _pm, location, hour, breakdown in series:
        cost += breakdown.total * prices.price(location, hour)
    return cost
