"""Shift settings, integer cell plans, and deterministic stratified draws.

A shift setting fixes the training-side provenance-conditional positive
rates plus the two cross-split constants: the z=1 proportion (held equal
in train and test) and the overall positive rate (likewise held equal).
The test-side rates follow from the target alpha ratio by solving the two
linear constraints in closed form. Plans turn rates into integer counts
per (y, z) cell; draws sample records without replacement, disjointly
across train and test, from counter-based per-cell random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus

__all__ = [
    "CELLS",
    "ShiftSetting",
    "DerivedRates",
    "CellPlan",
    "FeasibilityReport",
    "CellDeficit",
    "DegenerateSettingError",
    "InfeasibleRatesError",
    "InfeasiblePlanError",
    "derive_rates",
    "solve_test_rates",
    "plan_cells",
    "check_feasibility",
    "draw_split",
    "seed_tuple",
]

# Fixed (y, z) cell order used everywhere counts are serialized.
CELLS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))


class DegenerateSettingError(ValueError):
    """Setting parameters outside their valid open ranges."""


class InfeasibleRatesError(ValueError):
    """Solved test rates left [0, 1]; carries both computed values."""

    def __init__(self, p_y1_z0: float, p_y1_z1: float):
        self.p_y1_z0 = p_y1_z0
        self.p_y1_z1 = p_y1_z1
        super().__init__(
            f"test rates outside [0, 1]: p(y=1|z=0)={p_y1_z0!r}, p(y=1|z=1)={p_y1_z1!r}"
        )


class InfeasiblePlanError(ValueError):
    """A draw was requested for a plan the corpus cannot supply."""


@dataclass(frozen=True)
class ShiftSetting:
    """One sweep cell: train rates, cross-split constants, and set sizes."""

    p_train_y1_z0: float
    p_train_y1_z1: float
    cz: float
    alpha_test: float
    n_train: int
    n_test: int

    def __post_init__(self) -> None:
        for name in ("p_train_y1_z0", "p_train_y1_z1", "cz"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DegenerateSettingError(f"{name}={value!r} outside [0, 1]")
        if not self.alpha_test > 0.0:
            raise DegenerateSettingError(f"alpha_test={self.alpha_test!r} must be positive")
        if self.n_train < 1 or self.n_test < 1:
            raise DegenerateSettingError("n_train and n_test must be positive integers")


@dataclass(frozen=True)
class DerivedRates:
    cy: float
    alpha_train: float


def derive_rates(setting: ShiftSetting) -> DerivedRates:
    """Overall positive rate and train-side alpha implied by the setting.

    cy = (1-cz) * p(y=1|z=0) + cz * p(y=1|z=1); alpha_train is the ratio
    of the two train rates and is undefined when the denominator is zero.
    """
    p0, p1, cz = setting.p_train_y1_z0, setting.p_train_y1_z1, setting.cz
    if p0 == 0.0:
        raise DegenerateSettingError("alpha_train undefined: p_train(y=1|z=0) = 0")
    cy = (1.0 - cz) * p0 + cz * p1
    if not 0.0 < cy < 1.0:
        raise DegenerateSettingError(f"degenerate setting: cy={cy!r} not inside (0, 1)")
    return DerivedRates(cy=cy, alpha_train=p1 / p0)


def solve_test_rates(cz: float, cy: float, alpha_test: float) -> tuple[float, float]:
    """Test-side rates satisfying the mixture and ratio constraints.

    Solves (1-cz)*p0 + cz*p1 = cy together with p1 = alpha_test * p0,
    giving p0 = cy / ((1-cz) + cz*alpha_test). Raises
    :class:`InfeasibleRatesError` exactly when a solved rate leaves [0, 1].
    """
    if not 0.0 < cz < 1.0:
        raise DegenerateSettingError(f"cz={cz!r} must be inside (0, 1)")
    if not 0.0 < cy < 1.0:
        raise DegenerateSettingError(f"cy={cy!r} must be inside (0, 1)")
    if not alpha_test > 0.0:
        raise DegenerateSettingError(f"alpha_test={alpha_test!r} must be positive")
    p0 = cy / ((1.0 - cz) + cz * alpha_test)
    p1 = alpha_test * p0
    if not (0.0 <= p0 <= 1.0 and 0.0 <= p1 <= 1.0):
        raise InfeasibleRatesError(p0, p1)
    return p0, p1


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def plan_cells(
    n: int, cz: float, p_y1_z0: float, p_y1_z1: float
) -> dict[tuple[int, int], int]:
    """Integer counts per (y, z) cell for one split of size n.

    Two-stage rounding: the z-marginal first (nearest integer to n*cz,
    ties up), then positives within each z (same rule), negatives as the
    remainder. Every achieved proportion lands within one count of its
    target and the counts sum to n exactly.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    for name, p in (("cz", cz), ("p_y1_z0", p_y1_z0), ("p_y1_z1", p_y1_z1)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name}={p!r} outside [0, 1]")
    n_z1 = _round_half_up(n * cz)
    n_z0 = n - n_z1
    pos_z0 = _round_half_up(n_z0 * p_y1_z0)
    pos_z1 = _round_half_up(n_z1 * p_y1_z1)
    return {
        (0, 0): n_z0 - pos_z0,
        (0, 1): n_z1 - pos_z1,
        (1, 0): pos_z0,
        (1, 1): pos_z1,
    }


@dataclass(frozen=True)
class CellPlan:
    """Planned per-cell counts for both splits of one setting."""

    train: Mapping[tuple[int, int], int]
    test: Mapping[tuple[int, int], int]

    def __post_init__(self) -> None:
        for split_name, counts in (("train", self.train), ("test", self.test)):
            if set(counts) != set(CELLS):
                raise ValueError(f"{split_name} counts must cover all four (y, z) cells")
            if any(c < 0 for c in counts.values()):
                raise ValueError(f"{split_name} counts must be non-negative")
        object.__setattr__(self, "train", dict(self.train))
        object.__setattr__(self, "test", dict(self.test))

    @property
    def n_train(self) -> int:
        return sum(self.train.values())

    @property
    def n_test(self) -> int:
        return sum(self.test.values())

    def needed(self) -> dict[tuple[int, int], int]:
        """Combined train+test demand per cell (disjoint draws)."""
        return {cell: self.train[cell] + self.test[cell] for cell in CELLS}


@dataclass(frozen=True)
class CellDeficit:
    cell: tuple[int, int]
    needed: int
    available: int

    @property
    def short(self) -> int:
        return self.needed - self.available


@dataclass(frozen=True)
class FeasibilityReport:
    deficits: tuple[CellDeficit, ...]

    @property
    def ok(self) -> bool:
        return not self.deficits

    def describe(self) -> str:
        if self.ok:
            return "ok"
        parts = [
            f"(y={d.cell[0]},z={d.cell[1]}): {d.needed} needed, "
            f"{d.available} available, short {d.short}"
            for d in self.deficits
        ]
        return "corpus deficit: " + "; ".join(parts)


def check_feasibility(
    plan: CellPlan, corpus_counts: Mapping[tuple[int, int], int]
) -> FeasibilityReport:
    """Whether every cell's train+test demand fits the corpus supply."""
    deficits = []
    for cell in CELLS:
        needed = plan.train[cell] + plan.test[cell]
        available = corpus_counts.get(cell, 0)
        if needed > available:
            deficits.append(CellDeficit(cell=cell, needed=needed, available=available))
    return FeasibilityReport(deficits=tuple(deficits))


def seed_tuple(base_seed: int, setting_index: int, repeat_index: int) -> tuple[int, int, int]:
    """Key for one sweep cell's random stream.

    Streams are derived per (base seed, setting index, repeat index), so
    parallel and serial sweep execution draw identical samples.
    """
    return (int(base_seed), int(setting_index), int(repeat_index))


def _cell_rng(seed: Sequence[int], y: int, z: int) -> np.random.Generator:
    # Philox is counter-based: the (seed..., y, z) key alone fixes the
    # stream, with no dependence on draw order elsewhere.
    ss = np.random.SeedSequence(tuple(int(s) for s in seed) + (y, z))
    return np.random.Generator(np.random.Philox(ss))


def draw_split(
    corpus: Corpus, plan: CellPlan, seed: int | Sequence[int]
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Draw disjoint train/test id sets matching the plan exactly.

    Within each (y, z) cell, records are sampled uniformly without
    replacement from the cell's sorted id list: one permutation per cell
    supplies the train block first and the test block next, so the two
    splits can never overlap. Identical (corpus, plan, seed) give
    identical output on every platform.
    """
    if isinstance(seed, (int, np.integer)):
        seed = (int(seed),)
    cell_ids = _cell_id_arrays(corpus)
    train_ids: list[str] = []
    test_ids: list[str] = []
    for y, z in CELLS:
        want_train = plan.train[(y, z)]
        want_test = plan.test[(y, z)]
        if want_train == 0 and want_test == 0:
            continue
        members = cell_ids[(y, z)]
        if want_train + want_test > len(members):
            raise InfeasiblePlanError(
                f"cell (y={y},z={z}) needs {want_train + want_test} records, "
                f"corpus has {len(members)}"
            )
        perm = _cell_rng(seed, y, z).permutation(len(members))
        chosen = members[perm[: want_train + want_test]]
        train_ids.extend(chosen[:want_train].tolist())
        test_ids.extend(chosen[want_train:].tolist())
    return tuple(train_ids), tuple(test_ids)


def _cell_id_arrays(corpus: Corpus) -> dict[tuple[int, int], np.ndarray]:
    cached = getattr(corpus, "_cell_id_array_cache", None)
    if cached is None:
        cached = {
            cell: np.asarray(ids, dtype=object)
            for cell, ids in corpus.cell_ids().items()
        }
        object.__setattr__(corpus, "_cell_id_array_cache", cached)
    return cached
