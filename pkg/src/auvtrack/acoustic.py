"""Forward acoustic model: arrival times and TDOA observations."""

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .linalg import vec3

DEFAULT_SOUND_SPEED = 1500.0  # m/s, nominal seawater

# Buoy layout used by the reference experiments (meters).
PAPER_BUOYS = (
    (-800.0, -200.0, 3.0),
    (-200.0, -800.0, 0.0),
    (-800.0, -1000.0, 0.0),
    (0.0, 0.0, 0.0),
    (-500.0, -500.0, -500.0),
)


@dataclass(frozen=True, eq=False)
class BuoyArray:
    """Reference buoy ``s0`` followed by the auxiliary buoys ``s1..s{N-1}``.

    Coincident buoys are rejected unless ``allow_duplicates`` is set (used to
    model a repeated hydrophone reading in least-squares weighting tests).
    """

    reference: np.ndarray
    auxiliaries: np.ndarray
    allow_duplicates: bool = False

    def __post_init__(self):
        ref = vec3(self.reference)
        aux = np.asarray(self.auxiliaries, dtype=float).reshape(-1, 3)
        if aux.shape[0] < 1:
            raise PreconditionError("at least one auxiliary buoy is required")
        if not np.all(np.isfinite(aux)):
            raise PreconditionError("buoy coordinates must be finite")
        pos = np.vstack([ref, aux])
        gaps = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        np.fill_diagonal(gaps, np.inf)
        if np.min(gaps) == 0.0 and not self.allow_duplicates:
            raise PreconditionError("two buoys coincide")
        ref.setflags(write=False)
        aux.setflags(write=False)
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "auxiliaries", aux)

    @classmethod
    def from_positions(cls, positions):
        pos = np.asarray(positions, dtype=float).reshape(-1, 3)
        return cls(pos[0], pos[1:])

    @property
    def positions(self):
        """All buoys as an ``(N, 3)`` array, reference first."""
        return np.vstack([self.reference, self.auxiliaries])

    @property
    def n_aux(self):
        return self.auxiliaries.shape[0]

    @property
    def centroid(self):
        return self.positions.mean(axis=0)

    def select(self, indices):
        """Sub-array keeping the reference and the given auxiliary indices."""
        return BuoyArray(self.reference, self.auxiliaries[list(indices)])

    def with_reference(self, index):
        """Re-order so that buoy ``index`` (0 = current reference) is the reference."""
        pos = self.positions
        order = [index] + [i for i in range(len(pos)) if i != index]
        return BuoyArray.from_positions(pos[order])

    def to_list(self):
        return self.positions.tolist()

    def __eq__(self, other):
        if not isinstance(other, BuoyArray):
            return NotImplemented
        return np.array_equal(self.positions, other.positions)

    def __repr__(self):
        return f"BuoyArray({self.positions.tolist()!r})"


def paper_buoys():
    return BuoyArray.from_positions(PAPER_BUOYS)


@dataclass(frozen=True)
class AcousticConfig:
    sound_speed: float = DEFAULT_SOUND_SPEED
    timing_noise_std: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sound_speed) and self.sound_speed > 0):
            raise PreconditionError("sound_speed must be positive")
        if not (np.isfinite(self.timing_noise_std) and self.timing_noise_std >= 0):
            raise PreconditionError("timing_noise_std must be non-negative")

    @property
    def range_noise_std(self):
        return self.sound_speed * self.timing_noise_std


@dataclass(frozen=True, eq=False)
class TdoaObservation:
    """Arrival-time differences ``t_i - t_0`` (seconds), one per auxiliary."""

    time: float
    deltas: np.ndarray = field(repr=True)

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float).reshape(-1)
        d.setflags(write=False)
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "time", float(self.time))

    def __eq__(self, other):
        if not isinstance(other, TdoaObservation):
            return NotImplemented
        return self.time == other.time and np.array_equal(self.deltas, other.deltas)


def travel_time(p, s, cfg):
    return float(np.linalg.norm(vec3(p) - vec3(s)) / cfg.sound_speed)


def range_differences(p, buoys):
    """Noise-free ``||p - s_i|| - ||p - s_0||`` for every auxiliary (meters)."""
    d = np.linalg.norm(buoys.positions - vec3(p), axis=1)
    return d[1:] - d[0]


def make_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def make_observation(p, buoys, cfg, rng=None, time=0.0):
    """Simulate one TDOA observation of a source at ``p``.

    Timing noise is i.i.d. Gaussian on each delta with std
    ``cfg.timing_noise_std``; no random draw is made when it is zero.
    """
    deltas = range_differences(p, buoys) / cfg.sound_speed
    if cfg.timing_noise_std > 0:
        deltas = deltas + make_rng(rng).normal(0.0, cfg.timing_noise_std, deltas.shape)
    return TdoaObservation(time, deltas)


def make_observations(points, buoys, cfg, rng=None):
    """Vectorized ``make_observation`` over an ``(n, 3)`` array; returns ``(n, N-1)`` deltas."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    d = np.linalg.norm(pts[:, None, :] - buoys.positions[None, :, :], axis=-1)
    deltas = (d[:, 1:] - d[:, :1]) / cfg.sound_speed
    if cfg.timing_noise_std > 0:
        deltas = deltas + make_rng(rng).normal(0.0, cfg.timing_noise_std, deltas.shape)
    return deltas
