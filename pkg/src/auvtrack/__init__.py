"""Underwater vehicle TDOA localization, Kalman tracking and search regions."""

__version__ = "0.1.0"

from .acoustic import (  # noqa: E402
    AcousticConfig,
    BuoyArray,
    TdoaObservation,
    make_observation,
    paper_buoys,
    travel_time,
)
from .kalman import GaussianState, KalmanModel, build_model, innovation, predict, update  # noqa: E402
from .search import (  # noqa: E402
    DisconnectionEvent,
    NavigationPlan,
    Scenario,
    SearchRegion,
    detect_disconnection,
    propagate_continued,
    propagate_drift,
    sample_drift_trajectory,
    search_region,
)
from .solver import (  # noqa: E402
    PositionFix,
    build_chan_system,
    solve_chan,
    solve_linearized,
    solve_overdetermined,
)
