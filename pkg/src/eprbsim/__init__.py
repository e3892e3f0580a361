"""Event-by-event EPRB experiment simulator and time-tag coincidence analysis."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    EventRecord,
    RngStream,
    SimConfig,
    StationLog,
    read_station_log,
    write_station_log,
)
from .simulate import run_experiment, theta_settings  # noqa: F401
from .coincidence import (  # noqa: F401
    CoincidenceTable,
    chsh,
    count_coincidences,
    correlation,
    s_from_table,
    s_max,
    s_theta,
    single_particle_rates,
)
