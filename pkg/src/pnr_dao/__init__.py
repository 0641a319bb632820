"""Punishment-not-Reward DAO: identity commitments, soulbound ledgers,
anonymous governance, escrowed deals, reputation, a lock-and-mint bridge,
a gas cost model and a deterministic simulator tying them together."""

from .errors import PnRError
from .events import Event, EventLog
from .system import Dao

__version__ = "0.1.0"

__all__ = ["Dao", "Event", "EventLog", "PnRError", "__version__"]
