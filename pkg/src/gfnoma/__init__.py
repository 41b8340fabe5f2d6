"""Grant-free NOMA cell laboratory: simulation of the preamble and data
chain plus closed-form performance evaluators."""
from .network import NetworkConfig, dbm_to_watts, watts_to_dbm

__all__ = ["NetworkConfig", "dbm_to_watts", "watts_to_dbm"]
__version__ = "0.1.0"
