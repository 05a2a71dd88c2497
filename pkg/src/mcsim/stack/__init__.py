from .bearer import BearerMode, DeficitRoundRobin, Duplicate, Single, Split, mode_to_dict
from .pdcp import SN_MOD, WINDOW, PdcpPdu, PdcpRx, PdcpTx
from .sdap import ConfigError, QosFlow, Sdap, sdap_map

__all__ = [
    "BearerMode",
    "ConfigError",
    "DeficitRoundRobin",
    "Duplicate",
    "PdcpPdu",
    "PdcpRx",
    "PdcpTx",
    "QosFlow",
    "SN_MOD",
    "Sdap",
    "Single",
    "Split",
    "WINDOW",
    "mode_to_dict",
    "sdap_map",
]
