"""Discrete-event model of the intra-body ultrasonic sensor network."""

from .channel import ChannelModel, Delivery, Link, transmit
from .events import EventQueue, SimEvent, format_trace_line, parse_trace_line
from .mac import Assignment, Schedule, assign_codes
from .phy import (
    AppMessage,
    MacFrame,
    MessageKind,
    PhyConfig,
    decode_message,
    encode_message,
    ppm_demodulate,
    ppm_modulate,
    walsh_codes,
)
from .scenario import (
    NetworkConfig,
    NodeConfig,
    NodeKind,
    OracleClassifier,
    Scenario,
    StreamClassifier,
    load_scenario,
    scenario_from_dict,
)
from .simulator import (
    SimReport,
    Simulator,
    confusion_from_trace,
    required_bitrate,
    run_simulation,
    total_bitrate,
)
