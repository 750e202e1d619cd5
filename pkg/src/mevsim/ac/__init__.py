"""Message-passing kernel for resources, converters, wirings and distinguishers."""

from mevsim.ac.advantage import (
    AdvantageEstimate,
    advantage_estimate,
    advantage_exact,
    guess_zero_probability,
    hoeffding_halfwidth,
    trial_seed,
)
from mevsim.ac.core import Context, Machine, Port, Wiring, attach, connect, detach, parallel, wire
from mevsim.ac.messages import (
    ABORT,
    BITS,
    CONTINUE,
    START,
    STOP,
    Abort,
    Bit,
    BitString,
    Continue,
    Length,
    Message,
    PartyId,
    Qubit,
    Start,
    StateDesc,
    Stop,
)
from mevsim.ac.register import QubitRegister
from mevsim.ac.scheduler import (
    DEFAULT_BUDGET,
    Distinguisher,
    Event,
    Fault,
    RunResult,
    Transcript,
    enumerate_runs,
    exact_distribution,
    run,
)
