"""Verification protocol machines, world builders and canned distinguishers."""

from mevsim.mev.distinguishers import dishonest_library, honest_library
from mevsim.mev.machines import (
    ProtocolParams,
    SourceBehavior,
    filter_bot,
    filter_bot_prime,
    ghz_resource_machine,
    ideal_mev_machine,
    multi_round_machine,
    party_machine,
    sample_even_parity,
    simulator_sigma_c,
    simulator_sigma_s,
    source_machine,
    verdict,
)
from mevsim.mev.worlds import (
    MevDriver,
    MultiRoundResult,
    Outcome,
    RoundResult,
    build_concrete,
    build_ghz,
    build_ideal,
    build_multiround_concrete,
    build_multiround_ideal,
    run_multiround,
    run_round,
)
