"""Personality-driven mobility and profile-based DTN forwarding simulator."""

from .errors import EncsimError
from .harness import SimConfig, evaluate_fidelity, load_config, replay_route, run_scenario
from .mobility import Arena, make_world, step_world
from .personality import Personality, PairPersonality, PersonalityFitter, fit_personality
from .plausible import PlausibleMobility, infer_plausible_positions
from .profilecast import BehavioralProfile, MessageBundle, build_profile, similarity
from .spectrum import PeriodicityAnalyzer, detect_peaks, dft, to_periods
from .trace import EncounterTrace, bin_pair_series, derive_encounters_from_visits, parse_encounter_csv

__version__ = "0.1.0"
