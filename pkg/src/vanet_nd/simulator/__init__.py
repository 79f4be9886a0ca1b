from .config import (ALGORITHMS, CRA, GOSSIP, GSIMND, SBA, UNTIL_CONVERGED,
                     UNTIL_DISCOVERED, SimConfig)
from .engine import (FEEDBACK, HELLO, NodeRuntime, Packet, TrialResult,
                     apply_discoveries, beam_policy, check_convergence,
                     init_state, resolve_reception, run_trial,
                     run_trial_reference, step_slot)
from .batch import run_trials, scenario_for_trial
from .stats import (InsufficientDataError, estimate_discovery_probability,
                    stationary_rate)
