"""Site-explicit, continuous-time epidemic simulation with exact
point-process sampling, containment and tracing machinery, and
Bayesian-optimization calibration against longitudinal case curves."""

from .analysis import (NBFit, SecondaryCaseTable, mae, nb_mle, rt_kt_series,
                       secondary_counts)
from .calibrate import (SurrogateDataset, ThetaDomain, calibrate,
                        expected_score, gp_fit, knowledge_gradient, score,
                        sobol_points)
from .mobility import (CheckInTrace, TraceSet, Visit, build_traces,
                       generate_trace, presence_integral)
from .params import EpidemicParams, sample_transition_delay
from .policies import (AlternatingCurfew, BetaMultiplier, ConditionalLockdown,
                       LockdownController, PolicySet, SocialDistancing,
                       VulnerableDistancing, conditional_lockdown_tick,
                       effective_beta, visit_admitted)
from .population import (Individual, Site, Tile, assign_sites,
                         build_population)
from .scenario import (Scenario, calibrate_scenario, load_scenario,
                       simulate_g, simulate_rollouts)
from .simulate import (Event, HealthState, SeedCounts, SimResult,
                       exposure_contribution, household_contribution,
                       init_seeds, lambda_max, run_simulation)
from .testtrace import (ContactRecord, TestConfig, TracingConfig,
                        empirical_exposure_probability, narrowcast_site_risk,
                        rank_contacts, trace_contacts_location,
                        trace_contacts_proximity)
from .world import World, build_world, load_sites_csv, load_tiles_csv

__version__ = "0.1.0"
