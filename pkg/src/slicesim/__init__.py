"""slicesim: cascaded WLAN/FWA uplink simulator with end-to-end network
slicing, dynamic slice promotion and elastic radio-resource scheduling."""

from .config import Scenario, paper_case, load_scenario
from .engine import Engine, RunResult, run, write_trace
from .metrics import (availability, e2e_latency_stats, qos_met_fraction,
                      summarize_run, aggregate)
from .model import (FlowSpec, LinkState, Packet, QoSProfile, ResourceGrid,
                    SliceInstance, SliceType, deadline_of, usable_units)
from .scheduler import (DemandEstimate, HopScheduler, PolicyConfig,
                        elastic_scale, estimate_demand, mlwdf_metric,
                        partition_priority, pf_metric, update_avg_rate)
from .sweep import SweepSpec, emit_figure_data, fine_load_sweep, run_sweep
from .traffic import EmbbTrafficModel, FlowCatalog, build_catalog, embb_arrivals

__version__ = "0.1.0"
