"""Scenario simulator, experiment runners and metrics."""
from .experiments import EXPERIMENTS, ExperimentError, ExperimentResult, run_experiment, violations
from .latency_models import (
    Constant,
    Gaussian,
    LatencyModel,
    LatencySpecError,
    RarityTable,
    VocabularyLinked,
    default_rarity_table,
    latency_from_spec,
)
from .metrics import MetricsReport, pearson, report_from_traces, traces_from_jsonl, traces_to_jsonl
from .runner import TranscriptEntry, dumps_outputs, run_scenario, transcript_to_jsonl
from .scenario import (
    Scenario,
    ScenarioError,
    dump_records,
    load_scenario,
    parse_scenario,
    scenario_from_records,
)
