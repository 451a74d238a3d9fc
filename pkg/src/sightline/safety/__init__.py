"""Query gating for minors and answer rewriting for blind and low-vision users."""
from ..core import SAFE, SafetyVerdict
from .rewrite import RewriteResult, rewrite_response
from .rules import RuleSet, RulesError, VagueRule, load_rules, normalize_quotes, parse_rules
from .taxonomy import (
    AgeUnresolvedError,
    Category,
    GateDecision,
    SafetyTaxonomy,
    TaxonomyError,
    classify_query,
    gate_query,
    load_taxonomy,
)

__all__ = [
    "SAFE", "SafetyVerdict", "RewriteResult", "rewrite_response", "RuleSet", "RulesError",
    "VagueRule", "load_rules", "normalize_quotes", "parse_rules", "AgeUnresolvedError", "Category", "GateDecision",
    "SafetyTaxonomy", "TaxonomyError", "classify_query", "gate_query", "load_taxonomy",
]
