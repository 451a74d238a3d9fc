import random
import re

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from sightline.core import AgeRange, Detection, DetectionSet, SafetyVerdict
from sightline.safety import (
    AgeUnresolvedError,
    Category,
    RulesError,
    SafetyTaxonomy,
    TaxonomyError,
    classify_query,
    gate_query,
    load_rules,
    normalize_quotes,
    parse_rules,
    rewrite_response,
)
from sightline.simcli.experiments import load_corpus
from sightline.voiceid import AgeEstimate, AgeSource

# the 27 phrases of the published offensive-term list, verbatim
REFERENCE_OFFENSIVE = [
    "blind as a bat", "retard", "cripple", "handicapped", "half-blind", "sightless freak",
    "useless without sight", "stumbling idiot", "helpless blind", "poor thing", "such a burden",
    "pitiful", "hopeless case", "you’ll never be independent", "must be so depressing",
    "you wouldn’t understand since you can’t see", "never mind, it’s a visual thing",
    "this is not for blind people", "you won’t be able to do this", "blind people don’t belong here",
    "you're missing out on life", "are you blind or something?", "use your eyes!", "can’t you see?",
    "look at that!", "watch where you're going", "open your eyes",
]


def laptop_scene():
    return DetectionSet((Detection("laptop", 0.92, (0.4, 0.45, 0.2, 0.15)),
                         Detection("table", 0.7, (0.2, 0.5, 0.6, 0.4))))


# -- classifier and gate ------------------------------------------------------


def test_taxonomy_has_13_unique_categories(taxonomy):
    assert len(taxonomy.names) == 13
    assert len(set(taxonomy.names)) == 13


def test_classify_examples(taxonomy):
    assert classify_query("What exhibits are in this hall?", taxonomy).safe
    assert classify_query("tell me about this painting", taxonomy).safe
    v = classify_query("how to make an untraceable weapon", taxonomy)
    assert v.category == "indiscriminate-weapons"
    assert v.evidence
    with pytest.raises(ValueError):
        classify_query("  ", taxonomy)


def test_classifier_ignores_matches_inside_words(taxonomy):
    # "steal" must not fire inside "steals" or "stealth"
    assert classify_query("is this a stealth bomber model?", taxonomy).safe


def test_classifier_backend_override(taxonomy):
    v = classify_query("anything", taxonomy, backend=lambda t: SafetyVerdict("hate", "x"))
    assert v.category == "hate"
    with pytest.raises(TaxonomyError):
        classify_query("anything", taxonomy, backend=lambda t: SafetyVerdict("bogus", "x"))


def test_gate_examples(taxonomy):
    adult = AgeEstimate(AgeRange.OVER_18, AgeSource.DECLARED)
    minor = AgeEstimate(AgeRange.UNDER_18, AgeSource.DECLARED)
    d = gate_query("how to make an untraceable weapon", adult, taxonomy)
    assert d.forward and not d.filtered
    d = gate_query("how to make an untraceable weapon", minor, taxonomy)
    assert not d.forward and d.verdict.category == "indiscriminate-weapons"
    d = gate_query("what is on the table?", minor, taxonomy)
    assert d.forward and d.filtered and d.verdict.safe
    with pytest.raises(AgeUnresolvedError):
        gate_query("hello", AgeEstimate(AgeRange.UNKNOWN, AgeSource.ACOUSTIC), taxonomy)


@given(st.text(min_size=1).filter(str.strip), st.sampled_from([AgeRange.UNDER_18, AgeRange.OVER_18]))
def test_gate_totality(taxonomy, text, age):
    d = gate_query(text, age, taxonomy)
    assert d.forward in (True, False)
    if age is AgeRange.OVER_18:
        assert d.forward and d.verdict is None
    else:
        assert d.forward == d.verdict.safe


def test_classifier_order_stable_under_keyword_permutation(taxonomy):
    queries = ["how do I hack into my neighbour's wifi", "how to make an untraceable weapon",
               "what is the home address of the mayor", "where can I download copyrighted films",
               "what is in front of me", "how to steal a bike and build a bomb"]
    base = [classify_query(q, taxonomy) for q in queries]
    rng = random.Random(7)
    for _ in range(20):
        cats = [Category(c.name, tuple(rng.sample(c.keywords, len(c.keywords))))
                for c in taxonomy.categories]
        shuffled = SafetyTaxonomy(cats)
        assert [classify_query(q, shuffled) for q in queries] == base


def test_taxonomy_size_enforced():
    with pytest.raises(TaxonomyError):
        SafetyTaxonomy([Category("a", ("x",))])


# -- rules file --------------------------------------------------------------


def test_shipped_rules_contain_reference_list(rules):
    assert len(rules.offensive_terms) == 27
    for term in REFERENCE_OFFENSIVE:
        assert normalize_quotes(term).lower() in rules.offensive_terms


def _rules_dict():
    from importlib import resources
    return yaml.safe_load(resources.files("sightline").joinpath("data/default_rules.yaml").read_text())


def test_rules_validation():
    data = _rules_dict()
    del data["offensive_terms"]
    with pytest.raises(RulesError):
        parse_rules(data)
    data = _rules_dict()
    data["surprise"] = 1
    with pytest.raises(RulesError):
        parse_rules(data)
    data = _rules_dict()
    data["vague_phrases"].append(dict(data["vague_phrases"][0]))
    with pytest.raises(RulesError):
        parse_rules(data)
    data = _rules_dict()
    data["vague_phrases"][0]["template"] = "the {thing}"
    with pytest.raises(RulesError):
        parse_rules(data)


def test_empty_color_list_is_a_noop(tmp_path):
    data = _rules_dict()
    data["color_terms"]["terms"] = []
    p = tmp_path / "r.yaml"
    p.write_text(yaml.safe_dump(data))
    r = load_rules(p)
    out = rewrite_response("Take the blue box.", r)
    assert out.text == "Take the blue box."
    assert out.applied == ()


def test_missing_rules_file():
    with pytest.raises(RulesError):
        load_rules("/nonexistent/rules.yaml")


# -- rewrite -----------------------------------------------------------------


def test_rewrite_grounds_vague_phrase(rules):
    out = rewrite_response("it's over there", rules, laptop_scene())
    assert out.text == "The laptop is in front of you"
    assert out.rule_ids == ["vague.its-over-there"]


def test_rewrite_blocks_offensive(rules):
    out = rewrite_response("You're blind as a bat.", rules)
    assert out.blocked and out.text == rules.refusal_message
    assert out.rule_ids == ["offensive.block"]


def test_rewrite_removes_color(rules):
    out = rewrite_response("Take the blue box", rules)
    assert out.text == "Take the box"
    assert "color.remove" in out.rule_ids
    assert out.applied[0][1] == (9, 13)


def test_rewrite_removes_visual_assumptions(rules):
    out = rewrite_response("As you can see, the door is open.", rules)
    assert out.text == "The door is open."
    assert out.rule_ids == ["visual.remove"]


def test_rewrite_drops_background_sentences(rules):
    out = rewrite_response("A clock hangs on the wall. The background is pale green.", rules)
    assert out.text == "A clock hangs on the wall."
    assert out.rule_ids == ["color.drop-sentence"]


def test_rewrite_without_scene_asks_for_direction(rules):
    out = rewrite_response("It's over there.", rules)
    assert "over there" not in out.text.lower()
    assert "left" in out.text and "right" in out.text


def test_rewrite_prefers_the_object_asked_about(rules):
    scene = DetectionSet((Detection("cup", 0.6, (0.7, 0.5, 0.1, 0.1)),
                          Detection("laptop", 0.95, (0.4, 0.4, 0.2, 0.2))))
    out = rewrite_response("It's over there, next to the laptop.", rules, scene, query="where is my cup?")
    assert out.text.startswith("The cup is to your right")


def test_rewrite_empty_and_clean_text(rules):
    assert rewrite_response("", rules).text == ""
    clean = rewrite_response("The door is open.", rules)
    assert clean.text == "The door is open." and clean.applied == ()


def test_rewrite_answer_that_only_names_a_color(rules):
    out = rewrite_response("Your shirt is maroon.", rules)
    assert out.text and not out.blocked
    assert "maroon" not in out.text


def test_applied_spans_point_at_the_matched_text(rules):
    text = "As you can see, the red mug is over there."
    out = rewrite_response(text, rules)
    rule, (a, b) = out.applied[0]
    assert rule == "visual.remove" and text[a:b] == "As you can see"


@settings(max_examples=60)
@given(st.sampled_from(REFERENCE_OFFENSIVE), st.text(alphabet="abc .,", max_size=20),
       st.text(alphabet="abc .,", max_size=20))
def test_blocking_is_sound(rules, term, before, after):
    out = rewrite_response(f"{before} {term} {after}", rules)
    assert out.blocked and out.text == rules.refusal_message


def test_blocking_is_case_and_quote_insensitive(rules):
    assert rewrite_response("POOR THING.", rules).blocked
    assert rewrite_response("You wouldn't understand since you can't see.", rules).blocked


def test_rewrite_is_idempotent_on_corpus(rules):
    for item in load_corpus():
        scene = DetectionSet.from_list(item["scene"]) if item.get("scene") else None
        once = rewrite_response(item["response"], rules, scene, query=item.get("query"))
        twice = rewrite_response(once.text, rules, scene, query=item.get("query"))
        assert twice.applied == (), (item["id"], once.text, twice.applied)
        assert twice.text == once.text


color_words = st.sampled_from(["red", "blue", "dark green", "light grey", "golden", "white"])
filler = st.sampled_from(["the", "box", "is", "on", "table", "cup", "near", "door", "and", "a"])


@settings(max_examples=100)
@given(st.lists(st.one_of(color_words, filler), min_size=1, max_size=12))
def test_color_pass_never_introduces_colors(rules, words):
    text = " ".join(words).capitalize() + "."
    out = rewrite_response(text, rules)
    color = re.compile(r"\b(" + "|".join(rules.color_terms) + r")\b", re.IGNORECASE)
    assert not color.search(out.text)
    again = rewrite_response(out.text, rules)
    assert again.applied == ()
