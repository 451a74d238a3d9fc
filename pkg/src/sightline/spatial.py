"""Spatial vocabulary shared by scene description and response grounding."""
from __future__ import annotations

HORIZONTAL_ZONES = ("left", "center", "right")
DEPTH_ZONES = ("near", "far")

HORIZONTAL_PHRASES = {
    "left": "to your left",
    "center": "in front of you",
    "right": "to your right",
}

DIRECTION_PHRASES = {
    "left": "to your left",
    "center": "straight ahead",
    "right": "to your right",
}

NEAR_AREA_DEFAULT = 0.15

_NUMBER_WORDS = (
    "zero one two three four five six seven eight nine ten eleven twelve thirteen "
    "fourteen fifteen sixteen seventeen eighteen nineteen twenty"
).split()

_IRREGULAR_PLURALS = {
    "person": "people",
    "man": "men",
    "woman": "women",
    "child": "children",
    "mouse": "mice",
    "foot": "feet",
    "tooth": "teeth",
    "knife": "knives",
    "shelf": "shelves",
    "leaf": "leaves",
    "sheep": "sheep",
    "fish": "fish",
    "scissors": "scissors",
    "glasses": "glasses",
}


def horizontal_zone(center_x: float) -> str:
    if center_x < 1 / 3:
        return "left"
    if center_x < 2 / 3:
        return "center"
    return "right"


def depth_zone(area: float, near_area: float = NEAR_AREA_DEFAULT) -> str:
    return "near" if area >= near_area else "far"


def zones(detection, near_area: float = NEAR_AREA_DEFAULT) -> tuple:
    return horizontal_zone(detection.center_x), depth_zone(detection.area, near_area)


def position_phrase(horizontal: str, depth: str) -> str:
    """``near, in front of you`` / ``to your left``; far objects get no depth word."""
    phrase = HORIZONTAL_PHRASES[horizontal]
    return f"near, {phrase}" if depth == "near" else phrase


def pluralize(noun: str) -> str:
    words = noun.split()
    last = words[-1]
    lower = last.lower()
    if lower in _IRREGULAR_PLURALS:
        plural = _IRREGULAR_PLURALS[lower]
    elif lower.endswith(("s", "x", "z", "ch", "sh")):
        plural = last + "es"
    elif lower.endswith("y") and len(lower) > 1 and lower[-2] not in "aeiou":
        plural = last[:-1] + "ies"
    else:
        plural = last + "s"
    return " ".join(words[:-1] + [plural])


def indefinite_article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def count_phrase(noun: str, count: int) -> str:
    """``a chair``, ``an apple``, ``two chairs``, ``21 chairs``."""
    if count == 1:
        return f"{indefinite_article(noun)} {noun}"
    number = _NUMBER_WORDS[count] if count < len(_NUMBER_WORDS) else str(count)
    return f"{number} {pluralize(noun)}"


def capitalize_first(text: str) -> str:
    for i, ch in enumerate(text):
        if ch.isalpha():
            return text[:i] + ch.upper() + text[i + 1:]
    return text
