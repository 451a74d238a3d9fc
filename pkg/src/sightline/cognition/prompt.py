"""Prompt construction for the reasoning backends."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..core import ExecutionPath, FusedInput, SightlineError

BVI_INSTRUCTIONS = """\
You are answering a blind or visually impaired person. Follow these rules:
- If the response contains colors rephrase them in simple words and do not describe colors at all.
- Do not describe the visual appearance or attractiveness of any person or thing.
- Do not talk about colors in the background; leave those sentences out.
- Never say "as you can see" or otherwise assume the user can see.
- Do not say that you left out colors or that you cannot describe them.
- Include important values such as numbers, prices or amounts when the question involves them.
- Say where things are relative to the user: left, right, in front, near or far."""


class PromptError(SightlineError):
    pass


@dataclass(frozen=True)
class Prompt:
    system_instructions: str
    user_query: str
    scene_text: Optional[str] = None
    frame_id: Optional[int] = None  # set when the frame travels with the prompt

    def render(self) -> str:
        parts = [self.system_instructions]
        if self.scene_text:
            parts.append("Scene description:\n" + self.scene_text)
        parts.append("Question: " + self.user_query)
        return "\n\n".join(parts)


def build_prompt(fused: FusedInput, path: ExecutionPath, scene=None) -> Prompt:
    """Multimodal prompts carry the frame; text-fallback prompts inline the scene.

    ``scene`` may be a SceneDescription or plain text. A text-fallback prompt
    for a query that has a frame must be given its scene.
    """
    if path is ExecutionPath.MULTIMODAL:
        frame_id = fused.frame.frame_id if fused.frame is not None else None
        return Prompt(BVI_INSTRUCTIONS, fused.query_text, None, frame_id)
    if scene is None:
        if fused.frame is not None:
            raise PromptError("text fallback needs a scene description for the reserved frame")
        scene_text = fused.session.environment_notes
    else:
        scene_text = getattr(scene, "text", scene)
    return Prompt(BVI_INSTRUCTIONS, fused.query_text, scene_text, None)
