"""Prompt template assets and exact-name placeholder interpolation."""

from __future__ import annotations

from importlib import resources

# canonical stage names; also the fixture-key stage components
SEMANTIC_ENCODER = "SemanticEncoder"
FORMALIZATION = "Formalization"
EXECUTIVE_COMPILER = "ExecutiveCompiler"
SUPERVISOR_FORWARD = "SupervisorForward"
SUPERVISOR_BACKWARD = "SupervisorBackward"
REASONER = "Reasoner"

_FILES = {
    SEMANTIC_ENCODER: "semantic_encoder.txt",
    FORMALIZATION: "formalization.txt",
    EXECUTIVE_COMPILER: "executive_compiler.txt",
    SUPERVISOR_FORWARD: "supervisor_forward.txt",
    SUPERVISOR_BACKWARD: "supervisor_backward.txt",
    REASONER: "reasoner.txt",
}

ATTENTION = (
    "Return only the JSON document itself: no code fences, no prose, "
    "no trailing commentary."
)

REPROMPT_REMINDER = (
    "Your previous reply could not be used: {detail}\n"
    "Reply again with only the required JSON output, without code fences "
    "or any additional text."
)


def load_template(stage: str) -> str:
    return resources.files(__package__).joinpath(_FILES[stage]).read_text(encoding="utf-8")


def exchange_format_example() -> str:
    return resources.files(__package__).joinpath("exchange_example.txt").read_text(
        encoding="utf-8"
    )


def interpolate(template: str, values: dict[str, str]) -> str:
    """Replace each ``{name}`` placeholder by exact-name substitution.

    Deliberately not ``str.format``: template bodies contain literal JSON
    braces that must survive untouched.
    """
    out = template
    for name, value in values.items():
        out = out.replace("{" + name + "}", value)
    return out


def stage_prompt(stage: str, values: dict[str, str]) -> str:
    return interpolate(load_template(stage), values)
