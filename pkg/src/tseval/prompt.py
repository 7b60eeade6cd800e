"""Prompt materialization: numeric serialization, strategy templates, and the
plan-then-solve prompts for chart-image runs.

Every builder is a pure function; for fixed inputs the emitted bundles are
byte-identical across runs and platforms (golden-file tested).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Modeling, ReasoningStrategy, TaskSpec, TimeSeriesSample
from .ingest import DemoSet
from .viz import RenderedImage, RenderMode


class PromptError(Exception):
    pass


class Unparseable(PromptError):
    """A planning response named neither domain and no fallback was given."""


# ---------------------------------------------------------------------------
# Bundle types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    image: RenderedImage


Part = TextPart | ImagePart

FORMAT_BEGIN = "---BEGIN FORMAT TEMPLATE---"

_FORMAT_BLOCK = (
    "    Please respond with the following format:\n"
    "    ---BEGIN FORMAT TEMPLATE---\n"
    "    Answer Choice: [Your Answer Choice Here]\n"
    "    ---END FORMAT TEMPLATE---\n"
    "    Do not deviate from the above format. \n"
    "    Repeat the format template for the answer.\n"
)

_COT_LINE = "    Please solve this problem step by step.\n"

_QUESTION_BLOCK = (
    "Given the time series data above, \n"
    "answer the following question\n"
    "using the specified format.\n"
    "    Question: {question}\n"
    "    Choices: {choices}\n"
)

_DEMO_BLOCK = (
    "    Given the time series data above, \n"
    "    answer the following question\n"
    "    using the specified format.\n"
    "    Question: {question}\n"
    "    Choices: {choices}\n"
    "    Answer Choice: {answer}\n"
)

_SOLVING_BLOCK = (
    "Given the visualization of time series data above, \n"
    "answer the following question\n"
    "Question: {question}\n"
    "Choices: {choices}\n"
)


@dataclass(frozen=True)
class PromptBundle:
    """A fully materialized request: ordered text/image parts plus run tags.

    ``strategy`` is None for planning-stage bundles, which solicit free text
    rather than a formatted answer; every answer-soliciting bundle carries
    exactly one answer-format block.
    """

    parts: tuple[Part, ...]
    strategy: ReasoningStrategy | None
    modeling: Modeling
    task: str

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("bundle has no parts")
        image_count = sum(isinstance(p, ImagePart) for p in self.parts)
        if self.modeling is Modeling.VISUAL and image_count < 1:
            raise ValueError("visual bundle must contain at least one image part")
        if self.modeling is Modeling.NUMERIC and image_count != 0:
            raise ValueError("numeric bundle must contain no image parts")
        format_blocks = self.text.count(FORMAT_BEGIN)
        expected = 0 if self.strategy is None else 1
        if format_blocks != expected:
            raise ValueError(
                f"bundle must contain exactly {expected} answer-format block(s), "
                f"found {format_blocks}"
            )

    @property
    def text(self) -> str:
        """All text parts concatenated in order."""
        return "".join(p.text for p in self.parts if isinstance(p, TextPart))

    @property
    def images(self) -> tuple[RenderedImage, ...]:
        return tuple(p.image for p in self.parts if isinstance(p, ImagePart))


# ---------------------------------------------------------------------------
# Numeric serialization
# ---------------------------------------------------------------------------

def _format_value(value: float, precision: int) -> str:
    text = np.format_float_positional(
        value, precision=precision, unique=False, fractional=False, trim="-"
    )
    return "0" if text == "-0" else text


def serialize_numeric(sample: TimeSeriesSample, spec: TaskSpec, precision: int = 4) -> str:
    """Serialize a sample as one labeled line per channel.

    Each line is ``<label>: v1, v2, ..., vl`` with values rounded to the given
    number of significant digits in plain decimal notation; channels follow
    ``spec.variable_labels`` order and are joined by newlines.
    """
    if not (1 <= precision <= 10):
        raise ValueError("precision must be in 1..10")
    lines = []
    for label, channel in zip(spec.variable_labels, sample.values):
        body = ", ".join(_format_value(v, precision) for v in channel)
        lines.append(f"{label}: {body}")
    return "\n".join(lines)


def render_choices(spec: TaskSpec) -> str:
    """Canonical choice string: ``(A) name: description; (B) ...``.

    Classes without a description render as ``(A) name``.
    """
    parts = []
    for c in spec.classes:
        if c.description:
            parts.append(f"({c.letter}) {c.name}: {c.description}")
        else:
            parts.append(f"({c.letter}) {c.name}")
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# Strategy prompt builders
# ---------------------------------------------------------------------------

def _question_block(spec: TaskSpec) -> str:
    return _QUESTION_BLOCK.format(question=spec.task_description, choices=render_choices(spec))


def _modeling_of(part: Part) -> Modeling:
    return Modeling.VISUAL if isinstance(part, ImagePart) else Modeling.NUMERIC


def _answer_parts(part: Part, body: str) -> tuple[Part, ...]:
    """Lay out one data part followed by its question text.

    Text data is inlined ahead of the question (``<data>. `` prefix); an image
    becomes its own part with the question text following.
    """
    if isinstance(part, TextPart):
        return (TextPart(f"\n{part.text}. \n{body}"),)
    return (part, TextPart(f"\n{body}"))


def build_zst(part: Part, spec: TaskSpec) -> PromptBundle:
    """Zero-shot prompt: data, question, choices, and the answer-format block."""
    body = _question_block(spec) + _FORMAT_BLOCK
    return PromptBundle(
        parts=_answer_parts(part, body),
        strategy=ReasoningStrategy.zst(),
        modeling=_modeling_of(part),
        task=spec.name,
    )


def build_cot(part: Part, spec: TaskSpec) -> PromptBundle:
    """Zero-shot chain-of-thought: the zero-shot prompt plus one added
    step-by-step instruction line."""
    body = _question_block(spec) + _COT_LINE + _FORMAT_BLOCK
    return PromptBundle(
        parts=_answer_parts(part, body),
        strategy=ReasoningStrategy.cot(),
        modeling=_modeling_of(part),
        task=spec.name,
    )


def _demo_text(spec: TaskSpec, answer_letter: str) -> str:
    return _DEMO_BLOCK.format(
        question=spec.task_description, choices=render_choices(spec), answer=answer_letter
    )


def build_icl(
    demos: DemoSet,
    target: Part,
    spec: TaskSpec,
    *,
    precision: int = 4,
    demo_images: Sequence[RenderedImage] | None = None,
) -> PromptBundle:
    """Few-shot prompt: demo blocks (data, question, answer) in DemoSet order,
    then the chain-of-thought target block.

    Numeric targets serialize each demo at ``precision``; image targets need
    pre-rendered ``demo_images`` aligned with ``demos.demos``.
    """
    target_body = _question_block(spec) + _COT_LINE + _FORMAT_BLOCK
    if isinstance(target, TextPart):
        pieces = ["\n"]
        for demo_sample, letter in demos.demos:
            data = serialize_numeric(demo_sample, spec, precision)
            pieces.append(f"{data}. \n{_demo_text(spec, letter)}")
        pieces.append(f"\n{target.text}. \n{target_body}")
        parts: tuple[Part, ...] = (TextPart("".join(pieces)),)
    else:
        if demo_images is None or len(demo_images) != len(demos.demos):
            raise ValueError("image targets need one rendered image per demo")
        part_list: list[Part] = []
        for (_, letter), image in zip(demos.demos, demo_images):
            part_list.append(ImagePart(image))
            part_list.append(TextPart(f"\n{_demo_text(spec, letter)}"))
        part_list.append(target)
        part_list.append(TextPart(f"\n{target_body}"))
        parts = tuple(part_list)
    return PromptBundle(
        parts=parts,
        strategy=ReasoningStrategy.icl(demos.demos_per_class),
        modeling=_modeling_of(target),
        task=spec.name,
    )


# ---------------------------------------------------------------------------
# Planning and solving (chart-image pipeline)
# ---------------------------------------------------------------------------

_NUMBER_WORDS = {
    2: "two", 3: "three", 4: "four", 5: "five",
    6: "six", 7: "seven", 8: "eight", 9: "nine", 10: "ten",
}


def _name_list(names: Sequence[str]) -> str:
    if len(names) == 1:
        return names[0]
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ", ".join(names[:-1]) + f", and {names[-1]}"


@dataclass(frozen=True)
class VisualizationPlan:
    """Cached planning output for one task: domain choice plus reasoning hints."""

    task: str
    domain_choice: RenderMode
    hints: str
    source: str = "llm"  # "llm" | "manual"
    created_at: str | None = None

    def __post_init__(self) -> None:
        if not self.hints.strip():
            raise ValueError("plan hints must be non-empty")
        if self.source not in ("llm", "manual"):
            raise ValueError(f"plan source must be llm|manual, got {self.source!r}")


def build_planning_prompt(spec: TaskSpec) -> PromptBundle:
    """Text-only planning prompt: role-play line, feature-keyword question, and
    the time- vs frequency-domain choice question."""
    names = [c.name for c in spec.classes]
    count_word = _NUMBER_WORDS.get(spec.num_classes, str(spec.num_classes))
    text = (
        f"{spec.task_description} \n"
        f"You need to distinguish between {count_word} types: {_name_list(names)}. "
        "What features do you plan to use for making this determination? "
        "Just give the keywords.\n"
        "\n"
        "To extract these features, what is better between time-domain and "
        "frequency-domain visualization?  Just give answer.\n"
    )
    return PromptBundle(
        parts=(TextPart(text),),
        strategy=None,
        modeling=Modeling.NUMERIC,
        task=spec.name,
    )


_DOMAIN_WORDS = ("frequency-domain", "time-domain", "frequency", "time", "visualization")


def parse_plan(
    response: str,
    task: str,
    fallback: RenderMode | None = None,
) -> VisualizationPlan:
    """Extract a VisualizationPlan from a planning-stage response.

    The domain is keyword-matched case-insensitively, with "frequency" taking
    precedence over "time" when both appear. Hints are the feature-list
    portion: paragraphs that do not discuss the visualization choice. When no
    domain keyword is found the fallback is used (hints become the whole
    response) or Unparseable is raised.
    """
    lowered = response.lower()
    if "frequency" in lowered:
        domain = RenderMode.FREQUENCY
    elif "time" in lowered:
        domain = RenderMode.TIME
    elif fallback is not None:
        return VisualizationPlan(
            task=task,
            domain_choice=fallback,
            hints=response.strip() or "(no hints)",
            source="llm",
        )
    else:
        raise Unparseable("response names neither time- nor frequency-domain")

    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", response) if p.strip()]
    feature_paragraphs = [
        p for p in paragraphs
        if not any(word in p.lower() for word in _DOMAIN_WORDS)
    ]
    hints = "\n".join(feature_paragraphs).strip() or response.strip()
    return VisualizationPlan(task=task, domain_choice=domain, hints=hints, source="llm")


def build_solving_prompt(
    image: RenderedImage,
    spec: TaskSpec,
    plan: VisualizationPlan | None,
    demos: DemoSet | None = None,
    demo_images: Sequence[RenderedImage] | None = None,
) -> PromptBundle:
    """Solving-stage prompt: chart image(s) plus hint-guided question text.

    Demos, when given, precede the target exactly as in ``build_icl``. Passing
    ``plan=None`` omits the hint line (the no-planning ablation).
    """
    if plan is not None and plan.task != spec.name:
        raise ValueError(f"plan is for task {plan.task!r}, spec is {spec.name!r}")
    body = _SOLVING_BLOCK.format(
        question=spec.task_description, choices=render_choices(spec)
    )
    if plan is not None:
        body += f"Hint: {plan.hints}\n"
    body += "Please solve this problem step by step.\n" + _FORMAT_BLOCK

    part_list: list[Part] = []
    strategy = ReasoningStrategy.zst()
    if demos is not None:
        if demo_images is None or len(demo_images) != len(demos.demos):
            raise ValueError("demos need one rendered image each")
        for (_, letter), demo_image in zip(demos.demos, demo_images):
            part_list.append(ImagePart(demo_image))
            part_list.append(TextPart(f"\n{_demo_text(spec, letter)}"))
        strategy = ReasoningStrategy.icl(demos.demos_per_class)
    part_list.append(ImagePart(image))
    part_list.append(TextPart(body))
    return PromptBundle(
        parts=tuple(part_list),
        strategy=strategy,
        modeling=Modeling.VISUAL,
        task=spec.name,
    )


# ---------------------------------------------------------------------------
# Plan persistence
# ---------------------------------------------------------------------------

def save_plan(plan: VisualizationPlan, directory: str | Path) -> Path:
    """Write ``plans/<task>.json``; stamps created_at if the plan lacks one."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    created = plan.created_at or datetime.now(timezone.utc).isoformat(timespec="seconds")
    path = directory / f"{plan.task}.json"
    path.write_text(
        json.dumps(
            {
                "task": plan.task,
                "domain_choice": plan.domain_choice.value,
                "hints": plan.hints,
                "source": plan.source,
                "created_at": created,
            },
            indent=2,
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )
    return path


def load_plan(path: str | Path) -> VisualizationPlan:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return VisualizationPlan(
        task=raw["task"],
        domain_choice=RenderMode(raw["domain_choice"]),
        hints=raw["hints"],
        source=raw.get("source", "manual"),
        created_at=raw.get("created_at"),
    )
