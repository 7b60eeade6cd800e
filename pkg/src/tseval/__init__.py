"""Evaluation harness for LLM reasoning over time-series classification tasks.

Pipeline: ingest canonical datasets, serialize samples as numeric text or
render them as annotated charts, materialize prompts (zero-shot, chain of
thought, few-shot ICL, and the plan-then-solve chart pipeline), query real or
mocked chat providers, and aggregate accuracy, normalized scores, anchor win
counts, and token/dollar costs into reports.
"""

from .core import (
    AnchorTable,
    ClassDef,
    Modeling,
    ReasoningPattern,
    ReasoningStrategy,
    ReasoningTrace,
    TaskAnchors,
    TaskSpec,
    TimeSeriesSample,
    builtin_anchor_table,
    builtin_task_registry,
)
from .ingest import (
    Dataset,
    DemoSet,
    EvalSubset,
    draw_demo_set,
    draw_eval_subset,
    load_dataset,
    save_dataset,
    split_train_80_20,
)
from .llmclient import (
    Completion,
    MockProvider,
    OpenAIChatProvider,
    PriceConfig,
    Provider,
    ProviderConfig,
    Usage,
    mock_provider,
    query_until_answer,
    send,
)
from .prompt import (
    ImagePart,
    PromptBundle,
    TextPart,
    VisualizationPlan,
    build_cot,
    build_icl,
    build_planning_prompt,
    build_solving_prompt,
    build_zst,
    load_plan,
    parse_plan,
    save_plan,
    serialize_numeric,
)
from .scoring import (
    MetricReport,
    RunRecord,
    SampleResult,
    accuracy,
    cost,
    emit_report,
    improvement,
    normalize,
    parse_answer,
    summarize,
    win_count,
)
from .viz import (
    Detail,
    ImageTokenRule,
    RenderConfig,
    RenderMode,
    RenderedImage,
    Spectrogram,
    StftConfig,
    default_render_config,
    dft,
    estimate_image_tokens,
    render,
    stft_spectrogram,
)

__version__ = "0.1.0"
