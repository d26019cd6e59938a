"""Pydantic models: alignments, gold annotations and run configuration."""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ParameterError

Link = Tuple[int, int]  # (source index j, target index i)


# ── Alignment Models ──


class AlignmentSet(BaseModel):
    """A discrete alignment: (source index, target index) pairs with set semantics."""

    model_config = ConfigDict(frozen=True)

    links: FrozenSet[Link] = Field(default_factory=frozenset)
    source_len: Optional[int] = None
    target_len: Optional[int] = None

    @model_validator(mode="after")
    def _check_ranges(self) -> "AlignmentSet":
        for j, i in self.links:
            if j < 0 or i < 0:
                raise ValueError(f"negative alignment index in link {(j, i)}")
            if self.source_len is not None and j >= self.source_len:
                raise ValueError(f"source index {j} outside sentence of length {self.source_len}")
            if self.target_len is not None and i >= self.target_len:
                raise ValueError(f"target index {i} outside sentence of length {self.target_len}")
        return self

    @classmethod
    def of(cls, links: Iterable[Link], source_len: Optional[int] = None, target_len: Optional[int] = None) -> "AlignmentSet":
        return cls(links=frozenset((int(j), int(i)) for j, i in links), source_len=source_len, target_len=target_len)

    def __len__(self) -> int:
        return len(self.links)

    def __contains__(self, link: object) -> bool:
        return link in self.links

    def sorted_links(self) -> List[Link]:
        """Links in (target, source) order, the order sweeps visit them."""
        return sorted(self.links, key=lambda link: (link[1], link[0]))

    def transpose(self) -> "AlignmentSet":
        return AlignmentSet.of(((i, j) for j, i in self.links), self.target_len, self.source_len)


class GoldAlignment(BaseModel):
    """Sure links S and possible links P; S is folded into P on construction."""

    model_config = ConfigDict(frozen=True)

    sure: FrozenSet[Link] = Field(default_factory=frozenset)
    possible: FrozenSet[Link] = Field(default_factory=frozenset)

    @model_validator(mode="after")
    def _sure_is_possible(self) -> "GoldAlignment":
        if not self.sure <= self.possible:
            object.__setattr__(self, "possible", self.possible | self.sure)
        return self

    @classmethod
    def all_sure(cls, links: Iterable[Link]) -> "GoldAlignment":
        links = frozenset(links)
        return cls(sure=links, possible=links)


# ── Configuration Models ──


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ModelConfig(_Strict):
    d_emb: int = 64
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 256
    dropout: float = 0.1
    share_embeddings: bool = True
    max_positions: int = 256

    @model_validator(mode="after")
    def _check_dims(self) -> "ModelConfig":
        for name in ("d_emb", "n_layers", "n_heads", "d_ff", "max_positions"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_emb % self.n_heads:
            raise ValueError(f"d_emb={self.d_emb} is not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        return self

    @property
    def d_k(self) -> int:
        return self.d_emb // self.n_heads


TrainMode = Literal["baseline-nll", "multitask", "multitask-full-context"]


class MultiTaskConfig(_Strict):
    align_lambda: float = Field(0.05, ge=0.0)
    align_layer: Optional[int] = None  # 1-based; None means the penultimate layer
    align_head: int = Field(1, ge=1)  # 1-based
    full_context: bool = True
    supervision: Literal["self", "external"] = "self"

    @field_validator("align_layer", mode="before")
    @classmethod
    def _blank_is_none(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none", "penultimate"):
            return None
        return value

    def resolved_layer(self, n_layers: int) -> int:
        layer = self.align_layer if self.align_layer is not None else max(1, n_layers - 1)
        if not 1 <= layer <= n_layers:
            raise ParameterError(f"align_layer {layer} outside [1, {n_layers}]")
        return layer

    def resolved_head(self, n_heads: int) -> int:
        if not 1 <= self.align_head <= n_heads:
            raise ParameterError(f"align_head {self.align_head} outside [1, {n_heads}]")
        return self.align_head

    @classmethod
    def for_mode(cls, mode: TrainMode, **overrides) -> "MultiTaskConfig":
        if mode == "baseline-nll":
            overrides["align_lambda"] = 0.0
        else:
            overrides.setdefault("full_context", mode == "multitask-full-context")
        return cls(**overrides)


class TrainingConfig(_Strict):
    epochs: int = Field(15, ge=1)
    max_tokens: int = Field(1000, ge=1)  # target tokens per batch
    lr: float = Field(1e-3, gt=0.0)
    warmup_steps: int = Field(50, ge=0)
    beta1: float = 0.9
    beta2: float = 0.98
    label_smoothing: float = Field(0.1, ge=0.0, lt=1.0)
    patience: int = Field(3, ge=1)
    average_last: int = Field(3, ge=1)
    clip_norm: Optional[float] = None
    validation_fraction: float = Field(0.05, ge=0.0, lt=1.0)

    @field_validator("clip_norm", mode="before")
    @classmethod
    def _blank_is_none(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none", "off"):
            return None
        return value


class BpeConfig(_Strict):
    merges: int = Field(500, ge=0)
    marker: str = "@@"


class FilterConfig(_Strict):
    max_words: int = Field(100, ge=1)
    max_ratio: float = Field(1.5, gt=0.0)


class AlignerConfig(_Strict):
    model: Literal["ibm1", "hmm"] = "hmm"
    ibm1_iterations: int = Field(5, ge=1)
    hmm_iterations: int = Field(5, ge=0)
    max_jump: int = Field(7, ge=1)
    null_prob: float = Field(0.2, gt=0.0, lt=1.0)
    use_null: bool = True
    subword_level: bool = True


Variant = Literal["multitask", "multitask-full-context", "external"]


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int = 1
    bidirectional: bool = True
    beam_size: int = Field(5, ge=1)
    max_decode_len: int = Field(100, ge=1)
    final_and: bool = False
    model: ModelConfig = Field(default_factory=ModelConfig)
    multitask: MultiTaskConfig = Field(default_factory=MultiTaskConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    bpe: BpeConfig = Field(default_factory=BpeConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    aligner: AlignerConfig = Field(default_factory=AlignerConfig)
    variants: List[Variant] = Field(default_factory=lambda: ["multitask", "multitask-full-context", "external"])

    @field_validator("variants", mode="before")
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @model_validator(mode="after")
    def _alignment_head_exists(self) -> "ExperimentConfig":
        self.multitask.resolved_layer(self.model.n_layers)
        self.multitask.resolved_head(self.model.n_heads)
        return self


# ── Score Models ──


class AlignmentScore(BaseModel):
    """Counts and rates for one sentence or a whole corpus."""

    aer: float
    precision: float
    recall: float
    hyp_count: int  # |A|
    sure_count: int  # |S|
    possible_count: int  # |P|
    sure_matches: int = 0  # |A ∩ S|
    possible_matches: int = 0  # |A ∩ P|


class ScoreRow(BaseModel):
    """One line of a model comparison table."""

    model: str
    aer: float
    precision: float
    recall: float
    hyp_count: int
    sure_count: int
    possible_count: int
    p_value: Optional[float] = None
    baseline: str = ""


class SignificanceResult(BaseModel):
    """Two-sided Wilcoxon signed-rank outcome."""

    statistic: float  # Σ sign(d) * rank(|d|)
    p_value: float
    significant: bool
    n: int  # non-zero differences
    exact: bool


class ExperimentResult(BaseModel):
    """Everything the end-to-end experiment reports."""

    name: str
    output_dir: str
    rows: List[ScoreRow] = Field(default_factory=list)
    per_layer: Dict[str, AlignmentScore] = Field(default_factory=dict)
    epochs: Dict[str, List[Dict[str, Optional[float]]]] = Field(default_factory=dict)
    significance: Dict[str, SignificanceResult] = Field(default_factory=dict)
    elapsed_seconds: float = 0.0
