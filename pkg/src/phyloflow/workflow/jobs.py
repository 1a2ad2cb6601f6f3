"""Job domain model: states, the transition table, and the status view.

The transition table is data, not code, so the state machine can be
property-tested exhaustively and the engine can reject illegal calls
before touching any state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..errors import PhyloflowError
from ..mcmc import McmcConfig
from ..phylomodel import SubstitutionModel
from ..seqio import Alignment


class InvalidTransition(PhyloflowError):
    code = "invalid_transition"


class NoOutputs(PhyloflowError):
    code = "no_outputs"


class ContentMismatch(PhyloflowError):
    code = "content_mismatch"


class JobState(str, Enum):
    Draft = "Draft"
    SequencesLoaded = "SequencesLoaded"
    Aligning = "Aligning"
    AlignmentReady = "AlignmentReady"
    Configured = "Configured"
    Queued = "Queued"
    Running = "Running"
    Complete = "Complete"
    Failed = "Failed"
    Cancelled = "Cancelled"


TERMINAL_STATES = frozenset(
    {JobState.Complete, JobState.Failed, JobState.Cancelled}
)

# operation -> (states it is legal in, state it moves to; None = unchanged)
TRANSITIONS: dict[str, tuple[frozenset[JobState], JobState | None]] = {
    "attach_sequences": (
        frozenset({JobState.Draft, JobState.SequencesLoaded}),
        JobState.SequencesLoaded,
    ),
    "request_alignment": (
        frozenset({JobState.SequencesLoaded, JobState.AlignmentReady}),
        JobState.Aligning,
    ),
    "alignment_done": (frozenset({JobState.Aligning}), JobState.AlignmentReady),
    "alignment_failed": (frozenset({JobState.Aligning}), JobState.AlignmentReady),
    "accept_alignment": (
        frozenset({JobState.SequencesLoaded, JobState.AlignmentReady}),
        None,
    ),
    "replace_alignment": (
        frozenset({JobState.SequencesLoaded, JobState.AlignmentReady}),
        None,
    ),
    "configure": (
        frozenset(
            {JobState.SequencesLoaded, JobState.AlignmentReady, JobState.Configured}
        ),
        JobState.Configured,
    ),
    "submit": (frozenset({JobState.Configured}), JobState.Queued),
    "task_started": (
        frozenset({JobState.Queued, JobState.Running}),
        JobState.Running,
    ),
    "all_runs_done": (frozenset({JobState.Running}), JobState.Complete),
    "job_failed": (
        frozenset({JobState.Queued, JobState.Running}),
        JobState.Failed,
    ),
    "cancel": (
        frozenset(set(JobState) - TERMINAL_STATES),
        JobState.Cancelled,
    ),
}

# read gates (not transitions)
FETCH_STATES = frozenset(
    {JobState.Running, JobState.Complete, JobState.Cancelled, JobState.Failed}
)


def advance_state(state: JobState, op: str) -> JobState:
    """Next state for op, or InvalidTransition if op is illegal in state."""
    try:
        allowed, target = TRANSITIONS[op]
    except KeyError:
        raise InvalidTransition(f"unknown operation {op!r}") from None
    if state not in allowed:
        raise InvalidTransition(f"operation {op!r} is not legal in state {state.value}")
    return target if target is not None else state


@dataclass(frozen=True)
class StatusView:
    """The two-word status the portal shows, plus the precise state badge."""

    coarse: str  # "in progress" | "complete"
    detail: str


def status_view(state: JobState) -> StatusView:
    coarse = "complete" if state is JobState.Complete else "in progress"
    return StatusView(coarse=coarse, detail=state.value)


@dataclass
class RunProgress:
    gen: int = 0
    cold_lnl: float | None = None
    swaps_attempted: int = 0
    swaps_accepted: int = 0
    done: bool = False


@dataclass
class Job:
    id: str
    owner: str
    name: str
    description: str
    created_at: float
    state: JobState = JobState.Draft
    datafile: str = "data.nex"
    alignment: Alignment | None = None
    alignment_accepted: bool = False
    conservation: tuple[float, ...] | None = None
    lset_text: str | None = None
    model: SubstitutionModel | None = None
    mcmc_cfg: McmcConfig | None = None
    outputs: list[str] = field(default_factory=list)
    history: list[tuple[float, str, str]] = field(default_factory=list)
    progress: dict[int, RunProgress] = field(default_factory=dict)
    task_ids: dict[str, int] = field(default_factory=dict)  # task id -> run
    error: str | None = None

    @property
    def runs(self) -> int:
        return self.mcmc_cfg.nruns if self.mcmc_cfg else 1
