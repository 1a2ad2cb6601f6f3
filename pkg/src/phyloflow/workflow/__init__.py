"""Job workflow: states, proxies, master-block rendering, persistence."""

from .engine import NotConfigured, UnknownJob, WorkflowEngine
from .jobs import (
    FETCH_STATES,
    TERMINAL_STATES,
    TRANSITIONS,
    ContentMismatch,
    InvalidTransition,
    Job,
    JobState,
    NoOutputs,
    StatusView,
    advance_state,
    status_view,
)
from .master import render_master_block
from .proxy import (
    ExpiredProxy,
    ProxyCredential,
    RenewOnUserProxy,
    init_proxy,
    renew_admin_proxy,
)

__all__ = [
    "WorkflowEngine",
    "Job",
    "JobState",
    "StatusView",
    "ProxyCredential",
    "TRANSITIONS",
    "TERMINAL_STATES",
    "FETCH_STATES",
    "InvalidTransition",
    "ContentMismatch",
    "NoOutputs",
    "NotConfigured",
    "UnknownJob",
    "ExpiredProxy",
    "RenewOnUserProxy",
    "advance_state",
    "status_view",
    "render_master_block",
    "init_proxy",
    "renew_admin_proxy",
]
