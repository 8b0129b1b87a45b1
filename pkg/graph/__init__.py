"""
Graph module for the LangGraph pipeline
"""

from .state import (
    PipelineState,
    create_initial_state
)
from .workflow import create_workflow, merge_state_update, run_workflow

__all__ = [
    'PipelineState',
    'create_initial_state',
    'create_workflow',
    'merge_state_update',
    'run_workflow',
]
