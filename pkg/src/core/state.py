"""
Core state management for the sweep orchestrator.
This module defines the shared sweep state, the per-row result record and
progress tracking used while a sweep runs.
"""

import uuid
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class CellStatus(str, Enum):
    """Status of one (replicate, gamma) cell of a sweep."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class SweepRow(BaseModel):
    """One (seed, gamma, theta, k) line of a sweep's result table."""
    seed: int
    replicate: int
    gamma: float
    theta: float
    k: int
    E: float
    vote_error: float
    delta_u: float
    delta_s: float
    probe_norm: float
    norm_cap: float
    bound: float
    active_term: int = 0
    gate: str = "n/a"


class SweepState(BaseModel):
    """
    Central state for one sweep run.
    The orchestrator nodes read and write it; the manifest is rendered from it.
    """
    session_id: str = Field(default_factory=lambda: str(uuid.uuid4()))
    created_at: datetime = Field(default_factory=datetime.now)
    updated_at: datetime = Field(default_factory=datetime.now)

    config_hash: str = ""

    cell_statuses: Dict[str, CellStatus] = Field(default_factory=dict)
    cell_errors: Dict[str, str] = Field(default_factory=dict)
    cell_timings: Dict[str, float] = Field(default_factory=dict)

    routing_decisions: List[str] = Field(default_factory=list)

    progress_updates: List[Dict[str, Any]] = Field(default_factory=list)
    current_step: str = "initializing"
    completion_percentage: float = 0.0

    def update_cell_status(self, cell_id: str, status: CellStatus, error: Optional[str] = None,
                           seconds: Optional[float] = None):
        """Update the status of a specific cell."""
        self.cell_statuses[cell_id] = status
        self.updated_at = datetime.now()

        if error is not None:
            self.cell_errors[cell_id] = error
        if seconds is not None:
            self.cell_timings[cell_id] = seconds

        self.progress_updates.append({
            "timestamp": self.updated_at.isoformat(),
            "cell_id": cell_id,
            "status": status.value,
            "message": f"cell {cell_id} is now {status.value}",
        })

    def update_progress(self, step: str, percentage: float, message: str = ""):
        """Update overall sweep progress."""
        self.current_step = step
        self.completion_percentage = min(100.0, max(0.0, percentage))
        self.progress_updates.append({
            "timestamp": datetime.now().isoformat(),
            "step": step,
            "percentage": self.completion_percentage,
            "message": message,
        })

    def cells_with(self, status: CellStatus) -> List[str]:
        return sorted(cell for cell, s in self.cell_statuses.items() if s == status)
