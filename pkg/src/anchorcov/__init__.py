"""Anchor-follower decentralized coverage on a layered feedforward network."""

from .analysis import analyze
from .planner import plan
from .simulator import Scenario, run
from .structuring import AgentConfig, build_structure, validate_structure

__version__ = "0.1.0"

__all__ = ["AgentConfig", "Scenario", "analyze", "build_structure", "plan", "run",
           "validate_structure", "__version__"]
