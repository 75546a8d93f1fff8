"""Text format for describing membrane-computer scenarios."""

from .ast import ScenarioAst
from .lexer import Diagnostic, ScenarioError
from .lower import Scenario, load_scenario, lower
from .parser import parse
from .serialize import serialize

__all__ = [
    "Diagnostic",
    "Scenario",
    "ScenarioAst",
    "ScenarioError",
    "load_scenario",
    "lower",
    "parse",
    "serialize",
]
