"""Test-function suite, experimental designs and the experiment harness."""

from .designs import DesignSpec, equispaced, latin_hypercube, make_design, nested_lhd, offset_equispaced
from .experiments import EXPERIMENTS, ExperimentResult, run_experiment
from .functions import BRANCHES, DEFAULT_BRANCH, SUITE, TestFunction, eval_testfn

__all__ = ["BRANCHES", "DEFAULT_BRANCH", "DesignSpec", "EXPERIMENTS", "ExperimentResult", "SUITE",
           "TestFunction", "equispaced", "eval_testfn", "latin_hypercube", "make_design", "nested_lhd",
           "offset_equispaced", "run_experiment"]
