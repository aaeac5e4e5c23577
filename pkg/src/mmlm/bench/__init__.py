"""Random quadratic benchmark family, comparison runner and trace files."""

from .instances import Instance, InstanceSpec, generate_instance
from .runner import SuiteConfig, global_suite, local_suite, run_comparison, run_single
