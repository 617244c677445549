from .benchmark import Benchmark, run_batch, run_experiments

__version__ = "0.1.0"
__all__ = ["__version__", "Benchmark", "run_batch", "run_experiments"]
