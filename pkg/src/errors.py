"""
Exception hierarchy shared by the library and the pipeline stages.

Library code raises; only the stage scripts under pipelines/augment-bench translate an
exception into a process exit code via its ``exit_code`` attribute.

  0  ok
  2  config / dataset error
  3  backend error
  4  numeric failure
"""


class BenchError(Exception):
    """Base for every error the pipeline knows how to report."""
    exit_code = 1


class ConfigError(BenchError, ValueError):
    """Invalid configuration value or violated precondition on a configured type."""
    exit_code = 2


class DatasetError(ConfigError):
    """Manifest, split, or image problem that makes the input unusable."""
    exit_code = 2


class BackendError(BenchError, RuntimeError):
    """A generative or scoring backend failed to answer."""
    exit_code = 3


class NumericError(BenchError, ArithmeticError):
    """Non-finite loss, logits or gradients."""
    exit_code = 4
