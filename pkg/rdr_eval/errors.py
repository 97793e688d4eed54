# Copyright 2025 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Exceptions raised by the toolkit and their command-line exit codes."""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class RdrError(Exception):
  """Base class for all toolkit errors."""

  exit_code = EXIT_DATA


class ShapeError(RdrError, ValueError):
  """Array dimensions do not line up."""


class DomainError(RdrError, ValueError):
  """An argument lies outside the domain of a function."""


class SingularSystemError(RdrError, ArithmeticError):
  """A linear system or design matrix is singular.

  Attributes:
      columns: Names or indices of the columns involved, when known.
  """

  def __init__(self, message: str, columns: list[str] | None = None):
    super().__init__(message)
    self.columns = list(columns or [])


class DataError(RdrError, ValueError):
  """An input file is missing, malformed or misaligned."""


class ModelFormatError(DataError):
  """A serialized model document cannot be decoded.

  Attributes:
      offset: Byte offset of the failure, when known.
  """

  def __init__(self, message: str, offset: int | None = None):
    super().__init__(message)
    self.offset = offset


class NumericError(RdrError, ArithmeticError):
  """Training produced a non-finite loss.

  Attributes:
      last_finite_epoch: Last epoch whose losses were finite, or -1.
  """

  exit_code = EXIT_NUMERIC

  def __init__(self, message: str, last_finite_epoch: int = -1):
    super().__init__(message)
    self.last_finite_epoch = last_finite_epoch


class ConfigError(RdrError, ValueError):
  """A run configuration or command-line combination is invalid."""

  exit_code = EXIT_USAGE


class UsageError(RdrError):
  """A guard rail refused the requested action."""

  exit_code = EXIT_USAGE


def exit_code_for(error: BaseException) -> int:
  """Maps an exception to the stable command-line exit code."""
  if isinstance(error, RdrError):
    return error.exit_code
  if isinstance(error, OSError):
    return EXIT_DATA
  raise TypeError(f"no exit code for {type(error).__name__}") from error
