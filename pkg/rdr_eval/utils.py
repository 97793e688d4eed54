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

"""Utility functions for the relative density ratio toolkit."""

import hashlib
import os

from rdr_eval import __version__

MODULE_DIR = os.path.dirname(__file__)
ROOT_DIR = os.path.dirname(MODULE_DIR)
VERSION = __version__


def format_float(value: float) -> str:
  """Formats a float with the shortest decimal that round-trips exactly."""
  return repr(float(value))


def file_sha256(path: str) -> str:
  """Returns the hex SHA-256 digest of a file's bytes."""
  digest = hashlib.sha256()
  with open(path, "rb") as f:
    for chunk in iter(lambda: f.read(1 << 16), b""):
      digest.update(chunk)
  return digest.hexdigest()
