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

"""Generates the published JSON schema of run configuration files."""

import json
import logging
import os

from rdr_eval import config
from rdr_eval.utils import ROOT_DIR

logger = logging.getLogger(__name__)

SCHEMA_PATH = os.path.join(ROOT_DIR, "docs", "config.schema.json")


def render_schema() -> str:
  return json.dumps(config.json_schema(), indent=2) + "\n"


def update_schema(path: str = SCHEMA_PATH) -> bool:
  """Rewrites the schema file unless it is already current.

  Returns:
      Whether the file was written.
  """
  text = render_schema()
  if os.path.isfile(path):
    with open(path, "r", encoding="utf-8") as f:
      if f.read() == text:
        return False

  os.makedirs(os.path.dirname(path), exist_ok=True)
  with open(path, "w", encoding="utf-8") as f:
    f.write(text)
  logger.info("wrote %s", path)
  return True


if __name__ == "__main__":
  update_schema()
