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

"""Entry point of the rdr-eval command line."""

import sys

from rdr_eval.commands import attribute
from rdr_eval.commands import compare
from rdr_eval.commands import evaluate
from rdr_eval.commands import synth
from rdr_eval.commands import train
from rdr_eval.coordinator import cli

import dotenv


dotenv.load_dotenv()


commands = [synth, train, evaluate, compare, attribute]


def main(argv: list[str] | None = None) -> int:
  """Runs one subcommand and returns its exit code."""
  return cli.run(argv)


if __name__ == "__main__":
  sys.exit(main())
