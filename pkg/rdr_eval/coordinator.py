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

"""Module declaring the singleton command line.

The singleton allows command modules to register their subcommands with the
same parser using @cli.command annotations, thereby 'coordinating' the
bootstrapping of the command line.
"""

import argparse
import dataclasses
import logging
import os
import sys
from typing import Any, Callable

from rdr_eval import datasets
from rdr_eval.errors import exit_code_for
from rdr_eval.errors import EXIT_OK
from rdr_eval.errors import RdrError
from rdr_eval.errors import UsageError
from rdr_eval.utils import VERSION

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "RDR_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclasses.dataclass
class CommandResult:
  """What a command read, wrote and reports.

  Attributes:
      inputs: Files read.
      outputs: Files written.
      seed: Seed in effect, or None for seedless commands.
      result: JSON-ready payload of the envelope.
      manifest: Where to write the manifest, or None.
  """

  inputs: list[str]
  outputs: list[str]
  seed: int | None
  result: Any
  manifest: str | None = None


@dataclasses.dataclass
class Command:
  name: str
  help: str
  handler: Callable[[argparse.Namespace], CommandResult]
  arguments: Callable[[argparse.ArgumentParser], None] | None = None


class _Parser(argparse.ArgumentParser):
  """Reports usage problems as UsageError instead of exiting."""

  def error(self, message):
    self.print_usage(sys.stderr)
    raise UsageError(f"{self.prog}: {message}")


class CommandLine:
  """Registry of subcommands sharing one parser."""

  def __init__(self, prog: str, description: str):
    self.prog = prog
    self.description = description
    self.commands: dict[str, Command] = {}

  def command(self, name: str, help: str = "",  # pylint: disable=redefined-builtin
              arguments=None):
    """Registers the decorated function as the handler of `name`."""

    def register(handler):
      if name in self.commands:
        raise ValueError(f"command {name} is already registered")
      self.commands[name] = Command(name, help or (handler.__doc__ or ""),
                                    handler, arguments)
      return handler

    return register

  def parser(self) -> argparse.ArgumentParser:
    parser = _Parser(prog=self.prog, description=self.description)
    parser.add_argument("--version", action="version", version=VERSION)
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help=f"Log level on standard error (default: ${LOG_LEVEL_ENV} or"
        " WARNING).",
    )
    subparsers = parser.add_subparsers(dest="command", required=True,
                                       parser_class=_Parser)
    for command in self.commands.values():
      sub = subparsers.add_parser(command.name, help=command.help.split("\n")[0],
                                  description=command.help)
      if command.arguments:
        command.arguments(sub)
    return parser

  def run(self, argv: list[str] | None = None) -> int:
    """Parses argv, runs one command and prints its JSON line.

    Returns:
        The process exit code.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    command = None
    try:
      args = self.parser().parse_args(argv)
      command = args.command
      configure_logging(args.log_level)
      result = self.commands[command].handler(args)
      if result.manifest:
        datasets.write_manifest(result.manifest, command, argv, result.seed,
                                result.inputs, result.outputs)
        result.outputs.append(result.manifest)
      print(datasets.envelope(command, result.inputs, result.outputs,
                              result.seed, result.result), flush=True)
      return EXIT_OK
    except (RdrError, OSError) as e:
      code = exit_code_for(e)
      logger.error("%s failed: %s", command or self.prog, e)
      print(datasets.error_envelope(command, e, code), flush=True)
      return code


def configure_logging(level: str | None = None) -> None:
  """Sends log records to standard error at the requested level."""
  name = (level or os.environ.get(LOG_LEVEL_ENV) or "WARNING").upper()
  if name not in logging.getLevelNamesMapping():
    raise UsageError(f"unknown log level {name}")
  logging.basicConfig(stream=sys.stderr, level=name, format=LOG_FORMAT,
                      force=True)


# Creates the singleton.
cli = CommandLine(
    "rdr-eval",
    "Relative density ratio estimation and diagnostics for comparing a real"
    " sample with a generated one.",
)
