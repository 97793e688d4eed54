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

"""The synth command: samples and oracle tables for benchmark scenarios."""

import argparse
import os

from rdr_eval import datasets
from rdr_eval import numerics
from rdr_eval import synthetic
from rdr_eval.config import seed_from_env
from rdr_eval.coordinator import cli
from rdr_eval.coordinator import CommandResult

SCENARIOS = ("gauss-shift", "beta-mixture")
CASES = ("partial-precision", "partial-recall", "mode-reweight")


def add_arguments(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--scenario", choices=SCENARIOS, required=True)
  parser.add_argument("--delta", type=float, default=None,
                      help="Mean shift of Q for gauss-shift.")
  parser.add_argument("--case", choices=CASES, default=None,
                      help="Regime of beta-mixture.")
  parser.add_argument("--n-p", type=int, default=1000)
  parser.add_argument("--n-q", type=int, default=1000)
  parser.add_argument("--seed", type=int, default=None)
  parser.add_argument("--oracle-points", type=int,
                      default=synthetic.ORACLE_POINTS)
  parser.add_argument("--out-dir", required=True)


@cli.command("synth", arguments=add_arguments)
def synth(args: argparse.Namespace) -> CommandResult:
  """Draws P and Q samples of a scenario and writes its oracle table.

  Writes xp.csv, xq.csv and oracle.csv (x, p, q, g, r) into --out-dir.
  """
  scenario = synthetic.Scenario.parse(args.scenario, args.delta, args.case)
  seed = args.seed if args.seed is not None else seed_from_env()
  xp, xq = synthetic.sample(scenario, args.n_p, args.n_q,
                            numerics.RngState(seed))
  oracle = synthetic.oracle_table(scenario, args.oracle_points)
  outputs = [
      datasets.write_dataset(os.path.join(args.out_dir, "xp.csv"), xp),
      datasets.write_dataset(os.path.join(args.out_dir, "xq.csv"), xq),
      datasets.write_frame(os.path.join(args.out_dir, "oracle.csv"),
                           oracle),
  ]
  return CommandResult(
      inputs=[],
      outputs=outputs,
      seed=seed,
      result={
          "scenario": scenario.name,
          "n_p": xp.n_rows,
          "n_q": xq.n_rows,
          "h2_q": synthetic.quadrature_h2(scenario, "q"),
          "h2_mixture": synthetic.quadrature_h2(scenario, "mixture"),
      },
      manifest=os.path.join(args.out_dir, "manifest.json"),
  )
