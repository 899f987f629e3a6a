# Copyright (C) 2026 trajdiff developers

# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions are met:

#     1. Redistributions of source code must retain the above copyright
#       notice, this list of conditions and the following disclaimer.

#     2. Redistributions in binary form must reproduce the above
#       copyright notice, this list of conditions and the following
#       disclaimer in the documentation and/or other materials provided
#       with the distribution.

#     3. The names of the trajdiff developers may not be used to
#       endorse or promote products derived from this software without
#       specific prior written permission.

# THIS SOFTWARE IS PROVIDED BY THE TRAJDIFF DEVELOPERS ``AS IS'' AND ANY
# EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT LIMITED TO, THE IMPLIED
# WARRANTIES OF MERCHANTABILITY AND FITNESS FOR A PARTICULAR PURPOSE ARE
# DISCLAIMED. IN NO EVENT SHALL THE TRAJDIFF DEVELOPERS BE LIABLE FOR ANY
# DIRECT, INDIRECT, INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES
# (INCLUDING, BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR
# SERVICES; LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT
# LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY
# OUT OF THE USE OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF
# SUCH DAMAGE.

"""
Command line interface::

    trajdiff make-data --seed 0 --count 500 --out train.jsonl
    trajdiff train --config cfg.json --data train.jsonl --out run/
    trajdiff plan --ckpt run/checkpoint.tdc --scenario val.jsonl --index 3 --k 5
    trajdiff eval --ckpt run/checkpoint.tdc --data val.jsonl --report scores.csv
    trajdiff inspect-heatmap --scenario val.jsonl --out heat.pgm
    trajdiff ablate --config study.json --out ablation.csv

Errors of the library are logged and give exit status 1.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .. import tensorcore as tc
from ..errors import TrajDiffError
from ..heatmap import HeatmapTarget, gaussian_bev_target, waypoint_speeds, write_pgm
from ..scoring import constant_velocity_plan, mean_report, score_trajectory, write_score_table
from ..version import __version__
from ..world import generate_scenario, rasterize_scenario
from . import studies
from .config import load_config
from .dataset import make_dataset, read_dataset, write_dataset
from .planning import Planner, evaluate
from .training import train

__all__ = ['main', 'build_parser']

log = logging.getLogger(__name__)


def _load_scenario(args, params):
    """A scenario from a dataset file and index, or generated from an
    integer seed."""
    if os.path.exists(args.scenario):
        dataset = read_dataset(args.scenario)
        if not 0 <= args.index < len(dataset):
            raise TrajDiffError('%s has %d scenarios, no index %d'
                                % (args.scenario, len(dataset), args.index))
        return dataset[args.index]
    try:
        seed = int(args.scenario)
    except ValueError:
        raise TrajDiffError('%s is neither a dataset file nor a seed' % args.scenario)
    return generate_scenario(seed, params)


def cmd_make_data(args):
    cfg = load_config(args.config)
    dataset = make_dataset(args.seed, args.count, cfg.world_params(),
                           first_index=args.first_index, progress=cfg.progress)
    write_dataset(args.out, dataset)


def cmd_train(args):
    cfg = load_config(args.config)
    dataset = read_dataset(args.data)
    result = train(cfg, dataset, out_dir=args.out, resume=args.resume)
    if result.history:
        last = result.history[-1]
        log.info('final epoch %d: L_bev %.5f  L_diff %.5f  L_final %.5f',
                 last['epoch'], last['l_bev'], last['l_diff'], last['l_final'])


def cmd_plan(args):
    planner = Planner.from_checkpoint(args.ckpt)
    scenario = _load_scenario(args, planner.cfg.world_params())
    result = planner.plan(scenario, args.k, args.steps, args.seed)
    out = {
        'scenario': scenario.seed,
        'best_pdms': result.best.best,
        'pdms_std': result.best.std,
        'rollouts': [
            {'points': None if t is None else t.points.tolist(),
             'score': dict(zip(studies.SCORE_FIELDS, r.as_row()))}
            for t, r in zip(result.trajectories, result.reports)],
    }
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, 'w') as fd:
            fd.write(text + '\n')
    else:
        print(text)


def cmd_eval(args):
    dataset = read_dataset(args.data)
    if args.baseline:
        config = load_config(args.config).scoring_config()
        rows = [(s.seed, score_trajectory(s, constant_velocity_plan(s), config))
                for s in dataset]
    else:
        if args.ckpt is None:
            raise TrajDiffError('eval needs --ckpt unless --baseline is given')
        planner = Planner.from_checkpoint(args.ckpt)
        rows = evaluate(planner, dataset, args.k, args.steps, args.seed)
    mean = mean_report([r for _, r in rows])
    log.info('mean over %d scenarios: %s', len(rows),
             '  '.join('%s %.4f' % kv for kv in mean.items()))
    if args.report:
        write_score_table(args.report, rows)
    else:
        print(json.dumps(mean, indent=2))


def cmd_inspect_heatmap(args):
    cfg = load_config(args.config)
    planner = Planner.from_checkpoint(args.ckpt) if args.ckpt else None
    if planner is not None:
        cfg = planner.cfg
    scenario = _load_scenario(args, cfg.world_params())
    expert = scenario.expert
    target = gaussian_bev_target(expert, waypoint_speeds(expert, expert.dt),
                                 cfg.radius_policy(), scenario.meta,
                                 snap=cfg.heatmap_snap)
    write_pgm(target, args.out)
    if planner is not None:
        with tc.no_grad(), tc.default_dtype(cfg.np_dtype):
            enc = planner.model.encode(rasterize_scenario(scenario)[None],
                                       scenario.ego0.features()[None])
        root, ext = os.path.splitext(args.out)
        predicted = HeatmapTarget(np.asarray(enc.heatmap.numpy())[0, ..., 0],
                                  scenario.meta)
        write_pgm(predicted, root + '-pred' + (ext or '.pgm'))


def _study(run):
    def command(args):
        cfg = load_config(args.config, studies.StudyConfig)
        table = run(cfg, args.out)
        for row in table:
            if row['seed'] == 'mean':
                log.info('%s: PDMS %.4f', row['variant'], row['pdms'])
    return command


STUDIES = (
    ('scale-study', studies.run_scale_study,
     'resampling and extra-data grid'),
    ('ablate', studies.run_ablation, 'component ablation grid'),
    ('radius-study', studies.run_radius_study, 'heatmap radius policies'),
    ('noise-study', studies.run_noise_study, 'trajectory noise levels'),
    ('steps-study', studies.run_steps_study, 'DDIM step counts'),
    ('bok-study', studies.run_bok_study, 'best-of-K rollouts'),
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='trajdiff',
        description='Diffusion trajectory planner on synthetic driving scenarios.')
    parser.add_argument('--version', action='version', version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='more logging (repeat for debug output)')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('make-data', parents=[common], help='generate scenarios')
    p.add_argument('--seed', type=int, default=0, help='master seed')
    p.add_argument('--count', type=int, required=True)
    p.add_argument('--first-index', type=int, default=0)
    p.add_argument('--config', help='configuration file (grid and horizon)')
    p.add_argument('--out', required=True, help='dataset file to write')
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser('train', parents=[common], help='train a planner')
    p.add_argument('--config')
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True, help='run directory')
    p.add_argument('--resume', help='checkpoint to continue from')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('plan', parents=[common], help='plan one scenario')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--scenario', required=True,
                   help='dataset file, or an integer scenario seed')
    p.add_argument('--index', type=int, default=0)
    p.add_argument('--k', type=int, default=1)
    p.add_argument('--steps', type=int, default=None)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', help='JSON file; standard output by default')
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser('eval', parents=[common], help='score a dataset')
    p.add_argument('--ckpt')
    p.add_argument('--config', help='scoring thresholds for --baseline')
    p.add_argument('--data', required=True)
    p.add_argument('--report', help='CSV score table')
    p.add_argument('--k', type=int, default=1)
    p.add_argument('--steps', type=int, default=None)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--baseline', action='store_true',
                   help='score the constant-velocity plan instead of a model')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('inspect-heatmap', parents=[common],
                       help='write the heatmap target of a scenario as PGM')
    p.add_argument('--scenario', required=True,
                   help='dataset file, or an integer scenario seed')
    p.add_argument('--index', type=int, default=0)
    p.add_argument('--config')
    p.add_argument('--ckpt', help='also write the predicted heatmap')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_inspect_heatmap)

    for name, run, text in STUDIES:
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('--config')
        p.add_argument('--out', help='CSV table')
        p.set_defaults(func=_study(run))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    try:
        args.func(args)
    except (TrajDiffError, OSError, ValueError) as e:
        log.error('%s', e)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
