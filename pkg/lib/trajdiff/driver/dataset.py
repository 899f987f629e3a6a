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
Scenario datasets on disk.

A dataset file holds one JSON object per line.  The first line is the
manifest (generator version, master seed, count and generator
parameters); each following line is one scenario record.
"""

import dataclasses
import json
import logging

from tqdm import tqdm

from ..errors import ScenarioError
from ..world import (WorldParams, generate_scenario, scenario_from_record,
                     scenario_seed, scenario_to_record)

__all__ = ['GENERATOR_VERSION', 'Dataset', 'make_dataset', 'write_dataset',
           'read_dataset']

log = logging.getLogger(__name__)

GENERATOR_VERSION = 1


@dataclasses.dataclass(eq=False)
class Dataset:
    scenarios: list
    params: WorldParams
    master_seed: int = 0

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, i):
        return self.scenarios[i]

    @property
    def meta(self):
        return self.params.meta

    def manifest(self):
        return {'kind': 'manifest', 'generator_version': GENERATOR_VERSION,
                'master_seed': int(self.master_seed), 'count': len(self.scenarios),
                'params': self.params.to_dict()}


def make_dataset(master_seed, count, params=None, first_index=0, progress=False):
    """
    Generate *count* scenarios whose seeds derive from *master_seed* and
    their index (starting at *first_index*), so any subset can be
    regenerated independently.
    """
    params = WorldParams() if params is None else params
    indices = range(first_index, first_index + count)
    scenarios = [generate_scenario(scenario_seed(master_seed, i), params)
                 for i in tqdm(indices, desc='scenarios', disable=not progress)]
    log.info('generated %d scenarios from master seed %d', count, master_seed)
    return Dataset(scenarios, params, master_seed)


def write_dataset(path, dataset):
    with open(path, 'w') as fd:
        fd.write(json.dumps(dataset.manifest(), sort_keys=True) + '\n')
        for s in dataset.scenarios:
            fd.write(json.dumps(scenario_to_record(s), sort_keys=True) + '\n')
    log.info('wrote %d scenarios to %s', len(dataset), path)


def read_dataset(path):
    with open(path) as fd:
        lines = [line for line in fd if line.strip()]
    if not lines:
        raise ScenarioError('%s: empty dataset file' % path)
    manifest = json.loads(lines[0])
    if manifest.get('kind') != 'manifest':
        raise ScenarioError('%s: first line is not a manifest' % path)
    if manifest['generator_version'] != GENERATOR_VERSION:
        raise ScenarioError('%s: generator version %r, expected %r'
                            % (path, manifest['generator_version'], GENERATOR_VERSION))
    scenarios = [scenario_from_record(json.loads(line)) for line in lines[1:]]
    if len(scenarios) != manifest['count']:
        raise ScenarioError('%s: manifest announces %d scenarios, found %d'
                            % (path, manifest['count'], len(scenarios)))
    return Dataset(scenarios, WorldParams.from_dict(manifest['params']),
                   manifest['master_seed'])
