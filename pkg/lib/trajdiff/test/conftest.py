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

import json

import pytest

from trajdiff.driver.config import TrainConfig
from trajdiff.driver.dataset import make_dataset
from trajdiff.driver.studies import StudyConfig
from trajdiff.driver.training import train

# a model and grid small enough to train in seconds
TINY = dict(epochs=1, batch_size=4, width=8, heads=2, encoder_depth=1, eb_depth=1,
            qformer_depth=1, bev_queries=4, blocks=1, T=10, ddim_steps=5,
            grid_height=16, grid_width=16, grid_resolution=2.0,
            grid_origin_x=-7.0, grid_origin_y=-15.0, resample_offsets=(0.5,),
            progress=False)


@pytest.fixture(scope='session')
def tiny_cfg():
    return TrainConfig(**TINY)


@pytest.fixture(scope='session')
def tiny_data(tiny_cfg):
    return make_dataset(0, 3, tiny_cfg.world_params())


@pytest.fixture(scope='session')
def tiny_run(tiny_cfg, tiny_data):
    """Two epochs on three scenarios."""
    return train(tiny_cfg.replace(epochs=2), tiny_data)


@pytest.fixture
def tiny_cfg_file(tmp_path):
    path = tmp_path / 'tiny.json'
    path.write_text(json.dumps(TINY))
    return str(path)


@pytest.fixture(scope='session')
def tiny_study_cfg():
    return StudyConfig(train_count=3, val_count=2, extra_count=1, study_seeds=(0,),
                       **TINY)
