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

import collections

import numpy as np
import pytest

from trajdiff.driver.checkpoint import (FORMAT_VERSION, Checkpoint, checkpoint_bytes,
                                        checkpoint_from_bytes, load_checkpoint,
                                        save_checkpoint)
from trajdiff.driver.training import train
from trajdiff.errors import CheckpointError


def sample_checkpoint(version=FORMAT_VERSION):
    rng = np.random.default_rng(0)
    tensors = collections.OrderedDict([
        ('param/w', rng.standard_normal((3, 4)).astype(np.float32)),
        ('param/b', np.zeros(4, dtype=np.float32)),
        ('adam_m/w', rng.standard_normal((3, 4))),
        ('adam_v/w', rng.uniform(size=(3, 4))),
    ])
    return Checkpoint({'epochs': 2, 'lr': 3e-4}, tensors,
                      {'mean': [0.0, 1.0, 2.0], 'std': [1.0, 1.0, 1.0]},
                      rng.bit_generator.state, epoch=2, optimizer_step=6,
                      version=version)


def test_round_trip():
    ckpt = sample_checkpoint()
    back = checkpoint_from_bytes(checkpoint_bytes(ckpt))
    assert back.config == ckpt.config
    assert back.normalizer == ckpt.normalizer
    assert back.rng_state == ckpt.rng_state
    assert (back.epoch, back.optimizer_step) == (2, 6)
    assert list(back.tensors) == list(ckpt.tensors)
    for name, value in ckpt.tensors.items():
        assert back.tensors[name].dtype == value.dtype
        assert np.array_equal(back.tensors[name], value)
    assert list(back.params()) == ['w', 'b']
    assert list(back.moments('adam_v')) == ['w']


def test_save_load_save_is_byte_identical(tmp_path):
    first = tmp_path / 'a.tdc'
    second = tmp_path / 'b.tdc'
    save_checkpoint(sample_checkpoint(), str(first))
    save_checkpoint(load_checkpoint(str(first)), str(second))
    assert first.read_bytes() == second.read_bytes()


def test_restored_rng_continues_the_stream():
    ckpt = checkpoint_from_bytes(checkpoint_bytes(sample_checkpoint()))
    rng = np.random.default_rng()
    rng.bit_generator.state = ckpt.rng_state
    expected = np.random.default_rng(0)
    expected.standard_normal((3, 4))
    expected.uniform(size=(3, 4))
    assert np.array_equal(rng.standard_normal(5), expected.standard_normal(5))


def test_corrupt_byte_is_detected():
    data = bytearray(checkpoint_bytes(sample_checkpoint()))
    data[-20] ^= 0xFF
    with pytest.raises(CheckpointError) as e:
        checkpoint_from_bytes(bytes(data))
    assert 'checksum' in str(e.value)


def test_truncation_is_detected(tmp_path):
    data = checkpoint_bytes(sample_checkpoint())
    for cut in (10, len(data) // 2, len(data) - 1):
        with pytest.raises(CheckpointError):
            checkpoint_from_bytes(data[:cut])
    path = tmp_path / 'short.tdc'
    path.write_bytes(data[:100])
    with pytest.raises(CheckpointError) as e:
        load_checkpoint(str(path))
    assert 'short.tdc' in str(e.value)


def test_version_mismatch_names_both_versions():
    data = checkpoint_bytes(sample_checkpoint(version=FORMAT_VERSION + 1))
    with pytest.raises(CheckpointError) as e:
        checkpoint_from_bytes(data)
    message = str(e.value)
    assert 'version %d' % (FORMAT_VERSION + 1) in message
    assert 'version %d' % FORMAT_VERSION in message


def test_foreign_file():
    with pytest.raises(CheckpointError):
        checkpoint_from_bytes(b'NOTACKPT' + bytes(40))


def test_integer_tensors_rejected():
    ckpt = sample_checkpoint()
    ckpt.tensors['param/steps'] = np.arange(3)
    with pytest.raises(CheckpointError):
        checkpoint_bytes(ckpt)


def test_default_training_stores_32_bit_payloads(tiny_run):
    data = checkpoint_bytes(tiny_run.checkpoint)
    back = checkpoint_from_bytes(data)
    assert all(v.dtype == np.float32 for v in back.tensors.values())
    assert list(back.moments('adam_m')) == list(back.params())


def test_64_bit_runs_keep_their_dtype(tiny_cfg, tiny_data):
    run = train(tiny_cfg.replace(dtype='float64'), tiny_data)
    back = checkpoint_from_bytes(checkpoint_bytes(run.checkpoint))
    assert all(v.dtype == np.float64 for v in back.tensors.values())
    for name, value in run.checkpoint.tensors.items():
        assert np.array_equal(back.tensors[name], value)
