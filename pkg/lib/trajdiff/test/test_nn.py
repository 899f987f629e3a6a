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

import numpy as np
import pytest

from trajdiff import nn
from trajdiff import tensorcore as tc
from trajdiff.errors import ShapeError


def test_linear_shapes_and_zero_init():
    rng = np.random.default_rng(0)
    layer = nn.Linear(4, 3, rng)
    assert layer(np.ones((2, 5, 4))).shape == (2, 5, 3)
    assert layer(np.ones(4)).shape == (3,)
    assert np.all(np.abs(layer.weight.numpy()) <= 0.5)
    zero = nn.Linear(4, 3, rng, zero=True)
    assert np.array_equal(zero(rng.standard_normal((6, 4))).numpy(), np.zeros((6, 3)))
    with pytest.raises(ShapeError):
        layer(np.ones((2, 5)))


def test_parameter_names_are_stable():
    rng = np.random.default_rng(1)
    layer = nn.CrossAttentionLayer(8, 2, rng)
    names = [n for n, _ in layer.named_parameters()]
    assert names[:4] == ['norm_q.weight', 'norm_q.bias', 'norm_kv.weight', 'norm_kv.bias']
    assert 'attn.q.weight' in names
    assert 'mlp.fc2.bias' in names
    assert len(names) == len(set(names))


def test_list_children_are_found():
    rng = np.random.default_rng(2)

    class Stack(nn.Module):
        def __init__(self):
            self.layers = [nn.Linear(2, 2, rng), nn.Linear(2, 2, rng)]

    names = [n for n, _ in Stack().named_parameters()]
    assert names == ['layers.0.weight', 'layers.0.bias', 'layers.1.weight', 'layers.1.bias']


def test_state_dict_round_trip():
    a = nn.MLP(3, 5, 2, np.random.default_rng(3))
    b = nn.MLP(3, 5, 2, np.random.default_rng(4))
    x = np.random.default_rng(5).standard_normal((4, 3))
    assert not np.array_equal(a(x).numpy(), b(x).numpy())
    b.load_state_dict(a.state_dict())
    assert np.array_equal(a(x).numpy(), b(x).numpy())


def test_load_state_dict_rejects_mismatch():
    a = nn.Linear(3, 2, np.random.default_rng(6))
    state = a.state_dict()
    state['extra'] = np.zeros(1)
    with pytest.raises(KeyError):
        a.load_state_dict(state)
    state = a.state_dict()
    state['weight'] = np.zeros((2, 3))
    with pytest.raises(ShapeError):
        a.load_state_dict(state)


def test_zero_grad_and_count():
    layer = nn.Linear(3, 2, np.random.default_rng(7))
    assert layer.num_parameters() == 3 * 2 + 2
    tc.sum(layer(np.ones((1, 3)))).backward()
    assert layer.weight.grad is not None
    layer.zero_grad()
    assert all(p.grad is None for p in layer.parameters())


def test_attention_heads_must_divide_width():
    with pytest.raises(ShapeError):
        nn.MultiHeadAttention(6, 4, np.random.default_rng(8))


def test_shared_queries_broadcast_over_batch():
    rng = np.random.default_rng(9)
    attn = nn.MultiHeadAttention(8, 2, rng)
    queries = rng.standard_normal((3, 8))
    tokens = rng.standard_normal((4, 10, 8))
    out, weights = attn(queries, tokens, return_weights=True)
    assert out.shape == (4, 3, 8)
    assert weights.shape == (4, 2, 3, 10)
    assert np.allclose(weights.numpy().sum(axis=-1), 1.0)
    # each batch element matches a separate call
    single = attn(queries, tokens[1]).numpy()
    assert np.allclose(out.numpy()[1], single, atol=1e-12)


def test_cross_attention_layer_gradient():
    rng = np.random.default_rng(10)
    layer = nn.CrossAttentionLayer(8, 2, rng, mlp_ratio=2)
    x = rng.standard_normal((2, 3, 8))
    tokens = rng.standard_normal((2, 5, 8))
    r = rng.standard_normal((2, 3, 8))
    weight = layer.attn.k.weight
    err = tc.grad_check(lambda _: tc.sum(layer(x, tokens) * r), weight,
                        indices=[(0, 0), (3, 5), (7, 1), (2, 2), (5, 7)])
    assert err <= 1e-4


def test_conv2d_layer():
    rng = np.random.default_rng(11)
    conv = nn.Conv2d(3, 5, 3, rng)
    assert conv(rng.standard_normal((2, 6, 6, 3))).shape == (2, 6, 6, 5)
    zero = nn.Conv2d(3, 5, 3, rng, zero=True)
    assert not np.any(zero(rng.standard_normal((6, 6, 3))).numpy())


def test_float32_parameters():
    with tc.default_dtype(np.float32):
        layer = nn.Linear(3, 2, np.random.default_rng(12))
        assert layer.weight.dtype == np.float32
        assert layer(np.ones((1, 3))).dtype == np.float32
