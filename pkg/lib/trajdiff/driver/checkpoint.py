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
Checkpoint files.

Layout::

    magic      8 bytes   b'TRAJDIFF'
    version    uint32 LE
    header_len uint64 LE
    header     JSON, sorted keys: config, tensor directory, normalizer,
               optimizer step, RNG state, epoch
    payload    concatenated little-endian tensors
    checksum   8 bytes, BLAKE2b-64 of everything above

Payloads are 32-bit floats for the default ``float32`` configuration.
Each directory entry also names its ``dtype``, so runs configured with
``dtype = "float64"`` store 64-bit payloads and still round-trip
bit-exactly.
"""

import collections
import dataclasses
import hashlib
import json
import logging
import struct

import numpy as np

from ..errors import CheckpointError

__all__ = ['FORMAT_VERSION', 'MAGIC', 'Checkpoint', 'save_checkpoint',
           'load_checkpoint', 'checkpoint_bytes', 'checkpoint_from_bytes']

log = logging.getLogger(__name__)

MAGIC = b'TRAJDIFF'
FORMAT_VERSION = 1
_PREFIX = struct.Struct('<8sIQ')
_CHECKSUM_SIZE = 8


@dataclasses.dataclass(eq=False)
class Checkpoint:
    """
    Training state.

    *tensors* maps names to arrays.  Model parameters are stored under
    ``param/<name>``, optimizer moments under ``adam_m/<name>`` and
    ``adam_v/<name>``.
    """

    config: dict
    tensors: collections.OrderedDict
    normalizer: dict
    rng_state: dict
    epoch: int = 0
    optimizer_step: int = 0
    version: int = FORMAT_VERSION

    def params(self):
        return collections.OrderedDict(
            (k[len('param/'):], v) for k, v in self.tensors.items()
            if k.startswith('param/'))

    def moments(self, kind):
        prefix = kind + '/'
        return collections.OrderedDict(
            (k[len(prefix):], v) for k, v in self.tensors.items()
            if k.startswith(prefix))


def _checksum(data):
    return hashlib.blake2b(data, digest_size=_CHECKSUM_SIZE).digest()


def checkpoint_bytes(ckpt):
    directory = []
    payload = []
    offset = 0
    for name, value in ckpt.tensors.items():
        arr = np.asarray(value)
        if arr.dtype not in (np.float32, np.float64):
            raise CheckpointError('tensor %s has unsupported dtype %s' % (name, arr.dtype))
        raw = arr.astype(arr.dtype.newbyteorder('<'), copy=False).tobytes()
        directory.append({'name': name, 'shape': list(arr.shape),
                          'dtype': arr.dtype.name, 'offset': offset,
                          'nbytes': len(raw)})
        payload.append(raw)
        offset += len(raw)
    header = {'config': ckpt.config, 'tensors': directory,
              'normalizer': ckpt.normalizer, 'rng_state': ckpt.rng_state,
              'epoch': int(ckpt.epoch), 'optimizer_step': int(ckpt.optimizer_step)}
    header_raw = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    body = _PREFIX.pack(MAGIC, ckpt.version, len(header_raw)) + header_raw + b''.join(payload)
    return body + _checksum(body)


def checkpoint_from_bytes(data, source='<bytes>'):
    if len(data) < _PREFIX.size + _CHECKSUM_SIZE:
        raise CheckpointError('%s: truncated checkpoint (%d bytes)' % (source, len(data)))
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError('%s: not a checkpoint file' % source)
    body, stored = data[:-_CHECKSUM_SIZE], data[-_CHECKSUM_SIZE:]
    computed = _checksum(body)
    if stored != computed:
        raise CheckpointError('%s: checksum mismatch (stored %s, computed %s); '
                              'file is corrupt or truncated'
                              % (source, stored.hex(), computed.hex()))
    if version != FORMAT_VERSION:
        raise CheckpointError('%s: checkpoint format version %d, this build reads '
                              'version %d' % (source, version, FORMAT_VERSION))
    start = _PREFIX.size
    header = json.loads(body[start:start + header_len].decode('utf-8'))
    payload = body[start + header_len:]
    tensors = collections.OrderedDict()
    for entry in header['tensors']:
        end = entry['offset'] + entry['nbytes']
        if end > len(payload):
            raise CheckpointError('%s: truncated payload for %s' % (source, entry['name']))
        dtype = np.dtype(entry['dtype']).newbyteorder('<')
        arr = np.frombuffer(payload[entry['offset']:end], dtype=dtype)
        tensors[entry['name']] = arr.astype(dtype.newbyteorder('='), copy=True) \
            .reshape(entry['shape'])
    return Checkpoint(header['config'], tensors, header['normalizer'],
                      header['rng_state'], header['epoch'],
                      header['optimizer_step'], version)


def save_checkpoint(ckpt, path):
    data = checkpoint_bytes(ckpt)
    with open(path, 'wb') as fd:
        fd.write(data)
    log.info('saved checkpoint (epoch %d, %d tensors) to %s',
             ckpt.epoch, len(ckpt.tensors), path)


def load_checkpoint(path):
    """
    Read a checkpoint.

    **Raises:** `CheckpointError` on a foreign file, a checksum mismatch
    (which covers truncation), or a format version other than
    `FORMAT_VERSION`; the message names both versions.
    """
    with open(path, 'rb') as fd:
        data = fd.read()
    return checkpoint_from_bytes(data, str(path))
