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
Exceptions raised by trajdiff.

Every validation failure in the package raises a subclass of
`TrajDiffError`.  The ones that signal bad argument values also derive
from `ValueError` so callers that only know the builtin still catch them.
"""

__all__ = ['TrajDiffError', 'ShapeError', 'ScheduleError', 'GridError',
           'ConfigError', 'TrajectoryError', 'ScenarioError', 'CheckpointError',
           'TrainingDivergedError']


class TrajDiffError(Exception):
    pass


class ShapeError(TrajDiffError, ValueError):
    """Operand shapes are incompatible.

    The message carries a dimension report of the form
    ``op: (2, 3) vs (4, 5)``.
    """

    def __init__(self, op, *shapes, detail=None):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        msg = '%s: %s' % (op, ' vs '.join(str(s) for s in self.shapes))
        if detail:
            msg += ' (%s)' % detail
        super().__init__(msg)


class ScheduleError(TrajDiffError, ValueError):
    pass


class GridError(TrajDiffError, ValueError):
    pass


class ConfigError(TrajDiffError, ValueError):
    pass


class ScenarioError(TrajDiffError):
    pass


class CheckpointError(TrajDiffError):
    pass


class TrainingDivergedError(TrajDiffError):
    pass


class TrajectoryError(TrajDiffError, ValueError):
    pass
