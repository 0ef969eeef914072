"""Differentiable external memories: superposed stack and bounded circular tape.

Both structures reduce exactly to their discrete counterparts when the
action distribution is one-hot. States are value-semantics dataclasses
holding autodiff Tensors; all ops support arbitrary leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

CELL_DIM = 8
STACK_PUSH, STACK_POP, STACK_NOOP = 0, 1, 2
WRITE_LEFT, WRITE_RIGHT, WRITE_STAY, JUMP_LEFT, JUMP_RIGHT = 0, 1, 2, 3, 4


@dataclass
class DiffStack:
    cells: Tensor  # (..., depth, d_cell); row 0 is the top

    @property
    def depth(self):
        return self.cells.shape[-2]


@dataclass
class DiffTape:
    cells: Tensor  # (..., n_cells, d_cell)
    head: Tensor   # (..., n_cells) probability vector

    @property
    def n_cells(self):
        return self.cells.shape[-2]


def new_stack(depth, d_cell=CELL_DIM, batch=(), dtype=np.float32):
    return DiffStack(Tensor(np.zeros(tuple(batch) + (depth, d_cell), dtype=dtype)))


def new_tape(n_cells, d_cell=CELL_DIM, batch=(), dtype=np.float32):
    cells = Tensor(np.zeros(tuple(batch) + (n_cells, d_cell), dtype=dtype))
    head = np.zeros(tuple(batch) + (n_cells,), dtype=dtype)
    head[..., 0] = 1.0
    return DiffTape(cells, Tensor(head))


def _action(a, i):
    # (..., A) -> (..., 1, 1) slice for broadcasting against cells
    return ad.getitem(a, (Ellipsis, slice(i, i + 1), None))


def stack_update(stack, actions, value):
    """Superposed push/pop/no-op: s'[i] = a_push s[i-1] + a_pop s[i+1] + a_noop s[i].

    The virtual row s[-1] is the written value; s[depth] is zero.
    """
    s = stack.cells
    if value.shape[-1] != s.shape[-1]:
        raise ValueError("write value dimension disagrees with cell dimension")
    v_row = ad.getitem(value, (Ellipsis, None, slice(None)))  # (..., 1, d)
    zero_row = Tensor(np.zeros_like(v_row.data))
    pushed = ad.concat([v_row, ad.getitem(s, (Ellipsis, slice(0, -1), slice(None)))], axis=-2)
    popped = ad.concat([ad.getitem(s, (Ellipsis, slice(1, None), slice(None))), zero_row], axis=-2)
    new = (_action(actions, STACK_PUSH) * pushed
           + _action(actions, STACK_POP) * popped
           + _action(actions, STACK_NOOP) * s)
    return DiffStack(new)


def stack_read(stack):
    """Top row of the stack."""
    return ad.getitem(stack.cells, (Ellipsis, 0, slice(None)))


def tape_update(tape, actions, value, jump):
    """Expected-semantics write followed by the action-weighted head shift.

    Write mass w = a_wl + a_wr + a_ws blends the value into cells under the
    head; the head then shifts by the mixture of displacements {-1, +1, 0,
    -jump, +jump} with circular indexing.
    """
    jump = np.asarray(jump, dtype=np.int64)
    if np.any(jump < 1):
        raise ValueError("jump distance must be >= 1")
    cells, head = tape.cells, tape.head
    a_wl = ad.getitem(actions, (Ellipsis, slice(WRITE_LEFT, WRITE_LEFT + 1)))
    a_wr = ad.getitem(actions, (Ellipsis, slice(WRITE_RIGHT, WRITE_RIGHT + 1)))
    a_ws = ad.getitem(actions, (Ellipsis, slice(WRITE_STAY, WRITE_STAY + 1)))
    a_jl = ad.getitem(actions, (Ellipsis, slice(JUMP_LEFT, JUMP_LEFT + 1)))
    a_jr = ad.getitem(actions, (Ellipsis, slice(JUMP_RIGHT, JUMP_RIGHT + 1)))

    w_head = (a_wl + a_wr + a_ws) * head                       # (..., C)
    w_col = ad.getitem(w_head, (Ellipsis, slice(None), None))  # (..., C, 1)
    v_row = ad.getitem(value, (Ellipsis, None, slice(None)))   # (..., 1, d)
    new_cells = (1.0 - w_col) * cells + w_col * v_row

    if jump.ndim == 0:
        jumped_left = ad.roll(head, -int(jump), axis=-1)
        jumped_right = ad.roll(head, int(jump), axis=-1)
    else:  # per-sequence jump distances within one batch
        jumped_left = ad.roll_rows(head, -jump)
        jumped_right = ad.roll_rows(head, jump)
    new_head = (a_wl * ad.roll(head, -1, axis=-1)
                + a_wr * ad.roll(head, 1, axis=-1)
                + a_ws * head
                + a_jl * jumped_left
                + a_jr * jumped_right)
    return DiffTape(new_cells, new_head)


def tape_read(tape):
    """Expected cell under the head: sum_c head[c] * cells[c]."""
    weighted = ad.getitem(tape.head, (Ellipsis, slice(None), None)) * tape.cells
    return ad.tsum(weighted, axis=-2)


def grow_stack(stack, new_depth):
    """Zero rows appended below; contents preserved."""
    if new_depth < stack.depth:
        raise ValueError("cannot shrink a stack")
    if new_depth == stack.depth:
        return stack
    pad_shape = stack.cells.shape[:-2] + (new_depth - stack.depth, stack.cells.shape[-1])
    pad = Tensor(np.zeros(pad_shape, dtype=stack.cells.dtype))
    return DiffStack(ad.concat([stack.cells, pad], axis=-2))


def grow_tape(tape, new_size):
    """Zero cells appended at the far side; head mass unchanged."""
    if new_size < tape.n_cells:
        raise ValueError("cannot shrink a tape")
    if new_size == tape.n_cells:
        return tape
    extra = new_size - tape.n_cells
    cell_pad = Tensor(np.zeros(tape.cells.shape[:-2] + (extra, tape.cells.shape[-1]),
                               dtype=tape.cells.dtype))
    head_pad = Tensor(np.zeros(tape.head.shape[:-1] + (extra,), dtype=tape.head.dtype))
    return DiffTape(ad.concat([tape.cells, cell_pad], axis=-2),
                    ad.concat([tape.head, head_pad], axis=-1))


def grow_memory(mem, new_size):
    if isinstance(mem, DiffStack):
        return grow_stack(mem, new_size)
    if isinstance(mem, DiffTape):
        return grow_tape(mem, new_size)
    raise TypeError(f"not a memory state: {type(mem)!r}")


# ---------------------------------------------------------------------------
# Discrete reference machines (oracles for the one-hot limit)
# ---------------------------------------------------------------------------

class DiscreteStack:
    """Plain bounded stack of d-vectors; the exact one-hot-limit reference."""

    def __init__(self, depth, d_cell=CELL_DIM):
        self.rows = [np.zeros(d_cell) for _ in range(depth)]

    def update(self, action, value):
        if action == STACK_PUSH:
            self.rows = [np.asarray(value, dtype=float)] + self.rows[:-1]
        elif action == STACK_POP:
            self.rows = self.rows[1:] + [np.zeros_like(self.rows[0])]
        elif action != STACK_NOOP:
            raise ValueError(f"unknown stack action {action}")

    def read(self):
        return self.rows[0]

    def state(self):
        return np.stack(self.rows)


class DiscreteTape:
    """Hard-head bounded circular tape; the exact one-hot-limit reference."""

    def __init__(self, n_cells, d_cell=CELL_DIM):
        self.cells = np.zeros((n_cells, d_cell))
        self.pos = 0

    def update(self, action, value, jump):
        n = self.cells.shape[0]
        if action in (WRITE_LEFT, WRITE_RIGHT, WRITE_STAY):
            self.cells[self.pos] = np.asarray(value, dtype=float)
        if action == WRITE_LEFT:
            self.pos = (self.pos - 1) % n
        elif action == WRITE_RIGHT:
            self.pos = (self.pos + 1) % n
        elif action == JUMP_LEFT:
            self.pos = (self.pos - jump) % n
        elif action == JUMP_RIGHT:
            self.pos = (self.pos + jump) % n
        elif action != WRITE_STAY:
            raise ValueError(f"unknown tape action {action}")

    def read(self):
        return self.cells[self.pos]
