import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chomsky_bench import memory as M
from chomsky_bench.autodiff import Tensor


def one_hot(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def simplex(n):
    return st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n).map(
        lambda v: np.asarray(v) / np.sum(v))


# ---------------------------------------------------------------------------
# stack
# ---------------------------------------------------------------------------

def test_stack_superposition_example():
    stack = M.DiffStack(Tensor(np.array([[4.0], [0.0]])))
    actions = Tensor(np.array([0.5, 0.0, 0.5]))
    out = M.stack_update(stack, actions, Tensor(np.array([2.0])))
    assert np.allclose(out.cells.data, [[3.0], [2.0]])


def test_stack_push_then_pop_restores_top():
    stack = M.new_stack(4, d_cell=3, dtype=np.float64)
    v1 = Tensor(np.array([1.0, 2.0, 3.0]))
    v2 = Tensor(np.array([4.0, 5.0, 6.0]))
    push = Tensor(one_hot(M.STACK_PUSH, 3))
    pop = Tensor(one_hot(M.STACK_POP, 3))
    stack = M.stack_update(stack, push, v1)
    stack = M.stack_update(stack, push, v2)
    assert np.allclose(M.stack_read(stack).data, [4.0, 5.0, 6.0])
    stack = M.stack_update(stack, pop, v2)
    assert np.allclose(M.stack_read(stack).data, [1.0, 2.0, 3.0])


def test_stack_pop_on_empty_reads_zero():
    stack = M.new_stack(3, d_cell=2, dtype=np.float64)
    pop = Tensor(one_hot(M.STACK_POP, 3))
    stack = M.stack_update(stack, pop, Tensor(np.array([7.0, 7.0])))
    assert np.allclose(stack.cells.data, 0.0)


def test_stack_overflow_drops_the_bottom_row():
    stack = M.new_stack(2, d_cell=1, dtype=np.float64)
    push = Tensor(one_hot(M.STACK_PUSH, 3))
    for v in (1.0, 2.0, 3.0):
        stack = M.stack_update(stack, push, Tensor(np.array([v])))
    assert np.allclose(stack.cells.data, [[3.0], [2.0]])


def test_stack_rejects_value_dimension_mismatch():
    stack = M.new_stack(2, d_cell=3)
    with pytest.raises(ValueError):
        M.stack_update(stack, Tensor(one_hot(0, 3)), Tensor(np.zeros(2)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.lists(st.integers(0, 2), min_size=1, max_size=30))
def test_stack_one_hot_limit_matches_discrete_machine(seed, actions):
    rng = np.random.default_rng(seed)
    soft = M.new_stack(8, d_cell=4, dtype=np.float64)
    hard = M.DiscreteStack(8, d_cell=4)
    for act in actions:
        v = rng.normal(size=4)
        soft = M.stack_update(soft, Tensor(one_hot(act, 3)), Tensor(v))
        hard.update(act, v)
        assert np.abs(soft.cells.data - hard.state()).max() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(simplex(3), simplex(3))
def test_stack_update_is_linear_in_the_action_distribution(a1, a2):
    base = M.DiffStack(Tensor(np.arange(8.0).reshape(4, 2)))
    v = Tensor(np.array([9.0, -1.0]))
    mix = M.stack_update(base, Tensor((a1 + a2) / 2), v).cells.data
    half = (M.stack_update(base, Tensor(a1), v).cells.data
            + M.stack_update(base, Tensor(a2), v).cells.data) / 2
    assert np.abs(mix - half).max() <= 1e-12


def test_stack_batched_matches_loop():
    rng = np.random.default_rng(0)
    cells = rng.normal(size=(5, 6, 3))
    actions = rng.dirichlet(np.ones(3), size=5)
    values = rng.normal(size=(5, 3))
    batched = M.stack_update(M.DiffStack(Tensor(cells)), Tensor(actions), Tensor(values))
    for i in range(5):
        single = M.stack_update(M.DiffStack(Tensor(cells[i])), Tensor(actions[i]),
                                Tensor(values[i]))
        assert np.abs(batched.cells.data[i] - single.cells.data).max() <= 1e-12


# ---------------------------------------------------------------------------
# tape
# ---------------------------------------------------------------------------

def test_tape_write_right_example():
    tape = M.new_tape(3, d_cell=1, dtype=np.float64)
    actions = Tensor(one_hot(M.WRITE_RIGHT, 5))
    out = M.tape_update(tape, actions, Tensor(np.array([9.0])), 1)
    assert np.allclose(out.cells.data, [[9.0], [0.0], [0.0]])
    assert np.allclose(out.head.data, [0.0, 1.0, 0.0])


def test_tape_jump_left_wraps_circularly():
    tape = M.new_tape(3, d_cell=1, dtype=np.float64)
    actions = Tensor(one_hot(M.JUMP_LEFT, 5))
    out = M.tape_update(tape, actions, Tensor(np.zeros(1)), 2)
    assert np.allclose(out.head.data, [0.0, 1.0, 0.0])
    assert np.allclose(out.cells.data, 0.0)  # jumps never write


def test_tape_read_blends_cells_under_the_head():
    cells = Tensor(np.array([[0.0], [4.0]]))
    head = Tensor(np.array([0.25, 0.75]))
    assert np.allclose(M.tape_read(M.DiffTape(cells, head)).data, [3.0])


def test_tape_write_blend_preserves_untouched_cells():
    tape = M.DiffTape(Tensor(np.array([[1.0], [2.0], [3.0]])),
                      Tensor(np.array([0.0, 0.5, 0.0])))
    out = M.tape_update(tape, Tensor(one_hot(M.WRITE_STAY, 5)), Tensor(np.array([10.0])), 1)
    assert np.allclose(out.cells.data, [[1.0], [6.0], [3.0]])


def test_tape_rejects_nonpositive_jump():
    tape = M.new_tape(4)
    for bad in (0, -2):
        with pytest.raises(ValueError):
            M.tape_update(tape, Tensor(one_hot(M.JUMP_RIGHT, 5)), Tensor(np.zeros(M.CELL_DIM)), bad)


def test_tape_head_mass_is_conserved():
    rng = np.random.default_rng(1)
    tape = M.new_tape(6, d_cell=2, dtype=np.float64)
    for _ in range(20):
        actions = Tensor(rng.dirichlet(np.ones(5)))
        tape = M.tape_update(tape, actions, Tensor(rng.normal(size=2)), 3)
        assert abs(tape.head.data.sum() - 1.0) <= 1e-12
        assert (tape.head.data >= -1e-15).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1),
       st.lists(st.tuples(st.integers(0, 4), st.integers(1, 5)), min_size=1, max_size=30))
def test_tape_one_hot_limit_matches_discrete_machine(seed, steps):
    rng = np.random.default_rng(seed)
    soft = M.new_tape(7, d_cell=3, dtype=np.float64)
    hard = M.DiscreteTape(7, d_cell=3)
    for act, jump in steps:
        v = rng.normal(size=3)
        soft = M.tape_update(soft, Tensor(one_hot(act, 5)), Tensor(v), jump)
        hard.update(act, v, jump)
        assert np.abs(soft.cells.data - hard.cells).max() <= 1e-12
        assert np.abs(soft.head.data - one_hot(hard.pos, 7)).max() <= 1e-12
        assert np.abs(M.tape_read(soft).data - hard.read()).max() <= 1e-12


def test_tape_vector_jump_matches_per_row_scalar_jump():
    rng = np.random.default_rng(2)
    cells = rng.normal(size=(4, 5, 2))
    head = rng.dirichlet(np.ones(5), size=4)
    actions = rng.dirichlet(np.ones(5), size=4)
    values = rng.normal(size=(4, 2))
    jumps = np.array([1, 2, 3, 4])
    batched = M.tape_update(M.DiffTape(Tensor(cells), Tensor(head)),
                            Tensor(actions), Tensor(values), jumps)
    for i in range(4):
        single = M.tape_update(M.DiffTape(Tensor(cells[i]), Tensor(head[i])),
                               Tensor(actions[i]), Tensor(values[i]), int(jumps[i]))
        assert np.abs(batched.cells.data[i] - single.cells.data).max() <= 1e-12
        assert np.abs(batched.head.data[i] - single.head.data).max() <= 1e-12


# ---------------------------------------------------------------------------
# growth
# ---------------------------------------------------------------------------

def test_grow_stack_preserves_contents_and_rejects_shrinking():
    stack = M.DiffStack(Tensor(np.arange(6.0).reshape(3, 2)))
    grown = M.grow_stack(stack, 5)
    assert grown.depth == 5
    assert np.array_equal(grown.cells.data[:3], stack.cells.data)
    assert np.all(grown.cells.data[3:] == 0)
    assert M.grow_stack(stack, 3) is stack
    with pytest.raises(ValueError):
        M.grow_stack(stack, 2)


def test_grow_tape_preserves_head_and_rejects_shrinking():
    tape = M.new_tape(3, d_cell=2, dtype=np.float64)
    tape = M.tape_update(tape, Tensor(one_hot(M.WRITE_RIGHT, 5)),
                         Tensor(np.array([1.0, 2.0])), 1)
    grown = M.grow_tape(tape, 6)
    assert grown.n_cells == 6
    assert np.array_equal(grown.head.data, [0, 1, 0, 0, 0, 0])
    assert np.array_equal(grown.cells.data[:3], tape.cells.data)
    with pytest.raises(ValueError):
        M.grow_tape(tape, 2)


def test_grow_memory_dispatches_and_rejects_other_types():
    assert isinstance(M.grow_memory(M.new_stack(2), 4), M.DiffStack)
    assert isinstance(M.grow_memory(M.new_tape(2), 4), M.DiffTape)
    with pytest.raises(TypeError):
        M.grow_memory(np.zeros(3), 4)


def test_growth_does_not_change_reads():
    rng = np.random.default_rng(3)
    stack = M.DiffStack(Tensor(rng.normal(size=(4, 3))))
    assert np.array_equal(M.stack_read(M.grow_stack(stack, 9)).data,
                          M.stack_read(stack).data)
    tape = M.DiffTape(Tensor(rng.normal(size=(4, 3))),
                      Tensor(rng.dirichlet(np.ones(4))))
    assert np.abs(M.tape_read(M.grow_tape(tape, 9)).data
                  - M.tape_read(tape).data).max() <= 1e-12
