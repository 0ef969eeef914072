import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chomsky_bench import oracles
from chomsky_bench import tasks as T
from chomsky_bench.tasks import (TASK_IDS, TASKS, add_bits, eval_mod_expr,
                                 exec_stack_program, get_task, isqrt_bits,
                                 mul_bits, nearest_feasible_expr_length,
                                 solve_equation_target, trim_bits)

bits = st.lists(st.integers(0, 1), min_size=1, max_size=24)


def to_int(b):
    return sum(v << i for i, v in enumerate(b))


# ---------------------------------------------------------------------------
# registry shape
# ---------------------------------------------------------------------------

def test_fifteen_tasks_with_level_split():
    assert len(TASKS) == 15
    levels = [spec.level for spec in TASKS.values()]
    assert levels.count("R") == 4
    assert levels.count("DCF") == 4
    assert levels.count("CS") == 7


def test_get_task_unknown_id_lists_valid_ones():
    with pytest.raises(ValueError) as err:
        get_task("nosuch")
    msg = str(err.value)
    for task_id in TASK_IDS:
        assert task_id in msg


def test_baselines():
    fifth = {"mod_arith_simple", "cycle_navigation", "mod_arith_brackets", "bucket_sort"}
    for task_id, spec in TASKS.items():
        assert spec.baseline == (0.2 if task_id in fifth else 0.5)


def _parse_example(spec):
    left, right = spec.example.split(" -> ")
    if spec.task_id == "stack_manipulation":
        sym = {"PUSH_a": T.PUSH_A, "PUSH_b": T.PUSH_B, "POP": T.POP}
        parts = left.split(" ")
        x = [{"a": 0, "b": 1}[c] for c in parts[0]] + [sym[p] for p in parts[1:]]
    else:
        x = [spec.input_symbols.index(c) for c in left]
    y = [spec.output_symbols.index(c) for c in right]
    return x, y


def test_every_display_example_is_consistent():
    for spec in TASKS.values():
        x, y = _parse_example(spec)
        assert spec.ground_truth(x) == y, spec.task_id


# ---------------------------------------------------------------------------
# modular arithmetic
# ---------------------------------------------------------------------------

def test_eval_mod_expr_flat():
    assert eval_mod_expr([1, T.PLUS, 2, T.MINUS, 4]) == 4


def test_eval_mod_expr_nested_with_unary_minus():
    # -(1-2)*(4-3*(-2)) = 1 * 10 = 10 = 0 (mod 5)
    e = [T.MINUS, T.LPAR, 1, T.MINUS, 2, T.RPAR, T.TIMES, T.LPAR, 4, T.MINUS,
         3, T.TIMES, T.LPAR, T.MINUS, 2, T.RPAR, T.RPAR]
    assert eval_mod_expr(e) == 0


def test_eval_mod_expr_multiplication_binds_tighter():
    # 1+2*3 = 7 = 2 (mod 5), not (1+2)*3 = 4
    assert eval_mod_expr([1, T.PLUS, 2, T.TIMES, 3]) == 2


def test_eval_mod_expr_rejects_malformed():
    for bad in ([T.PLUS], [1, T.PLUS], [T.LPAR, 1], [1, 2], []):
        with pytest.raises(ValueError):
            eval_mod_expr(bad)


def test_solve_equation_example_and_ambiguity():
    # z+1=0 has the unique solution z=4
    assert solve_equation_target([T.VAR_Z, T.PLUS, 1], 0) == 4
    # 0*z=0 holds for every z
    with pytest.raises(ValueError):
        solve_equation_target([0, T.TIMES, T.VAR_Z], 0)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 60))
def test_feasible_length_sampler_hits_exact_length(seed, length):
    rng = np.random.default_rng(seed)
    n = nearest_feasible_expr_length(length)
    toks = T.sample_mod_expression(rng, n, with_brackets=True)
    assert len(toks) == n
    eval_mod_expr(toks)  # must parse


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 40))
def test_sampled_equations_have_unique_solutions(seed, length):
    spec = get_task("solve_equation")
    x = spec.sample_input(np.random.default_rng(seed), length)
    at = x.index(T.EQUALS)
    z = spec.ground_truth(x)[0]
    hits = [v for v in range(5)
            if eval_mod_expr(x[:at], z_value=v) == x[at + 1]]
    assert hits == [z]


# ---------------------------------------------------------------------------
# stack programs
# ---------------------------------------------------------------------------

def test_exec_stack_program_examples():
    a, b = 0, 1
    # initial string abbaa, top is the last pushed symbol
    assert exec_stack_program([a, b, b, a, a], [T.POP, T.PUSH_A, T.POP]) == [a, b, b, a]
    assert exec_stack_program([a, b], []) == [b, a]
    assert exec_stack_program([], [T.POP, T.PUSH_B]) == [b]


def test_exec_stack_program_pop_on_empty_is_ignored():
    assert exec_stack_program([], [T.POP, T.POP, T.PUSH_A]) == [0]


@given(st.lists(st.integers(0, 1), max_size=10),
       st.lists(st.integers(T.PUSH_A, T.POP), max_size=10))
def test_exec_stack_program_matches_list_model(initial, actions):
    stack = list(initial)
    for act in actions:
        if act == T.POP:
            if stack:
                stack.pop()
        else:
            stack.append(act - T.PUSH_A)
    assert exec_stack_program(initial, actions) == stack[::-1]


# ---------------------------------------------------------------------------
# little-endian binary arithmetic
# ---------------------------------------------------------------------------

def test_add_bits_example():
    assert add_bits([1, 0, 0, 1], [1, 0, 1]) == [0, 1, 1, 1]  # 9 + 5 = 14


def test_paper_style_big_endian_vectors_via_reversal():
    # the human-readable examples are written most-significant-bit first
    def be(s):
        return [int(c) for c in reversed(s)]

    assert add_bits(be("10010"), be("101")) == be("10111")
    assert mul_bits(be("100"), be("10110")) == be("1011000")


def test_isqrt_17_is_4():
    assert isqrt_bits([1, 0, 0, 0, 1]) == [0, 0, 1]


@given(bits, bits)
def test_add_bits_matches_integers(a, b):
    assert to_int(add_bits(a, b)) == to_int(a) + to_int(b)


@given(bits, bits)
def test_mul_bits_matches_integers(a, b):
    assert to_int(mul_bits(a, b)) == to_int(a) * to_int(b)


@given(bits)
def test_isqrt_bits_matches_math_isqrt(a):
    import math
    assert to_int(isqrt_bits(a)) == math.isqrt(to_int(a))


@given(bits)
def test_trim_bits_preserves_value_and_strips_leading_zeros(a):
    t = trim_bits(a)
    assert to_int(t) == to_int(a)
    assert t[-1] == 1 or t == [0]


# ---------------------------------------------------------------------------
# task-level properties
# ---------------------------------------------------------------------------

binary_strings = st.lists(st.integers(0, 1), min_size=1, max_size=50)


@given(binary_strings)
def test_reverse_is_an_involution(x):
    gt = TASKS["reverse_string"].ground_truth
    assert gt(gt(x)) == x


@given(binary_strings)
def test_duplicate_halves_are_equal(x):
    y = TASKS["duplicate_string"].ground_truth(x)
    assert y[:len(x)] == y[len(x):] == x


@given(binary_strings)
def test_odds_first_is_a_permutation(x):
    y = TASKS["odds_first"].ground_truth(x)
    assert sorted(y) == sorted(x)
    assert y[:len(x[0::2])] == x[0::2]


@given(st.lists(st.integers(0, 4), min_size=1, max_size=50))
def test_bucket_sort_output_is_sorted_permutation(x):
    y = TASKS["bucket_sort"].ground_truth(x)
    assert y == sorted(x)


@given(binary_strings)
def test_parity_flips_when_a_one_is_appended(x):
    gt = TASKS["parity_check"].ground_truth
    assert gt(x + [1]) != gt(x)
    assert gt(x + [0]) == gt(x)


@given(binary_strings)
def test_even_pairs_depends_only_on_endpoints(x):
    gt = TASKS["even_pairs"].ground_truth
    assert gt(x) == [1 if x[0] == x[-1] else 0]


def test_adjust_length_respects_task_constraints():
    assert TASKS["mod_arith_simple"].adjust_length(4) % 2 == 1
    assert TASKS["missing_duplicate"].adjust_length(5) % 2 == 0
    assert TASKS["binary_addition"].adjust_length(1) >= 3
    for spec in TASKS.values():
        for l in range(1, 30):
            adj = spec.adjust_length(l)
            assert adj >= 1
            x = spec.sample_input(np.random.default_rng(l), l)
            assert len(x) == adj


def test_sampled_tokens_stay_inside_the_input_alphabet():
    rng = np.random.default_rng(0)
    for spec in TASKS.values():
        for l in (1, 2, 7, 23):
            x = spec.sample_input(rng, l)
            assert all(0 <= t < len(spec.input_symbols) for t in x), spec.task_id


def test_ground_truth_agrees_with_independent_oracles():
    rng = np.random.default_rng(42)
    for task_id, spec in TASKS.items():
        oracle = oracles.ORACLES[task_id]
        for l in range(1, 41):
            x = spec.sample_input(rng, l)
            assert spec.ground_truth(x) == oracle(x), (task_id, x)


def test_outputs_stay_inside_the_output_alphabet():
    rng = np.random.default_rng(7)
    for spec in TASKS.values():
        for l in (1, 5, 18):
            y = spec.ground_truth(spec.sample_input(rng, l))
            assert y, spec.task_id
            assert all(0 <= t < len(spec.output_symbols) for t in y), spec.task_id


def test_sampling_is_deterministic_given_the_generator_state():
    for spec in TASKS.values():
        a = spec.sample_input(np.random.default_rng(3), 12)
        b = spec.sample_input(np.random.default_rng(3), 12)
        assert a == b
