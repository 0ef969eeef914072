"""Samplers and exact ground-truth transduction functions for the 15 tasks.

Tokens are small integers; each TaskSpec fixes the coding of its input and
output alphabets. Ground truths are pure functions of the input tokens.
Bit sequences are little-endian: the first token is the least-significant
bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

# Symbol codes shared by the modular-arithmetic family.
PLUS, MINUS, TIMES, LPAR, RPAR, VAR_Z, EQUALS = 5, 6, 7, 8, 9, 10, 11

# Stack-manipulation action codes (0/1 are the stack symbols a/b).
PUSH_A, PUSH_B, POP = 2, 3, 4


# ---------------------------------------------------------------------------
# Modular arithmetic
# ---------------------------------------------------------------------------

def eval_mod_expr(tokens, z_value=None):
    """Evaluate an expression over {0..4, +, -, *, (, ), z} modulo 5.

    Multiplication binds tighter than +/-; operators of equal precedence
    associate left to right. A leading '-' at any bracket level evaluates
    as 0 - (...). Malformed expressions raise ValueError.
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("empty expression")
    pos = 0

    def parse_level():
        nonlocal pos
        items = []  # alternating value, op, value, ...
        if pos < len(tokens) and tokens[pos] == MINUS:
            items.append(0)
            items.append(MINUS)
            pos += 1
        items.append(parse_operand())
        while pos < len(tokens) and tokens[pos] in (PLUS, MINUS, TIMES):
            items.append(tokens[pos])
            pos += 1
            items.append(parse_operand())
        return reduce_level(items)

    def parse_operand():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("expression ends inside an operand")
        tok = tokens[pos]
        if tok == LPAR:
            pos += 1
            val = parse_level()
            if pos >= len(tokens) or tokens[pos] != RPAR:
                raise ValueError("unbalanced brackets")
            pos += 1
            return val
        if tok == VAR_Z:
            if z_value is None:
                raise ValueError("variable present but no value supplied")
            pos += 1
            return z_value % 5
        if 0 <= tok <= 4:
            pos += 1
            return tok
        raise ValueError(f"unexpected token {tok}")

    def reduce_level(items):
        vals = [items[0]]
        ops = []
        for i in range(1, len(items), 2):
            op, val = items[i], items[i + 1]
            if op == TIMES:
                vals[-1] = (vals[-1] * val) % 5
            else:
                ops.append(op)
                vals.append(val)
        acc = vals[0]
        for op, val in zip(ops, vals[1:]):
            acc = (acc + val) % 5 if op == PLUS else (acc - val) % 5
        return acc

    result = parse_level()
    if pos != len(tokens):
        raise ValueError("trailing tokens after expression")
    return result


@lru_cache(maxsize=None)
def _feasible_expr(n):
    if n < 1:
        return False
    if _feasible_term(n):
        return True
    return any(_feasible_expr(a) and _feasible_term(n - 1 - a) for a in range(1, n - 1))


@lru_cache(maxsize=None)
def _feasible_term(n):
    if n == 1:
        return True
    if n >= 3 and _feasible_expr(n - 2):
        return True
    return n >= 4 and _feasible_expr(n - 3)


def nearest_feasible_expr_length(length):
    length = max(1, int(length))
    while not _feasible_expr(length):
        length += 1
    return length


def _gen_expr(rng, n):
    splits = [a for a in range(1, n - 1) if _feasible_expr(a) and _feasible_term(n - 1 - a)]
    options = (["term"] if _feasible_term(n) else []) + (["binary"] if splits else [])
    choice = options[rng.integers(len(options))]
    if choice == "term":
        return _gen_term(rng, n)
    a = splits[rng.integers(len(splits))]
    op = (PLUS, MINUS, TIMES)[rng.integers(3)]
    return _gen_expr(rng, a) + [op] + _gen_term(rng, n - 1 - a)


def _gen_term(rng, n):
    options = []
    if n == 1:
        options.append("lit")
    if n >= 3 and _feasible_expr(n - 2):
        options.append("brack")
    if n >= 4 and _feasible_expr(n - 3):
        options.append("negbrack")
    choice = options[rng.integers(len(options))]
    if choice == "lit":
        return [int(rng.integers(5))]
    if choice == "brack":
        return [LPAR] + _gen_expr(rng, n - 2) + [RPAR]
    return [LPAR, MINUS] + _gen_expr(rng, n - 3) + [RPAR]


def sample_mod_expression(rng, length, with_brackets=False, with_variable=False):
    """Well-formed modular expression of exactly the (adjusted) length."""
    if not with_brackets:
        if length < 1:
            length = 1
        if length % 2 == 0:
            length += 1
        tokens = [int(rng.integers(5))]
        for _ in range(length // 2):
            tokens.append((PLUS, MINUS, TIMES)[rng.integers(3)])
            tokens.append(int(rng.integers(5)))
    else:
        length = nearest_feasible_expr_length(length)
        tokens = _gen_expr(rng, length)
    if with_variable:
        literal_positions = [i for i, t in enumerate(tokens) if 0 <= t <= 4]
        tokens[literal_positions[rng.integers(len(literal_positions))]] = VAR_Z
    return tokens


def solve_equation_target(expr_with_z, rhs, rng=None):
    """The unique z in {0..4} making expr == rhs mod 5; ValueError if not unique."""
    solutions = [z for z in range(5) if eval_mod_expr(expr_with_z, z_value=z) == rhs % 5]
    if len(solutions) != 1:
        raise ValueError("ambiguous")
    return solutions[0]


def _sample_equation(rng, length):
    """Expression with one z, '=', rhs — rejection-sampled for a unique solution.

    length counts the whole input, so the expression part has length - 2 tokens.
    """
    for _ in range(10000):
        expr = sample_mod_expression(rng, length - 2, with_brackets=True, with_variable=True)
        values = [eval_mod_expr(expr, z_value=z) for z in range(5)]
        unique_rhs = sorted(v for v in set(values) if values.count(v) == 1)
        if unique_rhs:
            rhs = unique_rhs[rng.integers(len(unique_rhs))]
            return expr + [EQUALS, int(rhs)]
    raise RuntimeError("equation sampling failed to find a unique-solution instance")


# ---------------------------------------------------------------------------
# Discrete stack machine
# ---------------------------------------------------------------------------

def exec_stack_program(initial, actions):
    """Run push/pop actions on a stack given bottom-to-top; return it top-to-bottom.

    A pop on an empty stack is ignored.
    """
    stack = list(initial)
    for act in actions:
        if act == PUSH_A:
            stack.append(0)
        elif act == PUSH_B:
            stack.append(1)
        elif act == POP:
            if stack:
                stack.pop()
        else:
            raise ValueError(f"unknown stack action {act}")
    return stack[::-1]


# ---------------------------------------------------------------------------
# Bit arithmetic (little-endian digit-by-digit; no native-integer shortcuts)
# ---------------------------------------------------------------------------

def trim_bits(bits):
    bits = list(bits)
    while len(bits) > 1 and bits[-1] == 0:
        bits.pop()
    return bits


def add_bits(a, b):
    """Ripple-carry sum of two little-endian bit sequences."""
    out = []
    carry = 0
    for i in range(max(len(a), len(b))):
        s = (a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) + carry
        out.append(s & 1)
        carry = s >> 1
    if carry:
        out.append(1)
    return trim_bits(out)


def _cmp_bits(a, b):
    a, b = trim_bits(a), trim_bits(b)
    if len(a) != len(b):
        return -1 if len(a) < len(b) else 1
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            return -1 if x < y else 1
    return 0


def _sub_bits(a, b):
    # requires a >= b
    out = []
    borrow = 0
    for i in range(len(a)):
        d = a[i] - (b[i] if i < len(b) else 0) - borrow
        borrow = d < 0
        out.append(d & 1)
    if borrow:
        raise ValueError("subtraction underflow")
    return trim_bits(out)


def mul_bits(a, b):
    """Shift-and-add product of two little-endian bit sequences."""
    acc = [0]
    for i, bit in enumerate(a):
        if bit:
            acc = add_bits(acc, [0] * i + list(b))
    return trim_bits(acc)


def isqrt_bits(a):
    """Floor integer square root via the digit-by-digit (base-4) method."""
    num = trim_bits(a)
    if num == [0]:
        return [0]
    res = [0]
    exp = ((len(num) - 1) // 2) * 2
    while exp >= 0:
        probe = add_bits(res, [0] * exp + [1])
        if _cmp_bits(num, probe) >= 0:
            num = _sub_bits(num, probe)
            res = add_bits(res[1:] or [0], [0] * exp + [1])
        else:
            res = res[1:] or [0]
        exp -= 2
    return trim_bits(res)


# ---------------------------------------------------------------------------
# Task registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    level: str
    input_symbols: tuple
    output_symbols: tuple
    baseline: float
    example: str
    adjust_length: Callable = field(repr=False, default=lambda l: max(1, int(l)))
    _sample: Callable = field(repr=False, default=None)
    _ground_truth: Callable = field(repr=False, default=None)

    def sample_input(self, rng, length):
        """Uniformly random valid input of the adjusted length."""
        return self._sample(rng, self.adjust_length(length))

    def ground_truth(self, tokens):
        return self._ground_truth(list(tokens))


def _binary_sample(symbols):
    def sample(rng, length):
        return [int(t) for t in rng.integers(0, symbols, size=length)]
    return sample


def _even_pairs_gt(x):
    return [1 if x[0] == x[-1] else 0]


def _parity_gt(x):
    return [1 if sum(1 for t in x if t == 1) % 2 == 0 else 0]


def _cycle_gt(x):
    delta = {0: 0, 1: 1, 2: -1}
    return [sum(delta[t] for t in x) % 5]


def _mod_simple_sample(rng, length):
    return sample_mod_expression(rng, length, with_brackets=False)


def _mod_brackets_sample(rng, length):
    return sample_mod_expression(rng, length, with_brackets=True)


def _mod_gt(x):
    return [eval_mod_expr(x)]


def _solve_eq_gt(x):
    if EQUALS not in x:
        raise ValueError("equation lacks '='")
    at = x.index(EQUALS)
    expr, rhs = x[:at], x[at + 1:]
    if len(rhs) != 1 or not 0 <= rhs[0] <= 4:
        raise ValueError("malformed right-hand side")
    return [solve_equation_target(expr, rhs[0])]


def _stack_manip_sample(rng, length):
    while True:
        n_initial = int(rng.integers(1, length + 1))
        initial = [int(t) for t in rng.integers(0, 2, size=n_initial)]
        actions = [int(t) for t in rng.integers(PUSH_A, POP + 1, size=length - n_initial)]
        if exec_stack_program(initial, actions):
            return initial + actions


def _stack_manip_gt(x):
    split = len(x)
    for i, t in enumerate(x):
        if t >= PUSH_A:
            split = i
            break
    initial, actions = x[:split], x[split:]
    if any(t < PUSH_A for t in actions):
        raise ValueError("stack symbol after first action")
    return exec_stack_program(initial, actions)


def _missing_dup_sample(rng, length):
    half = length // 2
    w = [int(t) for t in rng.integers(0, 2, size=half)]
    x = w + w
    x[int(rng.integers(len(x)))] = 2
    return x


def _missing_dup_gt(x):
    holes = [i for i, t in enumerate(x) if t == 2]
    if len(holes) != 1 or len(x) % 2 != 0:
        raise ValueError("expected an even-length string with one hidden token")
    p = holes[0]
    return [x[(p + len(x) // 2) % len(x)]]


def _odds_first_gt(x):
    return x[0::2] + x[1::2]


def _arith_sample(op_code):
    def sample(rng, length):
        split = int(rng.integers(1, length - 1))
        bits = [int(t) for t in rng.integers(0, 2, size=length - 1)]
        return bits[:split] + [op_code] + bits[split:]
    return sample


def _split_operands(x, op_code):
    at = x.index(op_code)
    a, b = x[:at], x[at + 1:]
    if not a or not b or any(t not in (0, 1) for t in a + b):
        raise ValueError("malformed arithmetic input")
    return a, b


def _add_gt(x):
    return add_bits(*_split_operands(x, 2))


def _mul_gt(x):
    return mul_bits(*_split_operands(x, 2))


def _sqrt_gt(x):
    if any(t not in (0, 1) for t in x):
        raise ValueError("malformed bit string")
    return isqrt_bits(x)


def _bucket_gt(x):
    return sorted(x)


def _odd_up(l):
    l = max(1, int(l))
    return l if l % 2 else l + 1


def _even_up(l):
    l = max(2, int(l))
    return l if l % 2 == 0 else l + 1


_AB = ("a", "b")
_DIGITS5 = ("0", "1", "2", "3", "4")
_MOD_SIMPLE = _DIGITS5 + ("+", "-", "*")
_MOD_BRACKETS = _MOD_SIMPLE + ("(", ")")
_EQ_SYMBOLS = _MOD_BRACKETS + ("z", "=")

TASKS = {}


def _register(spec):
    TASKS[spec.task_id] = spec


_register(TaskSpec("even_pairs", "R", _AB, _AB, 0.5, "aabba -> b",
                   _sample=_binary_sample(2), _ground_truth=_even_pairs_gt))
_register(TaskSpec("mod_arith_simple", "R", _MOD_SIMPLE, _DIGITS5, 0.2, "1+2-4 -> 4",
                   adjust_length=_odd_up, _sample=_mod_simple_sample, _ground_truth=_mod_gt))
_register(TaskSpec("parity_check", "R", _AB, _AB, 0.5, "aaabba -> b",
                   _sample=_binary_sample(2), _ground_truth=_parity_gt))
_register(TaskSpec("cycle_navigation", "R", ("0", "1", "2"), _DIGITS5, 0.2, "011210 -> 2",
                   _sample=_binary_sample(3), _ground_truth=_cycle_gt))
_register(TaskSpec("stack_manipulation", "DCF", ("a", "b", "PUSH_a", "PUSH_b", "POP"), _AB, 0.5,
                   "abbaa POP PUSH_a POP -> abba",
                   _sample=_stack_manip_sample, _ground_truth=_stack_manip_gt))
_register(TaskSpec("reverse_string", "DCF", _AB, _AB, 0.5, "aabba -> abbaa",
                   _sample=_binary_sample(2), _ground_truth=lambda x: x[::-1]))
_register(TaskSpec("mod_arith_brackets", "DCF", _MOD_BRACKETS, _DIGITS5, 0.2,
                   "-(1-2)*(4-3*(-2)) -> 0",
                   adjust_length=nearest_feasible_expr_length,
                   _sample=_mod_brackets_sample, _ground_truth=_mod_gt))
_register(TaskSpec("solve_equation", "DCF", _EQ_SYMBOLS, _DIGITS5, 0.5, "z+1=0 -> 4",
                   adjust_length=lambda l: nearest_feasible_expr_length(max(1, int(l) - 2)) + 2,
                   _sample=_sample_equation, _ground_truth=_solve_eq_gt))
_register(TaskSpec("duplicate_string", "CS", _AB, _AB, 0.5, "abaab -> abaababaab",
                   _sample=_binary_sample(2), _ground_truth=lambda x: x + x))
_register(TaskSpec("missing_duplicate", "CS", ("0", "1", "_"), ("0", "1"), 0.5, "1001_001 -> 1",
                   adjust_length=_even_up, _sample=_missing_dup_sample,
                   _ground_truth=_missing_dup_gt))
_register(TaskSpec("odds_first", "CS", _AB, _AB, 0.5, "aaabaa -> aaaaba",
                   _sample=_binary_sample(2), _ground_truth=_odds_first_gt))
_register(TaskSpec("binary_addition", "CS", ("0", "1", "+"), ("0", "1"), 0.5, "01001+101 -> 11101",
                   adjust_length=lambda l: max(3, int(l)),
                   _sample=_arith_sample(2), _ground_truth=_add_gt))
_register(TaskSpec("binary_multiplication", "CS", ("0", "1", "*"), ("0", "1"), 0.5,
                   "001*01101 -> 0001101",
                   adjust_length=lambda l: max(3, int(l)),
                   _sample=_arith_sample(2), _ground_truth=_mul_gt))
_register(TaskSpec("compute_sqrt", "CS", ("0", "1"), ("0", "1"), 0.5, "10001 -> 001",
                   _sample=_binary_sample(2), _ground_truth=_sqrt_gt))
_register(TaskSpec("bucket_sort", "CS", _DIGITS5, _DIGITS5, 0.2, "421302214 -> 011222344",
                   _sample=_binary_sample(5), _ground_truth=_bucket_gt))

TASK_IDS = tuple(TASKS)
assert sum(t.level == "R" for t in TASKS.values()) == 4
assert sum(t.level == "DCF" for t in TASKS.values()) == 4
assert sum(t.level == "CS" for t in TASKS.values()) == 7


def get_task(task_id):
    try:
        return TASKS[task_id]
    except KeyError:
        raise ValueError(f"unknown task {task_id!r}; valid ids: {', '.join(TASK_IDS)}") from None


def sample_input(task_id, rng, length):
    return get_task(task_id).sample_input(rng, length)


def ground_truth(task_id, tokens):
    return get_task(task_id).ground_truth(tokens)
