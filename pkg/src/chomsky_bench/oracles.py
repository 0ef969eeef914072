"""Independent reference oracles for every task, computed over native Python
integers and strings rather than the token-level algorithms in tasks.py.
Used by the selftest and the equivalence suites.
"""

from __future__ import annotations

import math

from . import tasks as T


def _bits_to_int(bits):
    # little-endian: first token is the least-significant bit
    return sum(b << i for i, b in enumerate(bits))


def _int_to_bits(n):
    if n == 0:
        return [0]
    out = []
    while n:
        out.append(n & 1)
        n >>= 1
    return out


_EXPR_CHARS = {0: "0", 1: "1", 2: "2", 3: "3", 4: "4", T.PLUS: "+", T.MINUS: "-",
               T.TIMES: "*", T.LPAR: "(", T.RPAR: ")", T.VAR_Z: "z"}


def _expr_string(tokens):
    return "".join(_EXPR_CHARS[t] for t in tokens)


def _eval_expr_string(s):
    # Python's own parser is the independent evaluator; same precedence rules.
    return eval(s, {"__builtins__": {}}) % 5  # noqa: S307 - trusted generated input


def oracle_even_pairs(x):
    flips = sum(1 for a, b in zip(x, x[1:]) if a != b)
    return [1 if flips % 2 == 0 else 0]


def oracle_parity_check(x):
    return [1 if "".join(map(str, x)).count("1") % 2 == 0 else 0]


def oracle_cycle_navigation(x):
    pos = 0
    for t in x:
        pos = (pos + (1 if t == 1 else -1 if t == 2 else 0)) % 5
    return [pos]


def oracle_mod_arith(x):
    return [_eval_expr_string(_expr_string(x))]


def oracle_solve_equation(x):
    at = x.index(T.EQUALS)
    expr = _expr_string(x[:at])
    rhs = x[at + 1]
    hits = [z for z in range(5) if _eval_expr_string(expr.replace("z", str(z))) == rhs]
    if len(hits) != 1:
        raise ValueError("equation does not have a unique solution")
    return hits


def oracle_stack_manipulation(x):
    split = next((i for i, t in enumerate(x) if t >= T.PUSH_A), len(x))
    stack = "".join("ab"[t] for t in x[:split])  # top is the last character
    for a in x[split:]:
        if a == T.POP:
            stack = stack[:-1]
        else:
            stack += "ab"[a - T.PUSH_A]
    return [0 if ch == "a" else 1 for ch in reversed(stack)]


def oracle_reverse_string(x):
    return list(reversed(x))


def oracle_duplicate_string(x):
    return list(x) + list(x)


def oracle_odds_first(x):
    return [t for i, t in enumerate(x) if i % 2 == 0] + [t for i, t in enumerate(x) if i % 2 == 1]


def oracle_missing_duplicate(x):
    hole = x.index(2)
    for v in (0, 1):
        filled = list(x)
        filled[hole] = v
        half = len(filled) // 2
        if filled[:half] == filled[half:]:
            return [v]
    raise ValueError("no completion makes the string a duplicate")


def _oracle_binary(op):
    def oracle(x):
        at = x.index(2)
        a, b = _bits_to_int(x[:at]), _bits_to_int(x[at + 1:])
        return _int_to_bits(op(a, b))
    return oracle


def oracle_compute_sqrt(x):
    return _int_to_bits(math.isqrt(_bits_to_int(x)))


def oracle_bucket_sort(x):
    counts = [0] * 5
    for t in x:
        counts[t] += 1
    return [d for d in range(5) for _ in range(counts[d])]


ORACLES = {
    "even_pairs": oracle_even_pairs,
    "mod_arith_simple": oracle_mod_arith,
    "parity_check": oracle_parity_check,
    "cycle_navigation": oracle_cycle_navigation,
    "stack_manipulation": oracle_stack_manipulation,
    "reverse_string": oracle_reverse_string,
    "mod_arith_brackets": oracle_mod_arith,
    "solve_equation": oracle_solve_equation,
    "duplicate_string": oracle_duplicate_string,
    "missing_duplicate": oracle_missing_duplicate,
    "odds_first": oracle_odds_first,
    "binary_addition": _oracle_binary(lambda a, b: a + b),
    "binary_multiplication": _oracle_binary(lambda a, b: a * b),
    "compute_sqrt": oracle_compute_sqrt,
    "bucket_sort": oracle_bucket_sort,
}

assert set(ORACLES) == set(T.TASKS)
