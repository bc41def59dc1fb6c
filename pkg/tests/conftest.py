import numpy as np
import pytest

from sumsearch import autodiff as ad
from sumsearch.corpus import CodeCommentPair, PairSet

# 16 small functions with distinct identifiers and comments; nesting depth
# varies so the tree encoder sees both flat and branched structures.
TOY_PAIRS = [
    ("p01", "def add_numbers(first, second):\n    return first + second", "add two numbers together"),
    ("p02", "def subtract_amount(value, amount):\n    return value - amount", "subtract one number from another"),
    ("p03", "def is_even(number):\n    if number % 2 == 0:\n        return True\n    return False", "check whether a number is even"),
    ("p04", "def find_largest(items):\n    return max(items)", "find the largest item in a list"),
    ("p05", "def count_words(text):\n    return len(text.split())", "count the words in a text"),
    ("p06", "def read_lines(path):\n    with open(path) as handle:\n        return handle.readlines()", "read all lines from a file"),
    ("p07", "def square_values(numbers):\n    return [value * value for value in numbers]", "square every item in a list"),
    ("p08", 'def join_names(names):\n    return ", ".join(names)', "join names with commas"),
    ("p09", "def reverse_text(text):\n    return text[::-1]", "reverse the given string"),
    ("p10", "def total_of(items):\n    while items:\n        yield items.pop()", "sum all items of a list"),
    ("p11", "def first_element(sequence):\n    if sequence:\n        return sequence[0]\n    return None", "get the first item of a list"),
    ("p12", "def zip_dictionary(keys, values):\n    return dict(zip(keys, values))", "build a dictionary from keys and values"),
    ("p13", "def clamp_between(value, low, high):\n    return min(high, max(low, value))", "clamp a value between two bounds"),
    ("p14", "def show_message(message):\n    print(message)", "print the given message"),
    ("p15", "def path_exists(path):\n    import os\n    return os.path.exists(path)", "check whether a file exists"),
    ("p16", "def double_it(number):\n    return number * 2", "double the given value"),
]

# One function with the nested shape exercised throughout the tree tests:
# root with four children, a while block holding an if block holding a
# single statement.
NESTED_SNIPPET = """def deepdependencytargets(target_dicts, roots):
    dependencies = set()
    pending = set(roots)
    while pending:
        if (r in dependencies):
            continue
    return list(dependencies)
"""


@pytest.fixture
def toy_pairs() -> PairSet:
    return PairSet(tuple(CodeCommentPair(i, c, m) for i, c, m in TOY_PAIRS))


@pytest.fixture
def f64():
    """Run a test in float64 mode (finite-difference gradient checks)."""
    ad.set_default_dtype(np.float64)
    yield
    ad.set_default_dtype(np.float32)


@pytest.fixture(autouse=True)
def _reset_dtype():
    yield
    ad.set_default_dtype(np.float32)
