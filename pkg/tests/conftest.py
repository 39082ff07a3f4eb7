import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcf.tabular import DiscreteTable, Schema


def random_table(rng, max_vars=5, max_states=3, max_rows=200, min_vars=2):
    """A random small schema plus uniform random rows."""
    n_vars = int(rng.integers(min_vars, max_vars + 1))
    n_rows = int(rng.integers(5, max_rows + 1))
    variables = []
    for i in range(n_vars):
        card = int(rng.integers(2, max_states + 1))
        variables.append((f"v{i}", tuple(f"s{j}" for j in range(card))))
    schema = Schema(variables=tuple(variables), target=f"v{n_vars - 1}")
    rows = np.column_stack(
        [rng.integers(0, len(cats), size=n_rows) for _, cats in variables]
    )
    return DiscreteTable(schema, rows)


@pytest.fixture
def xy_table():
    """The 4-row worked example: rows (0,0),(0,1),(0,1),(1,1)."""
    schema = Schema(
        variables=(("X", ("x0", "x1")), ("Y", ("y0", "y1"))), target="Y"
    )
    rows = np.array([[0, 0], [0, 1], [0, 1], [1, 1]])
    return DiscreteTable(schema, rows)
