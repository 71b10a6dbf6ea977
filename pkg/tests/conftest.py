import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import swap_market  # noqa: E402


@pytest.fixture
def m2():
    """The canonical 2x2 market with two stable matchings.

    P0: A0 > A1, P1: A1 > A0; A0: P1 > P0, A1: P0 > P1.
    Proposer-optimal stable matching pairs everyone with their top choice;
    acceptor-optimal is the full swap.
    """
    return swap_market()
