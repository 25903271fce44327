from pathlib import Path

import pytest

from asymid.cli import bundled
from asymid.textformat import parse

USED_CAR = bundled("used-car.id")
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def used_car_raw():
    return parse(USED_CAR.read_text(encoding="utf-8")).diagram


@pytest.fixture(scope="session")
def used_car(used_car_raw):
    return used_car_raw.renormalized()
