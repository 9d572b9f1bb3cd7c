import pytest

from ifsresonance.ifs.systems import central_cantor


@pytest.fixture(scope="session")
def cantor_third():
    return central_cantor("1/3")

@pytest.fixture(scope="session")
def cantor_quarter():
    return central_cantor("1/4")

@pytest.fixture(scope="session")
def cantor_ninth():
    return central_cantor("1/9")

@pytest.fixture(scope="session")
def cantor_fifth():
    return central_cantor("1/5")
