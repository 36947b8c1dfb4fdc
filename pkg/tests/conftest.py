import numpy as np
import pytest

from convbid.market_data import PricePanel


def make_panel(da, rt, nodes=None, start="2019-01-01T00", tz="UTC"):
    da = np.asarray(da, dtype=float)
    rt = np.asarray(rt, dtype=float)
    nodes = tuple(nodes or (f"n{i}" for i in range(da.shape[0])))
    hours = np.datetime64(start, "h") + np.arange(da.shape[1]).astype("timedelta64[h]")
    return PricePanel(nodes, hours, da, rt, tz)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
