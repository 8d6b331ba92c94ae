import numpy as np
import pytest

from eplab.src import background as bg
from eplab.src.background import BackgroundKind, BackgroundProfile, Envelope
from eplab.src.config import BackgroundConfig
from eplab.src.errors import InvalidBackground, UnsupportedVariant
from eplab.src.fields import Field, sup_norm

from tests.conftest import TWO_PI

@pytest.fixture
def shape(grid):
    return Field.from_function(grid, lambda x: 0.2 * np.cos(TWO_PI * x))

def test_constant_profile(grid):
    p = BackgroundProfile.constant(1.5)
    assert bg.evaluate(p, 3.0, 0.1) == 1.5
    assert bg.evaluate(p, 3.0, np.zeros(4)).shape == (4,)
    assert bg.deviation_sup(p, 0.0) == 0.0
    assert bg.bounds(p) == (1.5, 1.5)

def test_exponential_profile(grid, shape):
    p = BackgroundProfile.exponential_decay(1.0, shape, 1.0, 0.5)
    assert bg.evaluate(p, 2.0, 0.0) == pytest.approx(1.0 + 0.2 * np.exp(-1.0), rel=1e-10)
    assert bg.deviation_sup(p, 2.0) == pytest.approx(0.2 * np.exp(-1.0))
    assert bg.bounds(p) == pytest.approx((0.8, 1.2))
    assert p.decay_rate == 0.5
    field = bg.evaluate_field(p, 0.0, grid)
    assert sup_norm(field - 1.0 - shape) < 1e-15

def test_rational_envelope():
    envelope = Envelope("rational", 2.0, p=2.0)
    assert envelope(1.0) == pytest.approx(0.5)
    np.testing.assert_allclose(envelope(np.array([0.0, 3.0])), [2.0, 0.125])

def test_shape_must_have_zero_mean(grid):
    with pytest.raises(InvalidBackground):
        BackgroundProfile.exponential_decay(1.0, Field.constant(grid, 0.1), 1.0, 0.5)

def test_background_must_stay_positive(grid):
    shape = Field.from_function(grid, lambda x: 1.5 * np.cos(TWO_PI * x))
    with pytest.raises(InvalidBackground):
        BackgroundProfile.exponential_decay(1.0, shape, 1.0, 0.5)

def test_general_decay_needs_decaying_envelope(shape):
    with pytest.raises(InvalidBackground):
        BackgroundProfile.general_decay(1.0, shape, Envelope("constant", 0.5))

def test_envelope_validation():
    with pytest.raises(InvalidBackground):
        Envelope("exponential", 1.0, r1=0.0)
    with pytest.raises(InvalidBackground):
        Envelope("rational", -1.0)

def test_boltzmann_has_no_pointwise_values(grid):
    p = BackgroundProfile.boltzmann()
    assert p.is_boltzmann
    for call in (lambda: bg.evaluate(p, 0.0, 0.0), lambda: bg.bounds(p), lambda: bg.deviation_sup(p, 0.0)):
        with pytest.raises(UnsupportedVariant):
            call()

def test_from_config(grid):
    config = BackgroundConfig(kind="general_decay", cbar=2.0, shape={"amplitude": 0.5, "kind": "sin"},
                              envelope={"kind": "rational", "C1": 1.0, "p": 1.0})
    p = bg.from_config(config, grid)
    assert p.kind is BackgroundKind.GENERAL_DECAY
    assert p.decay_rate is None
    assert bg.evaluate(p, 1.0, 0.25) == pytest.approx(2.0 + 0.25, rel=1e-6)
