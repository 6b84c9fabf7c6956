import math

import numpy as np
import pytest

from halfeig import Band, Homotopy, InfSup, Linear, LinearCoeffs, PucciMinus, PucciPlus, Shift
from halfeig import StarEnvelope, SubstarEnvelope, build_grid
from halfeig.config import f_from_expr, loads_config, parse_lambda
from halfeig.grammar import ConfigError, dump_operator, load_operator, parse_number

BASE = """
[operator]
kind = "pucci_minus"
gamma = 1.0
Gamma = 2.0

[domain]
dim = 1
lo = 0.0
hi = "pi"
n_interior = 11
"""

FAM = (LinearCoeffs(1.0, (0.5,), 0.25), LinearCoeffs(2.0))
ROUND_TRIP = [
    PucciPlus(Band(1.0, 3.0)),
    PucciMinus(Band(0.5, 2.0)),
    Linear(LinearCoeffs(((1.0, 0.25), (0.25, 2.0)), (1.0, -1.0), 0.5)),
    InfSup((FAM, (LinearCoeffs(1.5),))),
    Shift(PucciMinus(Band(1.0, 2.0)), -1.5),
    Homotopy(PucciMinus(Band(1.0, 2.0)), 0.25, 2.0),
    StarEnvelope(InfSup((FAM,))),
    SubstarEnvelope(InfSup((FAM,))),
]


@pytest.mark.parametrize("op", ROUND_TRIP)
def test_operator_text_round_trip(op):
    assert load_operator(dump_operator(op)) == op


@pytest.mark.parametrize("text, value", [("pi", math.pi), ("2*pi", 2 * math.pi), ("pi/2", math.pi / 2),
                                         ("-pi", -math.pi), (3, 3.0), ("1.5", 1.5)])
def test_parse_number(text, value):
    assert parse_number(text) == pytest.approx(value)


@pytest.mark.parametrize("bad", [True, "tau", [1]])
def test_parse_number_rejects(bad):
    with pytest.raises(ConfigError):
        parse_number(bad)


def test_loads_config_basic():
    cfg = loads_config(BASE + '[run]\nlambda = "lambda1_minus + 0.1"\nf = "sin(1)"\n')
    assert cfg.operator == PucciMinus(Band(1.0, 2.0))
    assert cfg.grid.hi == (math.pi,)
    assert cfg.run["lambda"] == "lambda1_minus + 0.1"


@pytest.mark.parametrize("text", [
    BASE.replace("Gamma = 2.0", "Gamma = 0.5"),
    BASE + "[extra]\n",
    BASE.replace("gamma = 1.0", "gamma = 1.0\nsigma = 3"),
    BASE + "[run]\nunknown = 1\n",
    BASE + "[run]\ntol = true\n",
    BASE + '[run]\nf = "cos(1)"\n',
    BASE + '[run]\nlambda = "lambda2 + 1"\n',
    BASE.replace("n_interior = 11", "n_interior = 2"),
    BASE.replace('kind = "pucci_minus"', 'kind = "mystery"'),
    BASE + "[run]\nlambda_range = [1.0]\n",
    "not toml = = =",
    BASE.replace('kind = "pucci_minus"\ngamma = 1.0\nGamma = 2.0',
                 'kind = "linear"\nA = [[1.0, 0.0], [0.0, 1.0]]'),
])
def test_loads_config_rejects(text):
    with pytest.raises(ConfigError):
        loads_config(text)


@pytest.mark.parametrize("v, ref, off", [("lambda1_minus + 0.5", "lambda1_minus", 0.5),
                                         ("lambda1_plus - 0.25", "lambda1_plus", -0.25),
                                         ("lambda1_minus", "lambda1_minus", 0.0),
                                         (2.5, None, 2.5)])
def test_parse_lambda(v, ref, off):
    assert parse_lambda(v) == (ref, off)


def test_f_vocabulary():
    g = build_grid(1, 0, math.pi, 31)
    x = g.coords[:, 0]
    inner = slice(0, g.n_interior)
    assert np.allclose(f_from_expr("sin(1)", g).values[inner], np.sin(x[inner]))
    assert np.allclose(f_from_expr("-2*sin(2)", g).values[inner], -2 * np.sin(2 * x[inner]))
    assert np.allclose(f_from_expr("const(3)", g).values[inner], 3)
    assert np.all(f_from_expr("const(3)", g).boundary == 0)
    b = f_from_expr("bump()", g)
    assert b.sup_norm() == pytest.approx(1, abs=0.05) and b.interior.min() == 0
    g2 = build_grid(2, (0, 0), (1, 1), 9)
    v = f_from_expr("sin(1, 2)*bump(0.5, 0.5, 0.5)", g2)
    assert v.values.shape == (g2.n_nodes,)


def test_f_bad_arity():
    with pytest.raises(ConfigError):
        f_from_expr("const()", build_grid(1, 0, 1, 5))
    with pytest.raises(ConfigError):
        f_from_expr("bump(0.5, 0.5, 0.5)", build_grid(1, 0, 1, 5))


def test_scalar_bounds_broadcast_in_2d():
    cfg = loads_config(BASE.replace("dim = 1", "dim = 2"))
    assert cfg.grid.hi == (math.pi, math.pi) and cfg.grid.n == (11, 11)
