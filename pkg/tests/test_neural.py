import csv

import numpy as np
import pytest

from conftest import trace_batches
from neuralltlf.automata import characteristic_sample, formula_to_dfa
from neuralltlf.data import build_dataset
from neuralltlf.generate import random_formula
from neuralltlf.ltl import Prop, parse, valuation
from neuralltlf.neural import (
    Network, TrainConfig, bce_loss, classification_metrics, forward, gradients,
    hard_accuracy, hard_metrics, init_network, leaky_rectifier, load_checkpoint, loss,
    predict, save_checkpoint, teacher_network, train,
)

P = ("a", "b", "c")


def _single_filter(props, wp, wq, b, base, in_base=None, wm=None, qualitative=True):
    n = len(props)
    params = {
        "in_base": np.full(n, -1.0) if in_base is None else np.asarray(in_base, float),
        "L0.wp": np.array([wp], float),
        "L0.wm": np.zeros((1, n)) if wm is None else np.array([wm], float),
        "L0.wq": np.array([wq], float),
        "L0.b": np.array([b], float),
        "L0.base": np.array([base], float),
    }
    return Network(tuple(props), (1,), params, qualitative)


def test_until_probe_preactivation():
    # x=(1,0), m=(0,0), tau=1 with the until weights: 1 + 0 + relu(1) - 1.5 >= 0
    z = (1 * 1 + 0 * 2) + (0 * 0 + 0 * 0) + max(1.0, 0.0) * 1 - 1.5
    assert z == 0.5 and float(z >= 0) == 1.0


def test_globally_teacher_on_all_true_trace():
    net = teacher_network(parse("G a"), ["a"])
    X = np.ones((1, 5, 1))
    assert forward(net, X, "hard").prediction[0] == 1.0


def test_zero_filter_predicts_false():
    net = _single_filter(P, [0, 0, 0], 0.0, -1.0, -1.0)
    X = np.random.default_rng(0).integers(0, 2, (20, 6, 3))
    assert (forward(net, X, "hard").prediction == 0).all()


def test_width_mismatch():
    net = init_network(P, (1,), seed=0)
    with pytest.raises(ValueError):
        forward(net, np.zeros((1, 3, 2)))


def test_architecture_must_end_in_one_filter():
    with pytest.raises(ValueError):
        init_network(P, (3, 2), seed=0)


# -- loss and gradients --------------------------------------------------------

def test_loss_values():
    y = np.array([1.0, 0.0, 1.0])
    assert bce_loss(y, y) < 1e-6
    assert bce_loss(np.full(3, 0.5), y) == pytest.approx(np.log(2))


def _finite_difference_check(net, X, y, h=1e-4):
    _, grads = gradients(net, X, y)
    worst = 0.0
    for name, value in net.params.items():
        if net.qualitative and name.endswith(".wm"):
            continue
        it = np.nditer(value, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = value[idx]
            value[idx] = old + h
            up = loss(net, X, y)
            value[idx] = old - h
            down = loss(net, X, y)
            value[idx] = old
            num = (up - down) / (2 * h)
            ana = grads[name][idx]
            err = abs(num - ana) / max(1e-6, abs(num) + abs(ana))
            if abs(num - ana) > 1e-8:
                worst = max(worst, err)
    return worst


@pytest.mark.parametrize("seed", range(6))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    arch = [(1,), (2, 1), (3, 2, 1)][seed % 3]
    net = init_network(("a", "b"), arch, seed=seed, qualitative=seed % 2 == 0,
                       beta=rng.uniform(1, 3), alpha=rng.uniform(0, 0.3))
    X = rng.integers(0, 2, (8, int(rng.integers(2, 7)), 2)).astype(float)
    y = rng.integers(0, 2, 8).astype(float)
    assert _finite_difference_check(net, X, y) < 1e-4


def test_symmetric_batch_gives_equal_gradients():
    net = _single_filter(("a", "b"), [0, 0], 0.0, 0.0, 0.0, in_base=[0.0, 0.0])
    X = np.array([[[1, 0]], [[0, 1]]], float)
    _, g = gradients(net, X, np.array([1.0, 1.0]))
    assert g["L0.wp"][0, 0] == pytest.approx(g["L0.wp"][0, 1])


def test_negative_qualitative_weight_uses_leaky_slope():
    net = _single_filter(("a",), [0.3], -0.5, 0.1, 0.4)
    X = np.array([[[1], [0], [1]]], float)
    y = np.array([1.0])
    alpha = 0.2
    _, g = gradients(net, X, y, beta=1.0, alpha=alpha)
    # gradient w.r.t. the rectified weight, scaled by alpha for negative wq
    h = 1e-6
    net.params["L0.wq"][0] += h
    up = loss(net, X, y, 1.0, alpha)
    net.params["L0.wq"][0] -= 2 * h
    down = loss(net, X, y, 1.0, alpha)
    assert g["L0.wq"][0] == pytest.approx((up - down) / (2 * h), rel=1e-5)
    assert leaky_rectifier(np.array([-2.0]), alpha)[0] == pytest.approx(-0.4)


def test_qualitative_mode_has_no_metric_gradients():
    net = init_network(P, (3, 1), seed=1, qualitative=True)
    X = np.random.default_rng(1).integers(0, 2, (10, 5, 3))
    _, g = gradients(net, X, np.ones(10))
    assert all(not g[f"L{l}.wm"].any() for l in range(2))
    assert all(not net.params[f"L{l}.wm"].any() for l in range(2))


def test_rectifier_converges_to_relu():
    x = np.linspace(-3, 3, 13)
    assert np.allclose(leaky_rectifier(x, 0.0), np.maximum(0, x))
    gaps = [np.abs(leaky_rectifier(x, a) - np.maximum(0, x)).max() for a in (0.2, 0.1, 0.01)]
    assert gaps == sorted(gaps, reverse=True)


# -- metrics -------------------------------------------------------------------

def _data(text, n=100, seed=0):
    phi = parse(text)
    sample = characteristic_sample(formula_to_dfa(phi, P), 15)
    return build_dataset(phi, P, n, n, 15, sample, seed=seed)


def test_teacher_network_is_perfect_on_its_data():
    d = _data("a U (b | F c)")
    assert hard_accuracy(teacher_network(parse("a U (b | F c)"), P), d) == 1.0


def test_constant_true_metrics():
    m = classification_metrics(np.ones(10, bool), np.array([1] * 5 + [0] * 5, bool))
    assert (m.accuracy, m.recall) == (0.5, 1.0)


def test_inverted_predictions():
    y = np.array([1, 0, 1, 1], bool)
    assert classification_metrics(~y, y).accuracy == 0.0


def test_empty_metrics():
    with pytest.raises(ValueError):
        classification_metrics(np.array([], bool), np.array([], bool))


# -- training ------------------------------------------------------------------

def test_eventually_converges_for_most_seeds():
    d = _data("F a")
    done = 0
    for seed in range(10):
        r = train(init_network(P, (1,), seed=seed), d, TrainConfig(seed=seed))
        done += r.status == "converged" and r.best_hard_accuracy == 1.0
    assert done >= 9


def test_annealing_schedule():
    d = _data("G b", n=20)
    cfg = TrainConfig(seed=0, max_epochs=7, early_stop=False)
    r = train(init_network(P, (1,), seed=0), d, cfg)
    for row in r.log:
        assert row["beta"] == pytest.approx(cfg.beta0 + row["epoch"] * cfg.beta_rate)
        assert row["alpha"] == pytest.approx(max(0.0, cfg.alpha0 + row["epoch"] * cfg.alpha_rate))
    assert r.status == "max_epochs"


def test_alpha_is_clamped_at_zero():
    d = _data("G b", n=10)
    cfg = TrainConfig(seed=0, max_epochs=5, early_stop=False, alpha0=1e-4, alpha_rate=-1e-4)
    r = train(init_network(P, (1,), seed=0), d, cfg)
    assert [row["alpha"] for row in r.log] == [0.0] * 5


def test_training_is_deterministic():
    d = _data("a U b", n=30)
    runs = [train(init_network(P, (3, 1), seed=5), d, TrainConfig(seed=5, max_epochs=20)) for _ in range(2)]
    assert runs[0].log == runs[1].log
    for k in runs[0].network.params:
        assert np.array_equal(runs[0].network.params[k], runs[1].network.params[k])


def test_budget_exhaustion_is_reported():
    d = _data("G (a | F b)", n=50)
    r = train(init_network(P, (1,), seed=0), d, TrainConfig(seed=0, time_budget=0.0))
    assert r.status == "budget_exhausted" and len(r.log) == 1


def test_invalid_config():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_log_and_checkpoint_round_trip(tmp_path):
    d = _data("F b", n=20)
    r = train(init_network(P, (3, 1), seed=2), d, TrainConfig(seed=2, max_epochs=3, early_stop=False))
    r.write_log(tmp_path / "log.csv")
    with open(tmp_path / "log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["epoch", "loss", "soft_acc", "hard_acc", "alpha", "beta"]
    assert len(rows) == 3
    save_checkpoint(r.network, tmp_path / "net.json", epoch=3, seed=2)
    net, meta = load_checkpoint(tmp_path / "net.json")
    assert meta == {"epoch": 3, "seed": 2}
    assert net.arch == (3, 1) and net.props == P
    for k in net.params:
        assert np.array_equal(net.params[k], r.network.params[k])
    X = d.array()
    assert np.array_equal(predict(net, X), predict(r.network, X))


# -- hand-set weights ------------------------------------------------------------

@pytest.mark.parametrize("text,wp,wq,b,base_on", [
    ("a U b", [1, 2], 1, -1.5, False),
    ("a W b", [1, 2], 1, -1.5, True),
    ("F a", [1, 0], 1, -0.5, False),
    ("G a", [1, 0], 1, -1.5, True),
])
def test_teacher_weights(text, wp, wq, b, base_on):
    net = teacher_network(parse(text), ["a", "b"])
    assert net.arch == (1,)
    p = net.layer(0)
    assert p["wp"][0].tolist() == wp
    assert p["wq"][0] == wq and p["b"][0] == b
    assert (p["base"][0] >= 0) == base_on


@pytest.mark.parametrize("text", ["a U b", "a W b", "X a", "WX a", "F a", "G a"])
def test_teacher_fidelity_every_timestep(text):
    phi = parse(text)
    props = ("a", "b")
    net = teacher_network(phi, props)
    for X in trace_batches(props, 4):
        out = forward(net, X, "hard").activations(net.n_layers - 1)[:, :, 0]
        assert np.array_equal(out > 0.5, valuation(phi, X, props))


def test_teacher_for_composite_formula():
    phi = parse("(a U b) & F c")
    net = teacher_network(phi, P)
    assert net.arch[-1] == 1
    for X in trace_batches(P, 3):
        assert np.array_equal(predict(net, X), valuation(phi, X, P)[:, 0])


@pytest.mark.parametrize("seed", range(40))
def test_teacher_fidelity_random_metric_formulas(seed):
    phi = random_formula(2 + seed % 5, ("a", "b"), qualitative=False, seed=seed)
    net = teacher_network(phi, ("a", "b"))
    for X in trace_batches(("a", "b"), 4):
        assert np.array_equal(predict(net, X), valuation(phi, X, ("a", "b"))[:, 0]), phi
