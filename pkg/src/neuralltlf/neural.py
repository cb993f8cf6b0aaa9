"""Layered temporal filters, trained with hand-written backprop-through-time.

Each filter i in layer l maps its input sequences v_j(t) to

    y_i(t) = sigma( sum_j wp[i,j] v_j(t) + sum_j wm[i,j] v_j(t+1)
                    + delta(wq[i]) y_i(t+1) + b[i] )

running backwards from t = T-1. Values at t = T are "base" values: a
filter's ``base`` parameter seeds its own recursion and is also what the next
layer sees as that sequence's value past the end; raw propositions get
their own ``in_base`` parameters. Training uses a sigmoid of steepness beta
and a leaky rectifier max(x, alpha*x); hard mode uses the unit step and
max(0, x).
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .ltl import (
    And, Const, Eventually, Formula, Globally, Next, Not, Or, Prop, Release,
    Until, WeakNext, WeakUntil, is_qualitative, propositions, subformulas,
)

log = logging.getLogger(__name__)

PARAM_KINDS = ("wp", "wm", "wq", "b", "base")
CHECKPOINT_VERSION = 1
EPS = 1e-7


@dataclass
class Network:
    props: tuple[str, ...]
    arch: tuple[int, ...]
    params: dict[str, np.ndarray]
    qualitative: bool = True
    beta: float = 1.0
    alpha: float = 0.21

    def __post_init__(self):
        if not self.arch or self.arch[-1] != 1:
            raise ValueError(f"architecture {self.arch} must end in a single filter")

    @property
    def n_layers(self) -> int:
        return len(self.arch)

    def width(self, layer: int) -> int:
        """Input width of ``layer``."""
        return len(self.props) if layer == 0 else self.arch[layer - 1]

    def layer(self, l: int) -> dict[str, np.ndarray]:
        return {k: self.params[f"L{l}.{k}"] for k in PARAM_KINDS}

    def input_base(self, l: int) -> np.ndarray:
        """Base pre-activations of the sequences feeding layer ``l``."""
        return self.params["in_base"] if l == 0 else self.params[f"L{l - 1}.base"]

    def param_names(self) -> list[str]:
        names = ["in_base"]
        for l in range(self.n_layers):
            names += [f"L{l}.{k}" for k in PARAM_KINDS]
        return names

    def copy(self) -> "Network":
        return Network(self.props, self.arch, {k: v.copy() for k, v in self.params.items()},
                       self.qualitative, self.beta, self.alpha)


def init_network(props: Sequence[str], arch: Sequence[int], seed=None, qualitative: bool = True,
                 beta: float = 1.0, alpha: float = 0.21) -> Network:
    """Weights, biases and base pre-activations uniform in [-1, 1]."""
    rng = np.random.default_rng(seed)
    props, arch = tuple(props), tuple(arch)
    params = {"in_base": rng.uniform(-1, 1, len(props))}
    width = len(props)
    for l, n in enumerate(arch):
        params[f"L{l}.wp"] = rng.uniform(-1, 1, (n, width))
        wm = rng.uniform(-1, 1, (n, width))
        params[f"L{l}.wm"] = np.zeros_like(wm) if qualitative else wm
        params[f"L{l}.wq"] = rng.uniform(-1, 1, n)
        params[f"L{l}.b"] = rng.uniform(-1, 1, n)
        params[f"L{l}.base"] = rng.uniform(-1, 1, n)
        width = n
    return Network(props, arch, params, qualitative, beta, alpha)


# ---------------------------------------------------------------------------
# forward / backward

def sigmoid(x, beta):
    return 0.5 * (1.0 + np.tanh(0.5 * beta * x))


def step(x):
    return (x >= 0).astype(float)


def leaky_rectifier(x, alpha):
    return np.maximum(x, alpha * x)


@dataclass
class _LayerCache:
    inputs: np.ndarray   # (N, T, J)
    nxt: np.ndarray      # (N, T, J) inputs shifted one step, input base at the end
    out: np.ndarray      # (N, T+1, F), out[:, T] is the base value
    dq: np.ndarray       # (F,)
    base: np.ndarray     # (F,) base activation


@dataclass
class Forward:
    layers: list[_LayerCache]
    in_base: np.ndarray
    prediction: np.ndarray  # (N,)

    def activations(self, l: int) -> np.ndarray:
        """Layer ``l`` outputs, shape (N, T, F)."""
        return self.layers[l].out[:, :-1]


def forward(net: Network, X: np.ndarray, mode: str = "soft",
            beta: float | None = None, alpha: float | None = None) -> Forward:
    """Run the network on a batch ``X`` of shape (N, T, |P|)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.shape[2] != len(net.props):
        raise ValueError(f"trace width {X.shape[2]} != {len(net.props)} propositions")
    beta = net.beta if beta is None else beta
    alpha = net.alpha if alpha is None else alpha
    if mode == "hard":
        act = step
        rect = lambda w: np.maximum(w, 0.0)
    elif mode == "soft":
        act = lambda z: sigmoid(z, beta)
        rect = lambda w: leaky_rectifier(w, alpha)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    N, T, _ = X.shape
    V = X
    in_base = act(net.params["in_base"])
    base_in = in_base
    caches = []
    for l in range(net.n_layers):
        p = net.layer(l)
        nxt = np.empty_like(V)
        nxt[:, :-1] = V[:, 1:]
        nxt[:, -1] = base_in
        static = V @ p["wp"].T + nxt @ p["wm"].T + p["b"]
        dq = rect(p["wq"])
        base = act(p["base"])
        out = np.empty((N, T + 1, len(p["b"])))
        out[:, T] = base
        for t in range(T - 1, -1, -1):
            out[:, t] = act(static[:, t] + dq * out[:, t + 1])
        caches.append(_LayerCache(V, nxt, out, dq, base))
        V = out[:, :T]
        base_in = base
    return Forward(caches, in_base, V[:, 0, 0].copy())


def bce_loss(pred: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(pred, EPS, 1 - EPS)
    y = np.asarray(y, dtype=float)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))


def loss(net: Network, X: np.ndarray, y: np.ndarray, beta=None, alpha=None) -> float:
    return bce_loss(forward(net, X, "soft", beta, alpha).prediction, y)


def backward(net: Network, fw: Forward, y: np.ndarray,
             beta: float | None = None, alpha: float | None = None) -> dict[str, np.ndarray]:
    """Gradient of the mean clamped BCE loss w.r.t. every parameter."""
    beta = net.beta if beta is None else beta
    alpha = net.alpha if alpha is None else alpha
    y = np.asarray(y, dtype=float)
    pred = fw.prediction
    N = len(pred)
    inside = (pred > EPS) & (pred < 1 - EPS)
    p = np.clip(pred, EPS, 1 - EPS)
    gpred = np.where(inside, (-y / p + (1 - y) / (1 - p)) / N, 0.0)

    grads: dict[str, np.ndarray] = {}
    last = fw.layers[-1]
    G = np.zeros(last.out[:, :-1].shape)
    G[:, 0, 0] = gpred
    g_base_ext = np.zeros(last.out.shape[2])
    for l in range(net.n_layers - 1, -1, -1):
        c = fw.layers[l]
        p_l = net.layer(l)
        T = c.out.shape[1] - 1
        y_l = c.out[:, :T]
        dsig = beta * y_l * (1 - y_l)
        dZ = np.empty_like(y_l)
        carry = np.zeros(y_l[:, 0].shape)
        for t in range(T):
            dz = (G[:, t] + carry) * dsig[:, t]
            dZ[:, t] = dz
            carry = dz * c.dq
        g_base = carry.sum(0) + g_base_ext
        grads[f"L{l}.base"] = g_base * beta * c.base * (1 - c.base)
        grads[f"L{l}.b"] = dZ.sum((0, 1))
        grads[f"L{l}.wp"] = np.einsum("ntf,ntj->fj", dZ, c.inputs)
        grads[f"L{l}.wm"] = (np.zeros_like(p_l["wm"]) if net.qualitative
                             else np.einsum("ntf,ntj->fj", dZ, c.nxt))
        d_dq = (dZ * c.out[:, 1:]).sum((0, 1))
        grads[f"L{l}.wq"] = d_dq * np.where(p_l["wq"] > 0, 1.0, alpha)
        dV = dZ @ p_l["wp"]
        dnxt = dZ @ p_l["wm"]
        dV[:, 1:] += dnxt[:, :-1]
        G = dV
        g_base_ext = dnxt[:, -1].sum(0)
    a = fw.in_base
    grads["in_base"] = g_base_ext * beta * a * (1 - a)
    return grads


def gradients(net: Network, X: np.ndarray, y: np.ndarray, beta=None, alpha=None):
    fw = forward(net, X, "soft", beta, alpha)
    return bce_loss(fw.prediction, y), backward(net, fw, y, beta, alpha)


def predict(net: Network, X: np.ndarray, mode: str = "hard") -> np.ndarray:
    pred = forward(net, X, mode).prediction
    return pred >= 0.5 if mode == "soft" else pred > 0.5


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float


def classification_metrics(pred: np.ndarray, labels: np.ndarray) -> Metrics:
    pred = np.asarray(pred, bool)
    labels = np.asarray(labels, bool)
    if len(labels) == 0:
        raise ValueError("empty dataset")
    tp = int((pred & labels).sum())
    fp = int((pred & ~labels).sum())
    fn = int((~pred & labels).sum())
    acc = float((pred == labels).mean())
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return Metrics(acc, precision, recall)


def hard_metrics(net: Network, data: Dataset) -> Metrics:
    if len(data) == 0:
        raise ValueError("empty dataset")
    return classification_metrics(predict(net, data.array(), "hard"), data.labels)


def hard_accuracy(net: Network, data: Dataset) -> float:
    return hard_metrics(net, data).accuracy


# ---------------------------------------------------------------------------
# training

class Adam:
    def __init__(self, lr: float = 0.005, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], frozen=()) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k in frozen:
                continue
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 0.005
    batch_size: int = 100
    max_epochs: int = 3000
    beta0: float = 1.0
    alpha0: float = 0.21
    beta_rate: float = 0.01
    alpha_rate: float = -7e-5
    seed: int = 0
    early_stop: bool = True
    time_budget: float | None = None  # seconds

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")


@dataclass
class TrainResult:
    network: Network            # parameters at the best hard-accuracy epoch
    log: list[dict] = field(default_factory=list)
    status: str = "max_epochs"  # "converged" | "budget_exhausted" | "max_epochs"
    best_epoch: int = 0
    best_hard_accuracy: float = 0.0
    elapsed: float = 0.0

    def write_log(self, path) -> None:
        write_log(self.log, path)


LOG_COLUMNS = ("epoch", "loss", "soft_acc", "hard_acc", "alpha", "beta")


def write_log(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in LOG_COLUMNS})


def train(net: Network, data: Dataset, cfg: TrainConfig, deadline: float | None = None) -> TrainResult:
    """Mini-batch Adam with per-epoch annealing of beta (up) and alpha (down to 0).

    Stops early once the discretised network classifies every training
    trace correctly, or when the time budget runs out (checked per epoch).
    """
    start = time.monotonic()
    if cfg.time_budget is not None:
        own = start + cfg.time_budget
        deadline = own if deadline is None else min(deadline, own)
    rng = np.random.default_rng(cfg.seed)
    net = net.copy()
    net.beta, net.alpha = cfg.beta0, cfg.alpha0
    X = data.array().astype(float)
    y = data.labels.astype(float)
    yb = data.labels
    N = len(y)
    opt = Adam(cfg.learning_rate)
    frozen = {f"L{l}.wm" for l in range(net.n_layers)} if net.qualitative else set()

    result = TrainResult(net.copy())
    best = -1.0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(N)
        total_loss = 0.0
        correct = 0
        for s in range(0, N, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            fw = forward(net, X[idx], "soft")
            total_loss += bce_loss(fw.prediction, y[idx]) * len(idx)
            correct += int(((fw.prediction >= 0.5) == yb[idx]).sum())
            grads = backward(net, fw, y[idx])
            opt.step(net.params, grads, frozen)
        net.alpha = max(0.0, net.alpha + cfg.alpha_rate)
        net.beta = net.beta + cfg.beta_rate
        hard = float((predict(net, X, "hard") == yb).mean())
        result.log.append({"epoch": epoch, "loss": total_loss / N, "soft_acc": correct / N,
                           "hard_acc": hard, "alpha": net.alpha, "beta": net.beta})
        if hard > best:
            best = hard
            result.network = net.copy()
            result.best_epoch = epoch
            result.best_hard_accuracy = hard
        if cfg.early_stop and hard == 1.0:
            result.status = "converged"
            break
        if deadline is not None and time.monotonic() >= deadline:
            result.status = "budget_exhausted"
            break
    result.elapsed = time.monotonic() - start
    return result


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(net: Network, path, epoch: int = 0, seed=None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "props": list(net.props),
        "arch": list(net.arch),
        "qualitative": net.qualitative,
        "alpha": net.alpha,
        "beta": net.beta,
        "epoch": epoch,
        "seed": seed,
        "params": {k: net.params[k].tolist() for k in net.param_names()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> tuple[Network, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    params = {k: np.array(v, dtype=float) for k, v in doc["params"].items()}
    net = Network(tuple(doc["props"]), tuple(doc["arch"]), params, doc["qualitative"],
                  doc["beta"], doc["alpha"])
    return net, {"epoch": doc["epoch"], "seed": doc["seed"]}


# ---------------------------------------------------------------------------
# hand-set weights mirroring a formula

_ON, _OFF = 1.0, -1.0  # base pre-activations whose step values are 1 / 0


def _direct_props(phi: Formula) -> dict:
    """Props under X / WX whose every such use agrees on strength: prop -> tag.

    Those can be read straight from the input layer with the input base
    value set to match, instead of through a copy filter.
    """
    tags: dict = {}
    for f in subformulas(phi):
        if isinstance(f, (Next, WeakNext)) and isinstance(f.arg, Prop):
            tags.setdefault(f.arg.name, set()).add(int(isinstance(f, WeakNext)))
    return {p: t.pop() for p, t in tags.items() if len(t) == 1}


def _level(phi: Formula, memo: dict, direct: dict) -> int:
    if phi in memo:
        return memo[phi]
    match phi:
        case Prop():
            lv = 0
        case Const():
            lv = 1
        case Next(arg=Prop(name=p)) | WeakNext(arg=Prop(name=p)) if p in direct:
            lv = 1
        case Next(arg=a) | WeakNext(arg=a):
            lv = _level(a, memo, direct) + 2
        case _:
            lv = max(_level(c, memo, direct) for c in phi.children) + 1
    memo[phi] = lv
    return lv


def teacher_network(phi: Formula, props: Sequence[str] | None = None) -> Network:
    """Network whose hard-mode output is exactly the truth value of ``phi``.

    One filter per operator node; subformulas needed further up are carried
    by copy filters, and the operand of X / WX always passes through a
    dedicated copy whose base value encodes the strong/weak end behaviour
    (or, for a proposition used with one strength only, the input itself).
    """
    props = tuple(sorted(propositions(phi))) if props is None else tuple(props)
    memo: dict = {}
    direct = _direct_props(phi)
    level = lambda f: _level(f, memo, direct)
    depth = max(level(phi), 1)
    # signals per layer: (formula, tag); tag None = computed/copied value,
    # tag 0/1 = copy with that base value
    layers: list[list] = [[] for _ in range(depth + 1)]
    layers[depth] = [(phi, None)]
    for l in range(depth, 0, -1):
        needs: list = []
        for f, tag in layers[l]:
            if tag is None and level(f) == l:
                if isinstance(f, (Next, WeakNext)) and isinstance(f.arg, Prop) and l == 1:
                    needs.append((f.arg, None))
                elif isinstance(f, Next):
                    needs.append((f.arg, 0))
                elif isinstance(f, WeakNext):
                    needs.append((f.arg, 1))
                else:
                    needs.extend((c, None) for c in f.children)
            else:
                needs.append((f, None))
        if l - 1 == 0:
            for f, tag in needs:
                if not isinstance(f, Prop) or tag is not None:
                    raise AssertionError(f"layer 0 can only hold propositions, got {f}")
            continue
        for key in needs:
            if key not in layers[l - 1]:
                layers[l - 1].append(key)

    arch = tuple(len(layers[l]) for l in range(1, depth + 1))
    params: dict[str, np.ndarray] = {"in_base": np.full(len(props), _OFF)}
    for p, tag in direct.items():
        params["in_base"][props.index(p)] = _ON if tag else _OFF
    qualitative = is_qualitative(phi)
    for l in range(1, depth + 1):
        inputs = [(Prop(p), None) for p in props] if l == 1 else layers[l - 1]
        index = {k: j for j, k in enumerate(inputs)}
        n, width = len(layers[l]), len(inputs)
        wp, wm = np.zeros((n, width)), np.zeros((n, width))
        wq, b, base = np.zeros(n), np.zeros(n), np.full(n, _OFF)
        for i, (f, tag) in enumerate(layers[l]):
            if not (tag is None and level(f) == l):
                wp[i, index[(f, None)]] = 1.0
                b[i] = -0.5
                if tag == 1:
                    base[i] = _ON
                continue
            kid = lambda c: index[(c, None)]
            match f:
                case Const(value=v):
                    b[i] = 0.5 if v else -0.5
                    base[i] = _ON if v else _OFF
                case Not(arg=a):
                    wp[i, kid(a)] += -1.0
                    b[i] = 0.5
                case And(left=a, right=c):
                    wp[i, kid(a)] += 1.0
                    wp[i, kid(c)] += 1.0
                    b[i] = -1.5
                case Or(left=a, right=c):
                    wp[i, kid(a)] += 1.0
                    wp[i, kid(c)] += 1.0
                    b[i] = -0.5
                case Next(arg=a) | WeakNext(arg=a) if l == 1:
                    wm[i, kid(a)] = 1.0
                    b[i] = -0.5
                case Next(arg=a):
                    wm[i, index[(a, 0)]] = 1.0
                    b[i] = -0.5
                case WeakNext(arg=a):
                    wm[i, index[(a, 1)]] = 1.0
                    b[i] = -0.5
                case Eventually(arg=a):
                    wp[i, kid(a)] = 1.0
                    wq[i], b[i], base[i] = 1.0, -0.5, _OFF
                case Globally(arg=a):
                    wp[i, kid(a)] = 1.0
                    wq[i], b[i], base[i] = 1.0, -1.5, _ON
                case Until(left=a, right=c) | WeakUntil(left=a, right=c):
                    wp[i, kid(a)] += 1.0
                    wp[i, kid(c)] += 2.0
                    wq[i], b[i] = 1.0, -1.5
                    base[i] = _ON if isinstance(f, WeakUntil) else _OFF
                case Release(left=a, right=c):
                    wp[i, kid(a)] += 1.0
                    wp[i, kid(c)] += 2.0
                    wq[i], b[i], base[i] = 1.0, -2.5, _ON
                case _:
                    raise ValueError(f"unsupported node {f!r}")
        k = l - 1
        params.update({f"L{k}.wp": wp, f"L{k}.wm": wm, f"L{k}.wq": wq,
                       f"L{k}.b": b, f"L{k}.base": base})
    return Network(props, arch, params, qualitative)
