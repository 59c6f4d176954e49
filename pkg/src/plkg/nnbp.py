"""Neural-network channel prediction.

One party feeds non-overlapping m-sample blocks of its own normalized
amplitude trace through a single-hidden-layer sigmoid network to predict
the other party's amplitude at the block center. Training is plain
sequential gradient descent with one update per block; the epoch loop
stops once the total epoch cost changes by no more than epsilon.

``ChannelPredictor`` wraps the procedure in an sklearn-style estimator
so it composes with the usual fit/predict tooling; the module-level
functions expose the individual steps for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .analysis import KeyRateResult
from .channel import CorrelationModel, sample_trace
from .montecarlo import McEstimate, empirical_mse
from .quantizer import (
    EventKind,
    classify_events,
    empirical_quantizer,
    make_quantizer,
)

__all__ = [
    "Normalizer",
    "NetworkParams",
    "TrainConfig",
    "ForwardTrace",
    "fit_normalizer",
    "forward",
    "gradients",
    "train_network",
    "predict_trace",
    "center_indices",
    "save_network",
    "load_network",
    "ChannelPredictor",
    "nnbp_pipeline",
    "PipelineResult",
]


@dataclass(frozen=True)
class Normalizer:
    min_val: float
    max_val: float

    def __post_init__(self):
        if not self.max_val > self.min_val:
            raise ValueError(
                f"degenerate range: max_val={self.max_val} <= min_val={self.min_val}"
            )

    def normalize(self, value):
        return (np.asarray(value, dtype=float) - self.min_val) / (self.max_val - self.min_val)

    def denormalize(self, value):
        return np.asarray(value, dtype=float) * (self.max_val - self.min_val) + self.min_val


def fit_normalizer(samples) -> Normalizer:
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least 2 samples to fit a normalizer")
    return Normalizer(min_val=float(arr.min()), max_val=float(arr.max()))


@dataclass
class NetworkParams:
    """Weights and biases; biases are subtracted in the forward pass."""

    U: np.ndarray      # (m, n) input-to-hidden weights
    q: np.ndarray      # (n,) hidden biases
    v: np.ndarray      # (n,) hidden-to-output weights
    omega: float       # output bias

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    m: int = 5
    n_hidden: int = 10
    eta: float = 0.1
    epsilon: float = 1e-2
    max_epochs: int = 50
    init_seed: int = 0

    def __post_init__(self):
        if self.m < 3 or self.m % 2 == 0:
            raise ValueError(f"m must be odd and >= 3, got {self.m}")
        if self.n_hidden < 1:
            raise ValueError(f"n_hidden must be >= 1, got {self.n_hidden}")
        if self.eta <= 0 or self.epsilon <= 0:
            raise ValueError("eta and epsilon must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class ForwardTrace:
    a_hidden: np.ndarray  # hidden-layer input x.U - q
    b_hidden: np.ndarray  # sigmoid(a_hidden)
    lam: float            # output-layer input b.v - omega
    y: float              # sigmoid(lam)


def _sigmoid(x):
    # branch form: never evaluates exp of a large positive argument
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_network(m: int, n_hidden: int, rng: np.random.Generator) -> NetworkParams:
    """All scalars drawn independently uniform(0, 1)."""
    return NetworkParams(
        U=rng.uniform(0.0, 1.0, size=(m, n_hidden)),
        q=rng.uniform(0.0, 1.0, size=n_hidden),
        v=rng.uniform(0.0, 1.0, size=n_hidden),
        omega=float(rng.uniform(0.0, 1.0)),
    )


def forward(net: NetworkParams, x) -> ForwardTrace:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.m,):
        raise ValueError(f"input must have length {net.m}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")
    a = x @ net.U - net.q
    b = _sigmoid(a)
    lam = float(b @ net.v - net.omega)
    y = float(_sigmoid(lam))
    return ForwardTrace(a_hidden=a, b_hidden=b, lam=lam, y=y)


def gradients(net: NetworkParams, x, target: float):
    """Partial derivatives of e = 0.5 (y - target)^2.

    Returns (z1, z2, z3, z4) = (de/domega, de/dv, de/dq, de/dU) with the
    sign conventions of the bias-subtracting forward pass.
    """
    x = np.asarray(x, dtype=float)
    tr = forward(net, x)
    y, b = tr.y, tr.b_hidden
    z1 = y * (1.0 - y) * (target - y)
    z2 = -z1 * b
    hidden = b * (1.0 - b) * z1 * net.v
    z3 = hidden
    z4 = -np.outer(x, hidden)
    return z1, z2, z3, z4


def _block_views(g_norm: np.ndarray, m: int):
    """Non-overlapping blocks and the 0-based center index of each."""
    n_blocks = g_norm.size // m
    blocks = g_norm[: n_blocks * m].reshape(n_blocks, m)
    centers = np.arange(n_blocks) * m + (m - 1) // 2
    return blocks, centers


def center_indices(length: int, m: int) -> np.ndarray:
    """0-based target indices of each non-overlapping m-block."""
    return np.arange(length // m) * m + (m - 1) // 2


def train_network(
    ga_norm, gb_norm, cfg: TrainConfig
) -> tuple[NetworkParams, int, float, bool]:
    """Sequential per-block gradient descent over normalized traces.

    Returns (net, epochs_used, final_epoch_cost, converged). Stops when
    the total epoch cost changes by at most cfg.epsilon; if max_epochs
    is exhausted first, the result is returned with converged=False.
    """
    ga = np.asarray(ga_norm, dtype=float)
    gb = np.asarray(gb_norm, dtype=float)
    if ga.shape != gb.shape:
        raise ValueError("training sequences must be aligned and equal length")
    if ga.size < cfg.m:
        raise ValueError(f"need at least m={cfg.m} samples, got {ga.size}")
    rng = np.random.default_rng(cfg.init_seed)
    net = init_network(cfg.m, cfg.n_hidden, rng)
    blocks, centers = _block_views(ga, cfg.m)
    targets = gb[centers]
    eta = cfg.eta
    e_prev = 0.0
    e_cur = 0.0
    epochs = 0
    converged = False
    for epoch in range(cfg.max_epochs):
        e_prev, e_cur = e_cur, 0.0
        for x, t in zip(blocks, targets):
            a = x @ net.U - net.q
            b = _sigmoid(a)
            lam = float(b @ net.v - net.omega)
            y = float(_sigmoid(lam))
            e_cur += 0.5 * (y - t) ** 2
            z1 = y * (1.0 - y) * (t - y)
            hidden = b * (1.0 - b) * z1 * net.v
            net.omega -= eta * z1
            net.v -= eta * (-z1 * b)
            net.q -= eta * hidden
            net.U -= eta * (-np.outer(x, hidden))
        epochs = epoch + 1
        if abs(e_cur - e_prev) <= cfg.epsilon:
            converged = True
            break
    return net, epochs, e_cur, converged


def predict_trace(
    net: NetworkParams,
    norm_a: Normalizer,
    norm_b: Normalizer,
    ga_new,
) -> tuple[np.ndarray, np.ndarray]:
    """Blockwise prediction of the peer's amplitudes for a fresh trace.

    Inputs are normalized with the training normalizer and clamped to
    [0, 1]; outputs are inverse-normalized with the peer's normalizer.
    Returns (predictions, center_indices), one value per full block.
    """
    ga = np.asarray(ga_new, dtype=float)
    if ga.size < net.m:
        raise ValueError(f"need at least m={net.m} samples, got {ga.size}")
    norm = np.clip(norm_a.normalize(ga), 0.0, 1.0)
    blocks, centers = _block_views(norm, net.m)
    a = blocks @ net.U - net.q
    b = _sigmoid(a)
    y = _sigmoid(b @ net.v - net.omega)
    return norm_b.denormalize(y), centers


def save_network(net: NetworkParams, path: str) -> None:
    """Flat text format: 'm n' header, then U rows, q, v, omega."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{net.m} {net.n_hidden}\n")
        for row in net.U:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
        fh.write(" ".join(f"{x:.17g}" for x in net.q) + "\n")
        fh.write(" ".join(f"{x:.17g}" for x in net.v) + "\n")
        fh.write(f"{net.omega:.17g}\n")


def load_network(path: str) -> NetworkParams:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    m, n = (int(tok) for tok in lines[0].split())
    if len(lines) != m + 4:
        raise ValueError(f"malformed network file: expected {m + 4} lines, got {len(lines)}")
    u = np.array([[float(t) for t in lines[1 + i].split()] for i in range(m)])
    q = np.array([float(t) for t in lines[m + 1].split()])
    v = np.array([float(t) for t in lines[m + 2].split()])
    omega = float(lines[m + 3])
    if u.shape != (m, n) or q.shape != (n,) or v.shape != (n,):
        raise ValueError("malformed network file: dimension mismatch")
    return NetworkParams(U=u, q=q, v=v, omega=omega)


class ChannelPredictor(BaseEstimator, RegressorMixin):
    """sklearn-style wrapper around the blockwise amplitude predictor.

    fit(ga, gb) takes the two parties' aligned raw amplitude traces;
    predict(ga_new) returns denormalized predictions of the peer's
    amplitudes at the block centers of the fresh trace.
    """

    def __init__(self, m=5, n_hidden=10, eta=0.1, epsilon=1e-2,
                 max_epochs=50, random_state=0):
        self.m = m
        self.n_hidden = n_hidden
        self.eta = eta
        self.epsilon = epsilon
        self.max_epochs = max_epochs
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            m=self.m,
            n_hidden=self.n_hidden,
            eta=self.eta,
            epsilon=self.epsilon,
            max_epochs=self.max_epochs,
            init_seed=self.random_state,
        )

    def fit(self, ga, gb):
        cfg = self._config()
        ga = np.asarray(ga, dtype=float)
        gb = np.asarray(gb, dtype=float)
        self.norm_in_ = fit_normalizer(ga)
        self.norm_out_ = fit_normalizer(gb)
        net, epochs, cost, converged = train_network(
            self.norm_in_.normalize(ga), self.norm_out_.normalize(gb), cfg
        )
        self.net_ = net
        self.n_epochs_ = epochs
        self.final_cost_ = cost
        self.converged_ = converged
        return self

    def predict(self, ga_new):
        predictions, centers = self.predict_with_centers(ga_new)
        return predictions

    def predict_with_centers(self, ga_new):
        if not hasattr(self, "net_"):
            raise RuntimeError("ChannelPredictor is not fitted yet")
        return predict_trace(self.net_, self.norm_in_, self.norm_out_, ga_new)


@dataclass(frozen=True)
class BranchResult:
    rates: KeyRateResult
    mse: McEstimate


@dataclass(frozen=True)
class PipelineResult:
    baseline: BranchResult
    nnbp: BranchResult


def _branch_rates(q_a, q_b, g_a, g_b) -> KeyRateResult:
    events = classify_events_two_sided(q_a, q_b, g_a, g_b)
    n = events.size
    n1 = int(np.count_nonzero(events == int(EventKind.EVENT1)))
    n2 = int(np.count_nonzero(events == int(EventKind.EVENT2)))
    effective = n1 + n2
    kdr = n2 / effective if effective else math.nan
    return KeyRateResult(
        p1=n1 / n, p2=n2 / n, p3=(n - effective) / n, kdr=kdr, esr=effective / n
    )


def classify_events_two_sided(q_a, q_b, g_a, g_b) -> np.ndarray:
    """Event classification when each party uses its own thresholds."""
    from .quantizer import quantize, QuantSymbol

    sa = quantize(q_a, g_a)
    sb = quantize(q_b, g_b)
    out = np.full(sa.shape, int(EventKind.EVENT3), dtype=np.int8)
    eff = (sa != int(QuantSymbol.DISCARD)) & (sb != int(QuantSymbol.DISCARD))
    out[eff & (sa == sb)] = int(EventKind.EVENT1)
    out[eff & (sa != sb)] = int(EventKind.EVENT2)
    return out


def simulate_and_predict(
    model: CorrelationModel,
    train_len: int = 50_000,
    eval_len: int = 10_000,
    cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    sample_interval_s: float = 0.010,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, ChannelPredictor]:
    """Train on one simulated trace, predict over an independent one.

    Returns (predictions, alice_centers, bob_centers, fitted predictor),
    all aligned to the block-center indices of the evaluation trace.
    """
    ss = np.random.SeedSequence(seed)
    rng_train, rng_eval = (np.random.default_rng(s) for s in ss.spawn(2))
    h_a_tr, h_b_tr = sample_trace(model, train_len, sample_interval_s, rng_train)
    predictor = ChannelPredictor(
        m=cfg.m, n_hidden=cfg.n_hidden, eta=cfg.eta,
        epsilon=cfg.epsilon, max_epochs=cfg.max_epochs, random_state=cfg.init_seed,
    ).fit(np.abs(h_a_tr), np.abs(h_b_tr))

    h_a_ev, h_b_ev = sample_trace(model, eval_len, sample_interval_s, rng_eval)
    g_a, g_b = np.abs(h_a_ev), np.abs(h_b_ev)
    pred, centers = predictor.predict_with_centers(g_a)
    return pred, g_a[centers], g_b[centers], predictor


def compare_quantization(
    pred: np.ndarray,
    ga_c: np.ndarray,
    gb_c: np.ndarray,
    model: CorrelationModel,
    delta: float = 0.1,
    q_mode: str = "empirical",
    convention: str = "pdf",
) -> PipelineResult:
    """Quantize baseline and prediction branches against the same Bob data."""
    if q_mode not in ("empirical", "analytic"):
        raise ValueError(f"unknown q_mode {q_mode!r}")
    if q_mode == "empirical":
        q_bob = empirical_quantizer(gb_c, delta)
        q_alice_raw = empirical_quantizer(ga_c, delta)
        q_alice_nn = empirical_quantizer(pred, delta)
    else:
        sigma_hat = math.sqrt(model.sigma_hat_sq)
        q_bob = make_quantizer(sigma_hat, delta, convention)
        q_alice_raw = q_bob
        q_alice_nn = empirical_quantizer(pred, delta)

    baseline = BranchResult(
        rates=_branch_rates(q_alice_raw, q_bob, ga_c, gb_c),
        mse=empirical_mse(ga_c, gb_c),
    )
    nnbp = BranchResult(
        rates=_branch_rates(q_alice_nn, q_bob, pred, gb_c),
        mse=empirical_mse(pred, gb_c),
    )
    return PipelineResult(baseline=baseline, nnbp=nnbp)


def nnbp_pipeline(
    model: CorrelationModel,
    train_len: int = 50_000,
    eval_len: int = 10_000,
    cfg: TrainConfig = TrainConfig(),
    delta: float = 0.1,
    q_mode: str = "empirical",
    seed: int = 0,
    sample_interval_s: float = 0.010,
    convention: str = "pdf",
) -> PipelineResult:
    """End-to-end comparison: baseline (g_a, g_b) vs (prediction, g_b).

    Both branches share Bob's data, the center indices and the
    quantizer-construction mode; only Alice's values differ.
    """
    pred, ga_c, gb_c, _ = simulate_and_predict(
        model, train_len, eval_len, cfg, seed, sample_interval_s
    )
    return compare_quantization(pred, ga_c, gb_c, model, delta, q_mode, convention)
