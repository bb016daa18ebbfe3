"""Neural lower bound on mutual information (Donsker-Varadhan form).

A small fully connected critic scores concatenated (x, y) label vectors;
the bound is mean_joint[F] - log mean_marginal[exp F], with the marginal
batch built by permuting y within the joint batch. Forward, value, and
reverse-mode gradients are implemented directly in NumPy (double
precision throughout) so gradient checks are exact up to roundoff.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .errors import InvalidArgumentError, NonFiniteError

DEFAULT_HIDDEN = (128, 128)


@dataclasses.dataclass
class StatisticsNetwork:
    """Feed-forward critic: 2C inputs -> hidden ReLU layers -> scalar.

    The topology is fixed after construction; weights[l] has shape
    (n_out, n_in) and the output layer is linear.
    """

    weights: list
    biases: list
    num_classes: int

    @classmethod
    def create(cls, num_classes: int, hidden=DEFAULT_HIDDEN, rng=None) -> "StatisticsNetwork":
        """He-initialized critic over concatenated (x, y) class vectors."""
        if num_classes < 1:
            raise InvalidArgumentError("num_classes must be at least 1")
        rng = np.random.default_rng(rng)
        sizes = [2 * num_classes, *hidden, 1]
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / n_in)
            weights.append(rng.normal(0.0, scale, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(weights=weights, biases=biases, num_classes=num_classes)

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise InvalidArgumentError("flat parameter vector has the wrong length")
        pos = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[pos:pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.biases[i] = flat[pos:pos + b.size].copy()
            pos += b.size

    def forward_batch(self, xy: np.ndarray):
        """Scores for stacked (x||y) rows, plus the activation cache."""
        a = np.asarray(xy, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != self.weights[0].shape[1]:
            raise InvalidArgumentError("input width must match the critic input layer")
        cache = [a]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = np.maximum(z, 0.0) if i < n_layers - 1 else z
            cache.append(a)
        return a[:, 0], cache

    def backward_batch(self, cache, dscore: np.ndarray):
        """Gradients of sum_i dscore[i] * score[i] w.r.t. params and inputs."""
        n_layers = len(self.weights)
        grads_w = [None] * n_layers
        grads_b = [None] * n_layers
        da = dscore[:, None]
        for i in range(n_layers - 1, -1, -1):
            if i < n_layers - 1:
                da = da * (cache[i + 1] > 0.0)
            grads_w[i] = da.T @ cache[i]
            grads_b[i] = da.sum(axis=0)
            da = da @ self.weights[i]
        flat = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(grads_w, grads_b)])
        return flat, da


@dataclasses.dataclass(frozen=True)
class MiEstimate:
    """DV bound value (nats) and its two terms."""

    value: float
    joint_mean: float
    log_marginal_mean_exp: float
    batch_size: int


@dataclasses.dataclass
class AdamState:
    """Adaptive-moment optimizer state for one parameter vector."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = None
    v: np.ndarray = None
    step_count: int = 0

    @classmethod
    def for_size(cls, n: int, lr: float) -> "AdamState":
        if lr < 0:
            raise InvalidArgumentError("learning rate must be nonnegative")
        return cls(lr=lr, m=np.zeros(n), v=np.zeros(n))

    def direction(self, grad: np.ndarray) -> np.ndarray:
        """Bias-corrected ascent step lr * m_hat / (sqrt(v_hat) + eps)."""
        grad = np.asarray(grad, dtype=np.float64)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("non-finite gradient; aborting the iteration")
        self.step_count += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.step_count)
        v_hat = self.v / (1.0 - self.beta2 ** self.step_count)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def critic_forward(net: StatisticsNetwork, x: np.ndarray, y: np.ndarray) -> float:
    """Score a single (x, y) pair of class vectors."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != (net.num_classes,) or y.shape != (net.num_classes,):
        raise InvalidArgumentError("x and y must each have num_classes components")
    scores, _ = net.forward_batch(np.concatenate([x, y])[None, :])
    return float(scores[0])


def _check_batches(net, x_joint, y_joint, x_marg, y_marg):
    xj = np.asarray(x_joint, dtype=np.float64)
    yj = np.asarray(y_joint, dtype=np.float64)
    xm = np.asarray(x_marg, dtype=np.float64)
    ym = np.asarray(y_marg, dtype=np.float64)
    c = net.num_classes
    for arr in (xj, yj, xm, ym):
        if arr.ndim != 2 or arr.shape[1] != c:
            raise InvalidArgumentError("batches must be (N, num_classes) arrays")
    if xj.shape[0] != yj.shape[0] or xm.shape[0] != ym.shape[0]:
        raise InvalidArgumentError("x and y batch lengths must match")
    if xj.shape[0] < 2 or xm.shape[0] < 2:
        raise InvalidArgumentError("batch size must be at least 2 (permutation degenerate)")
    return xj, yj, xm, ym


def _dv_forward(net, xj, yj, xm, ym):
    # one stacked forward over joint rows then marginal rows
    nj, nm = xj.shape[0], xm.shape[0]
    c = net.num_classes
    xy = np.empty((nj + nm, 2 * c))
    xy[:nj, :c] = xj
    xy[:nj, c:] = yj
    xy[nj:, :c] = xm
    xy[nj:, c:] = ym
    scores, cache = net.forward_batch(xy)
    sj, sm = scores[:nj], scores[nj:]
    smax = float(sm.max())
    log_mean_exp = smax + np.log(np.mean(np.exp(sm - smax)))
    est = MiEstimate(
        value=float(sj.mean() - log_mean_exp),
        joint_mean=float(sj.mean()),
        log_marginal_mean_exp=float(log_mean_exp),
        batch_size=int(nj),
    )
    return est, sj, sm, cache


def dv_bound(net: StatisticsNetwork, x_joint, y_joint, x_marg, y_marg) -> MiEstimate:
    """Donsker-Varadhan lower-bound estimate from joint and marginal batches.

    The marginal batch is expected to be the joint batch with y permuted;
    the log term uses log-sum-exp stabilization.
    """
    xj, yj, xm, ym = _check_batches(net, x_joint, y_joint, x_marg, y_marg)
    est, *_ = _dv_forward(net, xj, yj, xm, ym)
    return est


def dv_bound_and_pullback(net: StatisticsNetwork, x_joint, y_joint, x_marg, y_marg):
    """DV value plus gradients w.r.t. parameters and the joint y rows.

    Parameter gradients cover both terms; input gradients are returned for
    the joint batch's y only (the marginal batch is treated as detached,
    so pose gradients flow through paired samples alone).
    """
    xj, yj, xm, ym = _check_batches(net, x_joint, y_joint, x_marg, y_marg)
    est, sj, sm, cache = _dv_forward(net, xj, yj, xm, ym)
    nj = sj.shape[0]
    dscore = np.empty(nj + sm.shape[0])
    dscore[:nj] = 1.0 / nj
    w = np.exp(sm - sm.max())
    dscore[nj:] = -w / w.sum()
    grad_theta, dinput = net.backward_batch(cache, dscore)
    c = net.num_classes
    return est, grad_theta, dinput[:nj, c:]


def dv_pullback(net: StatisticsNetwork, x_joint, y_joint, x_marg, y_marg):
    """Gradients of the DV value: (d/d params, d/d joint y rows)."""
    _, grad_theta, grad_yj = dv_bound_and_pullback(net, x_joint, y_joint, x_marg, y_marg)
    return grad_theta, grad_yj


def ascent_step(net: StatisticsNetwork, opt: AdamState, grad_theta: np.ndarray) -> None:
    """One maximization step on the critic parameters, in place."""
    grad_theta = np.asarray(grad_theta, dtype=np.float64)
    if grad_theta.shape != (net.n_params,):
        raise InvalidArgumentError("gradient length must match the parameter count")
    net.set_flat(net.get_flat() + opt.direction(grad_theta))


def save_network(net: StatisticsNetwork, path, seed=None) -> None:
    """Write a one-line JSON header followed by the raw float64 parameters."""
    header = {
        "num_classes": net.num_classes,
        "layer_sizes": net.layer_sizes,
        "count": net.n_params,
        "dtype": "<f8",
        "seed": seed,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        fh.write(net.get_flat().astype("<f8").tobytes())


def load_network(path) -> StatisticsNetwork:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    sizes = header["layer_sizes"]
    if flat.shape != (header["count"],):
        raise InvalidArgumentError("parameter payload length does not match header")
    net = StatisticsNetwork.create(header["num_classes"], hidden=tuple(sizes[1:-1]), rng=0)
    net.set_flat(np.asarray(flat, dtype=np.float64))
    return net
