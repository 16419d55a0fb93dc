"""Deep bidirectional LSTM temporal classifier.

Pure numpy, double precision, one sequence at a time.  Every layer runs an
LSTM over the frames forwards and another over the frames backwards and
concatenates their outputs, so each frame's representation sees the whole
expression.  A final linear layer maps to per-frame class scores over
blank + symbols + relations.

The backward pass is exact backpropagation through time; the gradient
checks in the test suite compare it against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .srt import Relation

CHECKPOINT_VERSION = 1

RELATION_ORDER: tuple[str, ...] = tuple(r.value for r in Relation)


class NumericError(ArithmeticError):
    """Raised when a forward pass produces non-finite values."""


class CheckpointError(ValueError):
    """Raised when a checkpoint file cannot be loaded."""


@dataclass(frozen=True)
class ClassInventory:
    """Fixed class layout: blank 0, then symbols, then the seven relations."""

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbol labels")
        overlap = set(self.symbols) & set(RELATION_ORDER)
        if overlap:
            raise ValueError(f"symbol labels collide with relation names: {sorted(overlap)}")

    @classmethod
    def from_labels(cls, labels: list[str] | set[str]) -> "ClassInventory":
        return cls(symbols=tuple(sorted(set(labels))))

    @property
    def blank(self) -> int:
        return 0

    @property
    def num_classes(self) -> int:
        return 1 + len(self.symbols) + len(RELATION_ORDER)

    @property
    def symbol_indices(self) -> range:
        return range(1, 1 + len(self.symbols))

    @property
    def relation_indices(self) -> range:
        return range(1 + len(self.symbols), self.num_classes)

    def index(self, label: str) -> int:
        try:
            return 1 + self.symbols.index(label)
        except ValueError:
            pass
        try:
            return 1 + len(self.symbols) + RELATION_ORDER.index(label)
        except ValueError:
            raise KeyError(f"unknown label {label!r}") from None

    def label(self, index: int) -> str:
        if index == 0:
            return "<blank>"
        if index in self.symbol_indices:
            return self.symbols[index - 1]
        if index in self.relation_indices:
            return RELATION_ORDER[index - 1 - len(self.symbols)]
        raise IndexError(f"class index {index} out of range")

    def relation_index(self, rel: Relation) -> int:
        return 1 + len(self.symbols) + RELATION_ORDER.index(rel.value)


@dataclass(frozen=True)
class NetConfig:
    hidden_size: int
    num_layers: int
    input_size: int = 4
    epsilon: float = 0.02

    def to_json(self) -> dict:
        return {
            "hidden_size": self.hidden_size,
            "num_layers": self.num_layers,
            "input_size": self.input_size,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NetConfig":
        return cls(
            hidden_size=int(obj["hidden_size"]),
            num_layers=int(obj["num_layers"]),
            input_size=int(obj.get("input_size", 4)),
            epsilon=float(obj.get("epsilon", 0.02)),
        )


def _init_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    s = 1.0 / np.sqrt(cols)
    return rng.uniform(-s, s, size=(rows, cols))


def init_params(config: NetConfig, inventory: ClassInventory, seed: int) -> dict[str, np.ndarray]:
    """Uniform init scaled by fan-in; forget-gate biases start at 1."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    h = config.hidden_size
    in_size = config.input_size
    for layer in range(config.num_layers):
        for dirn in ("fw", "bw"):
            prefix = f"l{layer}.{dirn}"
            params[f"{prefix}.W"] = _init_matrix(rng, 4 * h, in_size)
            params[f"{prefix}.R"] = _init_matrix(rng, 4 * h, h)
            b = np.zeros(4 * h)
            b[h : 2 * h] = 1.0
            params[f"{prefix}.b"] = b
        in_size = 2 * h
    params["out.W"] = _init_matrix(rng, inventory.num_classes, in_size)
    params["out.b"] = np.zeros(inventory.num_classes)
    return params


def _lstm_forward(W: np.ndarray, R: np.ndarray, b: np.ndarray, x: np.ndarray):
    """One direction over the frames as given.  Gate order: i, f, o, g."""
    T = x.shape[0]
    H = R.shape[1]
    pre_in = x @ W.T + b
    i_g = np.empty((T, H))
    f_g = np.empty((T, H))
    o_g = np.empty((T, H))
    g_g = np.empty((T, H))
    c = np.empty((T, H))
    hs = np.empty((T, H))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    for t in range(T):
        p = pre_in[t] + h_prev @ R.T
        i_t = expit(p[:H])
        f_t = expit(p[H : 2 * H])
        o_t = expit(p[2 * H : 3 * H])
        g_t = np.tanh(p[3 * H :])
        c_t = f_t * c_prev + i_t * g_t
        h_t = o_t * np.tanh(c_t)
        i_g[t], f_g[t], o_g[t], g_g[t] = i_t, f_t, o_t, g_t
        c[t], hs[t] = c_t, h_t
        h_prev, c_prev = h_t, c_t
    cache = {"x": x, "i": i_g, "f": f_g, "o": o_g, "g": g_g, "c": c, "h": hs}
    return hs, cache


def _lstm_backward(W: np.ndarray, R: np.ndarray, cache: dict, dh_out: np.ndarray):
    """Exact BPTT for one direction.  Returns (dx, dW, dR, db)."""
    x, i_g, f_g, o_g, g_g, c = cache["x"], cache["i"], cache["f"], cache["o"], cache["g"], cache["c"]
    T, H = i_g.shape
    dpre = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        dh = dh_out[t] + dh_next
        tc = np.tanh(c[t])
        do = dh * tc
        dc = dh * o_g[t] * (1.0 - tc * tc) + dc_next
        c_prev = c[t - 1] if t > 0 else np.zeros(H)
        di = dc * g_g[t]
        df = dc * c_prev
        dg = dc * i_g[t]
        dc_next = dc * f_g[t]
        row = dpre[t]
        row[:H] = di * i_g[t] * (1.0 - i_g[t])
        row[H : 2 * H] = df * f_g[t] * (1.0 - f_g[t])
        row[2 * H : 3 * H] = do * o_g[t] * (1.0 - o_g[t])
        row[3 * H :] = dg * (1.0 - g_g[t] * g_g[t])
        dh_next = row @ R
    h_prev_mat = np.vstack([np.zeros((1, H)), cache["h"][:-1]])
    dW = dpre.T @ x
    dR = dpre.T @ h_prev_mat
    db = dpre.sum(axis=0)
    dx = dpre @ W
    return dx, dW, dR, db


class Network:
    """The stacked BLSTM plus output projection, with explicit gradients."""

    def __init__(self, config: NetConfig, inventory: ClassInventory, params: dict[str, np.ndarray]):
        self.config = config
        self.inventory = inventory
        self.params = params

    @classmethod
    def initialize(cls, config: NetConfig, inventory: ClassInventory, seed: int) -> "Network":
        return cls(config, inventory, init_params(config, inventory, seed))

    def forward(self, x: np.ndarray):
        """Frame features (T, input) to logits (T, K), with backprop cache."""
        if x.ndim != 2 or x.shape[1] != self.config.input_size:
            raise ValueError(f"expected (T, {self.config.input_size}) input, got {x.shape}")
        h = x
        caches = []
        for layer in range(self.config.num_layers):
            fw_h, fw_cache = _lstm_forward(*self._dir_params(layer, "fw"), h)
            rev = h[::-1]
            bw_h, bw_cache = _lstm_forward(*self._dir_params(layer, "bw"), rev)
            h = np.concatenate([fw_h, bw_h[::-1]], axis=1)
            if not np.all(np.isfinite(h)):
                bad = int(np.argwhere(~np.isfinite(h))[0][0])
                raise NumericError(f"layer {layer} produced non-finite values at frame {bad}")
            caches.append((fw_cache, bw_cache))
        logits = h @ self.params["out.W"].T + self.params["out.b"]
        if not np.all(np.isfinite(logits)):
            bad = int(np.argwhere(~np.isfinite(logits))[0][0])
            raise NumericError(f"output layer produced non-finite values at frame {bad}")
        return logits, {"caches": caches, "top": h}

    def backward(self, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        grads["out.W"] = dlogits.T @ cache["top"]
        grads["out.b"] = dlogits.sum(axis=0)
        dh = dlogits @ self.params["out.W"]
        H = self.config.hidden_size
        for layer in range(self.config.num_layers - 1, -1, -1):
            fw_cache, bw_cache = cache["caches"][layer]
            W_f, R_f, _ = self._dir_params(layer, "fw")
            W_b, R_b, _ = self._dir_params(layer, "bw")
            dx_f, dW_f, dR_f, db_f = _lstm_backward(W_f, R_f, fw_cache, dh[:, :H])
            dx_b, dW_b, dR_b, db_b = _lstm_backward(W_b, R_b, bw_cache, dh[::-1, H:])
            grads[f"l{layer}.fw.W"] = dW_f
            grads[f"l{layer}.fw.R"] = dR_f
            grads[f"l{layer}.fw.b"] = db_f
            grads[f"l{layer}.bw.W"] = dW_b
            grads[f"l{layer}.bw.R"] = dR_b
            grads[f"l{layer}.bw.b"] = db_b
            dh = dx_f + dx_b[::-1]
        return grads

    def posteriors(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x)
        return softmax(logits)

    def _dir_params(self, layer: int, dirn: str):
        p = self.params
        return p[f"l{layer}.{dirn}.W"], p[f"l{layer}.{dirn}.R"], p[f"l{layer}.{dirn}.b"]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class MomentumSGD:
    """Classical momentum: v = mu*v - lr*g, applied in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, momentum: float, clip_norm: float | None = None):
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> bool:
        """Apply one update.  Returns False (no change) on non-finite grads."""
        for g in grads.values():
            if not np.all(np.isfinite(g)):
                return False
        scale = 1.0
        if self.clip_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        for k, g in grads.items():
            v = self.velocity[k]
            v *= self.momentum
            v -= self.lr * scale * g
            params[k] += v
        return True


def save_checkpoint(path: str | Path, net: Network) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": net.config.to_json(),
        "inventory": list(net.inventory.symbols),
        "params": {k: v.ravel().tolist() for k, v in sorted(net.params.items())},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_checkpoint(path: str | Path) -> Network:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint: {e}") from e
    if not isinstance(doc, dict) or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version: {doc.get('version')!r}")
    try:
        config = NetConfig.from_json(doc["config"])
        inventory = ClassInventory(symbols=tuple(doc["inventory"]))
        flat = doc["params"]
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed checkpoint: {e}") from e
    expected = init_params(config, inventory, seed=0)
    params: dict[str, np.ndarray] = {}
    for name, ref in expected.items():
        if name not in flat:
            raise CheckpointError(f"checkpoint missing parameter {name!r}")
        arr = np.asarray(flat[name], dtype=np.float64)
        if arr.size != ref.size:
            raise CheckpointError(f"parameter {name!r} has {arr.size} values, expected {ref.size}")
        params[name] = arr.reshape(ref.shape)
    unknown = set(flat) - set(expected)
    if unknown:
        raise CheckpointError(f"checkpoint has unknown parameters: {sorted(unknown)}")
    return Network(config, inventory, params)
