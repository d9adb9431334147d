"""Effect-prediction encoder-decoder with a hand-written backward pass.

Object encoder:  BN -> (Linear, ReLU, Dropout) x (L-1) -> Linear -> tanh
Action encoder:  same layout, 12 inputs
Decoder:         LayerNorm -> (Linear, ReLU, Dropout) x L -> Linear
                 distribution head: 6 outputs (mean, log-variance per axis)
                 point head: 3 outputs
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..world import ACTION_DIM, EFFECT_DIM, OBJECT_DIM
from . import losses

HEADS = ("distribution", "point")


class InputError(ValueError):
    pass


class ModeError(RuntimeError):
    """Operation not available for this network's head."""


@dataclass(frozen=True)
class EncoderConfig:
    hidden_width: int = 128
    hidden_layers: int = 4
    object_bits: int = 2
    action_bits: int = 3
    dropout_rate: float = 0.1
    temperature: float = 0.5
    loss_coefficient: float = 0.01
    head: str = "distribution"
    straight_through: bool = False
    log_var_clamp: float = 10.0
    effect_scale: float = 10.0
    bn_momentum: float = 0.1
    norm_eps: float = 1e-5

    def __post_init__(self):
        if self.object_bits < 1 or self.action_bits < 1:
            raise ValueError("code widths must be at least 1")
        if self.hidden_width < 1 or self.hidden_layers < 2:
            raise ValueError("need hidden_width >= 1 and hidden_layers >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.temperature <= 0 or self.loss_coefficient <= 0:
            raise ValueError("temperature and loss_coefficient must be positive")
        if self.effect_scale <= 0:
            raise ValueError("effect_scale must be positive")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")

    def to_dict(self) -> dict:
        return asdict(self)


def _batchnorm_fwd(x, gamma, beta, eps):
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv
    return gamma * xhat + beta, (xhat, inv, mean, var)


def _batchnorm_bwd(dy, gamma, cache):
    xhat, inv, _, _ = cache
    n = dy.shape[0]
    dxhat = dy * gamma
    dx = inv / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, (dy * xhat).sum(axis=0), dy.sum(axis=0)


def _layernorm_fwd(x, gamma, beta, eps):
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv
    return gamma * xhat + beta, (xhat, inv)


def _layernorm_bwd(dy, gamma, cache):
    xhat, inv = cache
    d = dy.shape[1]
    dxhat = dy * gamma
    dx = inv / d * (
        d * dxhat - dxhat.sum(axis=1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
    )
    return dx, (dy * xhat).sum(axis=0), dy.sum(axis=0)


class Network:
    """Parameters, running statistics and the forward/backward passes."""

    def __init__(self, config: EncoderConfig | None = None, seed: int = 0):
        self.config = config or EncoderConfig()
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.step = 0
        rng = np.random.default_rng(seed)
        c = self.config
        self._init_encoder("obj", OBJECT_DIM, c.object_bits, rng)
        self._init_encoder("act", ACTION_DIM, c.action_bits, rng)
        code = c.object_bits + c.action_bits
        self.params["dec.ln.gamma"] = np.ones(code)
        self.params["dec.ln.beta"] = np.zeros(code)
        sizes = [code] + [c.hidden_width] * c.hidden_layers + [self.output_dim]
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self._init_linear(f"dec.fc{i}", fan_in, fan_out, rng)

    # -- construction -------------------------------------------------------

    @property
    def head(self) -> str:
        return self.config.head

    @property
    def output_dim(self) -> int:
        return 2 * EFFECT_DIM if self.head == "distribution" else EFFECT_DIM

    def _init_linear(self, name, fan_in, fan_out, rng):
        bound = 1.0 / np.sqrt(fan_in)
        self.params[f"{name}.W"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        self.params[f"{name}.b"] = np.zeros(fan_out)

    def _init_encoder(self, prefix, n_in, n_out, rng):
        c = self.config
        self.params[f"{prefix}.bn.gamma"] = np.ones(n_in)
        self.params[f"{prefix}.bn.beta"] = np.zeros(n_in)
        self.buffers[f"{prefix}.bn.mean"] = np.zeros(n_in)
        self.buffers[f"{prefix}.bn.var"] = np.ones(n_in)
        sizes = [n_in] + [c.hidden_width] * (c.hidden_layers - 1) + [n_out]
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self._init_linear(f"{prefix}.fc{i}", fan_in, fan_out, rng)

    def copy(self) -> "Network":
        other = Network.__new__(Network)
        other.config = self.config
        other.params = {k: v.copy() for k, v in self.params.items()}
        other.buffers = {k: v.copy() for k, v in self.buffers.items()}
        other.step = self.step
        return other

    # -- forward ------------------------------------------------------------

    def _mlp_fwd(self, prefix, h, n_layers, train, rng, caches):
        p = self.params
        keep = 1.0 - self.config.dropout_rate
        for i in range(n_layers):
            pre = h @ p[f"{prefix}.fc{i}.W"] + p[f"{prefix}.fc{i}.b"]
            caches.append(h)
            h = np.maximum(pre, 0.0)
            mask = None
            if train and self.config.dropout_rate > 0:
                mask = (rng.random(h.shape) < keep) / keep
                h = h * mask
            caches.append((pre, mask))
        return h

    def _mlp_bwd(self, prefix, dh, n_layers, caches, grads):
        p = self.params
        for i in reversed(range(n_layers)):
            pre, mask = caches.pop()
            h_in = caches.pop()
            if mask is not None:
                dh = dh * mask
            dpre = dh * (pre > 0)
            grads[f"{prefix}.fc{i}.W"] = h_in.T @ dpre
            grads[f"{prefix}.fc{i}.b"] = dpre.sum(axis=0)
            dh = dpre @ p[f"{prefix}.fc{i}.W"].T
        return dh

    def _encode(self, prefix, x, train, rng, cache=None):
        p = self.params
        c = self.config
        if train:
            h, bn_cache = _batchnorm_fwd(x, p[f"{prefix}.bn.gamma"], p[f"{prefix}.bn.beta"], c.norm_eps)
        else:
            inv = 1.0 / np.sqrt(self.buffers[f"{prefix}.bn.var"] + c.norm_eps)
            h = (x - self.buffers[f"{prefix}.bn.mean"]) * inv * p[f"{prefix}.bn.gamma"] + p[f"{prefix}.bn.beta"]
            bn_cache = None
        layers = []
        h = self._mlp_fwd(prefix, h, c.hidden_layers - 1, train, rng, layers)
        last = c.hidden_layers - 1
        z = np.tanh(h @ p[f"{prefix}.fc{last}.W"] + p[f"{prefix}.fc{last}.b"])
        if cache is not None:
            cache[prefix] = (bn_cache, layers, h, z)
        return z

    def _encode_bwd(self, prefix, dz, cache, grads):
        c = self.config
        bn_cache, layers, h_last, z = cache[prefix]
        last = c.hidden_layers - 1
        dpre = dz * (1.0 - z * z)
        grads[f"{prefix}.fc{last}.W"] = h_last.T @ dpre
        grads[f"{prefix}.fc{last}.b"] = dpre.sum(axis=0)
        dh = dpre @ self.params[f"{prefix}.fc{last}.W"].T
        dh = self._mlp_bwd(prefix, dh, last, layers, grads)
        _, dg, db = _batchnorm_bwd(dh, self.params[f"{prefix}.bn.gamma"], bn_cache)
        grads[f"{prefix}.bn.gamma"] = dg
        grads[f"{prefix}.bn.beta"] = db

    def _decode(self, z, train, rng, cache=None):
        p = self.params
        c = self.config
        h, ln_cache = _layernorm_fwd(z, p["dec.ln.gamma"], p["dec.ln.beta"], c.norm_eps)
        layers = []
        h = self._mlp_fwd("dec", h, c.hidden_layers, train, rng, layers)
        last = c.hidden_layers
        out = h @ p[f"dec.fc{last}.W"] + p[f"dec.fc{last}.b"]
        if cache is not None:
            cache["dec"] = (ln_cache, layers, h)
        return out

    def _decode_bwd(self, dout, cache, grads):
        c = self.config
        ln_cache, layers, h_last = cache["dec"]
        last = c.hidden_layers
        grads[f"dec.fc{last}.W"] = h_last.T @ dout
        grads[f"dec.fc{last}.b"] = dout.sum(axis=0)
        dh = dout @ self.params[f"dec.fc{last}.W"].T
        dh = self._mlp_bwd("dec", dh, last, layers, grads)
        dz, dg, db = _layernorm_bwd(dh, self.params["dec.ln.gamma"], ln_cache)
        grads["dec.ln.gamma"] = dg
        grads["dec.ln.beta"] = db
        return dz

    def _split_head(self, out):
        # Network units are effect_scale x meters; convert back to meters.
        k = self.config.effect_scale
        if self.head == "point":
            return out / k, None
        lim = self.config.log_var_clamp
        return out[:, :EFFECT_DIM] / k, np.clip(out[:, EFFECT_DIM:], -lim, lim) - 2.0 * np.log(k)

    @staticmethod
    def _check(x, width, what):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != width:
            raise InputError(f"{what} must have {width} columns, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InputError(f"{what} contains non-finite values")
        return x

    # -- eval-mode public API ----------------------------------------------

    def encode_objects(self, objects) -> np.ndarray:
        return self._encode("obj", self._check(objects, OBJECT_DIM, "object features"), False, None)

    def encode_actions(self, actions) -> np.ndarray:
        return self._encode("act", self._check(actions, ACTION_DIM, "actions"), False, None)

    def decoder_input(self, z_o, z_a) -> np.ndarray:
        z_o = np.atleast_2d(z_o)
        z_a = np.atleast_2d(z_a)
        if self.config.straight_through:
            z_o = (z_o > 0).astype(float)
            z_a = (z_a > 0).astype(float)
        if z_o.shape[0] == 1 and z_a.shape[0] > 1:
            z_o = np.broadcast_to(z_o, (z_a.shape[0], z_o.shape[1]))
        return np.concatenate([z_o, z_a], axis=1)

    def decode(self, z_o, z_a):
        """Eval-mode decoder; returns ``(mu, log_var)`` or ``(prediction, None)``."""
        return self._split_head(self._decode(self.decoder_input(z_o, z_a), False, None))

    def predict(self, objects, actions):
        """Eval-mode prediction for paired (or broadcast single-object) rows."""
        return self.decode(self.encode_objects(objects), self.encode_actions(actions))

    def predict_point(self, objects, actions) -> np.ndarray:
        """Direct effect prediction of a point-head model."""
        if self.head != "point":
            raise ModeError("predict_point needs a point-head network")
        return self.predict(objects, actions)[0]

    def action_input_grad(self, actions, d_code_fn):
        """Eval-mode action codes and the gradient of a code-space objective w.r.t. the actions.

        ``d_code_fn(z)`` must return ``(value, d_value/dz)``; parameters are
        only read. Returns ``(z, value, d_value/d_actions)``.
        """
        p = self.params
        c = self.config
        A = self._check(actions, ACTION_DIM, "actions")
        inv = 1.0 / np.sqrt(self.buffers["act.bn.var"] + c.norm_eps)
        scale = inv * p["act.bn.gamma"]
        h = (A - self.buffers["act.bn.mean"]) * scale + p["act.bn.beta"]
        pres = []
        for i in range(c.hidden_layers - 1):
            pre = h @ p[f"act.fc{i}.W"] + p[f"act.fc{i}.b"]
            pres.append(pre)
            h = np.maximum(pre, 0.0)
        last = c.hidden_layers - 1
        z = np.tanh(h @ p[f"act.fc{last}.W"] + p[f"act.fc{last}.b"])
        value, dz = d_code_fn(z)
        dh = (dz * (1.0 - z * z)) @ p[f"act.fc{last}.W"].T
        for i in reversed(range(c.hidden_layers - 1)):
            dh = (dh * (pres[i] > 0)) @ p[f"act.fc{i}.W"].T
        return z, value, dh * scale

    # -- training ------------------------------------------------------------

    def loss_and_grads(self, objects, actions, effects, rng: np.random.Generator | None = None):
        """Train-mode loss and exact gradients for one batch.

        Running batch-norm statistics are returned in ``info['running']`` but
        not applied; see :meth:`apply_running_stats`.
        """
        c = self.config
        O = self._check(objects, OBJECT_DIM, "object features")
        A = self._check(actions, ACTION_DIM, "actions")
        E = self._check(effects, EFFECT_DIM, "effects") * c.effect_scale
        if rng is None:
            rng = np.random.default_rng(0)
        cache: dict = {}
        z_o = self._encode("obj", O, True, rng, cache)
        z_a = self._encode("act", A, True, rng, cache)
        z = np.concatenate([z_o, z_a], axis=1)
        dec_in = z
        if c.straight_through:
            dec_in = (z > 0).astype(float)
        out = self._decode(dec_in, True, rng, cache)

        grads: dict[str, np.ndarray] = {}
        if self.head == "distribution":
            mu = out[:, :EFFECT_DIM]
            raw_lv = out[:, EFFECT_DIM:]
            lv = np.clip(raw_lv, -c.log_var_clamp, c.log_var_clamp)
            fit, d_mu, d_lv = losses.nll_batch_grad(mu, lv, E)
            d_lv = d_lv * (np.abs(raw_lv) < c.log_var_clamp)
            dout = np.concatenate([d_mu, d_lv], axis=1)
        else:
            fit, dout = losses.mse_batch_grad(out, E)

        if z.shape[0] >= 2:
            contrast, dz_contrast = losses.nt_xent_grad(z, c.temperature)
        else:
            contrast, dz_contrast = 0.0, np.zeros_like(z)

        lam = c.loss_coefficient
        total = lam * (fit + contrast)
        dz = self._decode_bwd(lam * dout, cache, grads) + lam * dz_contrast
        self._encode_bwd("act", dz[:, c.object_bits :], cache, grads)
        self._encode_bwd("obj", dz[:, : c.object_bits], cache, grads)

        running = {}
        m = c.bn_momentum
        n = O.shape[0]
        for prefix in ("obj", "act"):
            bn_cache = cache[prefix][0]
            mean, var = bn_cache[2], bn_cache[3]
            unbiased = var * n / (n - 1) if n > 1 else var
            running[f"{prefix}.bn.mean"] = (1 - m) * self.buffers[f"{prefix}.bn.mean"] + m * mean
            running[f"{prefix}.bn.var"] = (1 - m) * self.buffers[f"{prefix}.bn.var"] + m * unbiased
        info = {"fit": fit, "contrast": contrast, "running": running}
        return total, grads, info

    def apply_running_stats(self, running: dict[str, np.ndarray]) -> None:
        for k, v in running.items():
            self.buffers[k] = v

    def loss(self, objects, actions, effects, rng=None) -> float:
        return self.loss_and_grads(objects, actions, effects, rng)[0]

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))
