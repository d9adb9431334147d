"""Central finite-difference check of Network.loss_and_grads.

ReLU makes the loss piecewise smooth. When a pre-activation sits within
``eps`` of zero the central difference straddles a kink and stops being a
derivative estimate. Such coordinates are recognised by their estimate
moving when ``eps`` shrinks; the suite then redraws the batch for that
configuration instead of reporting a bogus mismatch. A wrong analytic
gradient disagrees at every step size and is still caught.
"""

import numpy as np

from curiosym.model import EncoderConfig, Network

TOLERANCE = 1e-4
EPS = 1e-5


def rel_error(analytic, numeric) -> float:
    """Worst absolute gap over one array, scaled by that array's largest entry."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def jitter_biases(net: Network, rng: np.random.Generator, scale: float = 0.05) -> None:
    """Move zero-initialised biases off zero, where whole rows would sit on a kink."""
    for name, w in net.params.items():
        if name.endswith(".b") or name.endswith(".beta"):
            w += rng.normal(0, scale, w.shape)


def _central(f, flat, i, eps):
    old = flat[i]
    flat[i] = old + eps
    up = f()
    flat[i] = old - eps
    down = f()
    flat[i] = old
    return (up - down) / (2 * eps)


def fd_check(net: Network, O, A, E, eps: float = EPS, seed: int = 7):
    """Per-array relative errors and the names of arrays that hit a kink."""

    def f():
        return net.loss_and_grads(O, A, E, np.random.default_rng(seed))[0]

    _, grads, _ = net.loss_and_grads(O, A, E, np.random.default_rng(seed))
    errors, kinked = {}, set()
    for name, w in net.params.items():
        flat = w.reshape(-1)
        num = np.array([_central(f, flat, i, eps) for i in range(flat.size)])
        ana = grads.get(name, np.zeros_like(w)).reshape(-1)
        err = rel_error(ana, num)
        if err >= TOLERANCE:
            scale = max(np.max(np.abs(ana)), np.max(np.abs(num)), 1e-12)
            for i in np.flatnonzero(np.abs(ana - num) >= TOLERANCE * scale):
                if abs(_central(f, flat, i, eps / 10) - num[i]) >= TOLERANCE * scale:
                    kinked.add(name)
        errors[name] = err
    return errors, kinked


def fd_errors(net: Network, O, A, E, eps: float = EPS, seed: int = 7) -> dict[str, float]:
    return fd_check(net, O, A, E, eps, seed)[0]


def random_config(rng: np.random.Generator) -> tuple[EncoderConfig, int]:
    """A width-8 architecture with randomised depth, code sizes, head and regularisers."""
    cfg = EncoderConfig(
        hidden_width=8,
        hidden_layers=int(rng.integers(2, 5)),
        object_bits=int(rng.integers(1, 4)),
        action_bits=int(rng.integers(1, 5)),
        dropout_rate=float(rng.choice([0.0, 0.2])),
        temperature=float(rng.uniform(0.2, 1.5)),
        loss_coefficient=float(rng.choice([0.01, 1.0])),
        head=str(rng.choice(["distribution", "point"])),
        effect_scale=float(rng.choice([1.0, 10.0])),
    )
    return cfg, int(rng.integers(2, 13))


def random_batch(rng: np.random.Generator, n: int):
    O = np.column_stack([rng.uniform(0.02, 0.08, (n, 3)), rng.integers(0, 2, n)])
    A = rng.uniform(-0.05, 0.05, (n, 12))
    A[:, 3::4] = rng.uniform(0, 1, (n, 3))
    E = rng.normal(0, 0.05, (n, 3))
    return O, A, E


def run_suite(count: int = 20, seed: int = 2024, max_redraws: int = 5) -> list[dict]:
    """Check ``count`` random configurations; one summary record each."""
    rng = np.random.default_rng(seed)
    results = []
    for k in range(count):
        cfg, n = random_config(rng)
        net = Network(cfg, seed=k)
        jitter_biases(net, rng)
        for redraw in range(max_redraws + 1):
            O, A, E = random_batch(rng, n)
            errors, kinked = fd_check(net, O, A, E)
            if not kinked:
                break
        results.append({"config": cfg, "batch": n, "worst": max(errors.values()), "redraws": redraw, "kinked": sorted(kinked)})
    return results
