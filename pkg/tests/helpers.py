"""Shared test utilities."""

import numpy as np

import shapeforge.grad as G


def fd_weight_check(build_loss, named_params, n_weights, rng, h=1e-3,
                    rtol=1e-3, atol=1e-3):
    """Check d(loss)/d(weight) against central differences on randomly chosen
    scalar weights. `build_loss()` must be a deterministic function of the
    current parameter values."""
    loss = build_loss()
    params = [p for _, p in named_params]
    grads = G.gradients(loss, params)
    flat = [(pi, j) for pi, p in enumerate(params) for j in range(p.data.size)]
    sel = rng.choice(len(flat), size=min(n_weights, len(flat)), replace=False)
    checked = 0
    for s in sel:
        pi, j = flat[s]
        p = params[pi]
        orig = p.data.reshape(-1)[j]
        p.data.reshape(-1)[j] = orig + h
        fp = build_loss().item()
        p.data.reshape(-1)[j] = orig - h
        fm = build_loss().item()
        p.data.reshape(-1)[j] = orig
        ref = (fp - fm) / (2 * h)
        got = grads[pi].reshape(-1)[j]
        if abs(ref) < atol:
            assert abs(got - ref) < atol, \
                f"{named_params[pi][0]}[{j}]: {got} vs fd {ref}"
        else:
            rel = abs(got - ref) / abs(ref)
            assert rel <= rtol or abs(got - ref) < atol, \
                f"{named_params[pi][0]}[{j}]: {got} vs fd {ref} (rel {rel:.2e})"
        checked += 1
    return checked
