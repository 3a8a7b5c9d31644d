"""Hand-trace oracles for the adaptive optimizers on f(x) = x^2.

Plain-float recurrences, written against the update equations directly and
kept free of any package import so the optimizer implementations can be
checked against them step by step.
"""

import math


def hd_trace(x0: float, alpha0: float, beta: float, steps: int):
    """Hypergradient descent on x^2: grad 2x; from the second step
    alpha += beta * g_t * g_{t-1}; then x -= alpha * g_t."""
    x, alpha, g_prev = x0, alpha0, None
    trace = []
    for _ in range(steps):
        g = 2.0 * x
        if g_prev is not None:
            alpha = alpha + beta * g * g_prev
        x = x - alpha * g
        g_prev = g
        trace.append((x, alpha))
    return trace


def dsa_trace(x0: float, alpha0: float, beta: float, gamma: float, steps: int,
              sign_step: bool = True, eps: float = 1e-12):
    """Detection steps on x^2.

    Each step: rate = gamma*sigmoid(alpha); trial x~ = x - rate*d with the
    same direction d the commit will use (d = g/(|g|+eps) under sign steps,
    else d = g); alpha moves by beta*sign(g(x~)*g(x)) with the eps guard;
    the commit uses the post-update rate.
    """
    def sigmoid(a):
        return 1.0 / (1.0 + math.exp(-a))

    x, alpha = x0, alpha0
    trace = []
    for _ in range(steps):
        g = 2.0 * x
        d = g / (abs(g) + eps) if sign_step else g
        rate = gamma * sigmoid(alpha)
        x_trial = x - rate * d
        g_trial = 2.0 * x_trial
        p = g_trial * g
        alpha = alpha + beta * (p / (abs(p) + eps))
        rate_after = gamma * sigmoid(alpha)
        x = x - rate_after * d
        trace.append((x, alpha, rate_after))
    return trace
