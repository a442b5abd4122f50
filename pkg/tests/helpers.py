"""Random coefficient sets and bounded fields shared by several test modules."""

import numpy as np

from chernoffpde.fields import CoefficientSet, ScalarField


def random_coeffs(rng, d):
    def f(kind):
        amp, k, p = rng.uniform(0.1, 1.5), rng.uniform(0.2, 2), rng.uniform(-2, 2)
        j = rng.integers(1, d + 1)
        return {
            "sin": f"{amp!r}*sin({k!r}*x{j} + {p!r})",
            "tanh": f"{amp!r}*tanh({k!r}*x{j})",
            "bump": f"{amp!r}*exp(-{k!r}*(x{j} - {p!r})^2)",
        }[kind], amp

    kinds = ["sin", "tanh", "bump"]
    a = [f(rng.choice(kinds)) for _ in range(d)]
    b = [f(rng.choice(kinds)) for _ in range(d)]
    c_text, c_amp = f(rng.choice(kinds))
    sign = rng.choice([-1, 1])
    return CoefficientSet(
        d,
        tuple(ScalarField.parse(s, d, bd) for s, bd in a),
        tuple(ScalarField.parse(s, d, bd) for s, bd in b),
        ScalarField.parse(f"{sign}*({c_text})", d, c_amp),
    )


def random_field(rng, d):
    terms, bound = [], 0.0
    for _ in range(rng.integers(1, 4)):
        amp = rng.uniform(-2, 2)
        k = rng.uniform(0.1, 3)
        j = rng.integers(1, d + 1)
        fn = rng.choice(["sin", "cos", "tanh"])
        terms.append(f"({amp!r})*{fn}({k!r}*x{j})")
        bound += abs(amp)
    return ScalarField.parse(" + ".join(terms), d, bound)
