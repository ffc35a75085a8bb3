import numpy as np
import pytest

from rectinit.model import load_spec


def central_diff(f, x, step=1e-5):
    """Numerical gradient of scalar ``f`` at array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f()
        flat[i] = orig - step
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def vgg_b():
    return load_spec("vgg-b")


def relu_stack_text(kind, widths, kernels, channels):
    """Spec text of a rectifier stack with ReLU after every weighted layer.

    ``kind`` is ``"conv"`` (2x2 spatial, same padding, kernel sizes from
    ``kernels``) or ``"fc"``; ``widths`` are the output widths in order.
    """
    if kind == "conv":
        lines = [f"input {channels}x2x2"]
        for k, d in zip(kernels, widths):
            lines += [f"conv {k}x{k} {d} pad same", "act relu"]
        lines.append(f"softmax {widths[-1] * 4}")
    else:
        lines = [f"input {channels}x1x1"]
        for d in widths:
            lines += [f"fc {d}", "act relu"]
        lines.append(f"softmax {widths[-1]}")
    return "\n".join(lines)


def relu_stacks():
    """Hypothesis strategy yielding ``(spec_text, c2, d_last)``."""
    from hypothesis import strategies as st

    @st.composite
    def build(draw):
        kind = draw(st.sampled_from(["conv", "fc"]))
        depth = draw(st.integers(2, 12))
        widths = draw(st.lists(st.integers(1, 600), min_size=depth, max_size=depth))
        kernels = draw(st.lists(st.integers(1, 5), min_size=depth, max_size=depth))
        channels = draw(st.integers(1, 64))
        return relu_stack_text(kind, widths, kernels, channels), widths[0], widths[-1]

    return build()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
