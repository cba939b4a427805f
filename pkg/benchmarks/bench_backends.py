"""Compare the compiled kernel extension against the pure-numpy fallback.

Times the individual window/activation kernels and a full training step at a
representative problem size, for both backends:

    python benchmarks/bench_backends.py [--steps N]
"""

import argparse
import importlib
import time

import numpy as np


def time_call(fn, repeats):
    fn()
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def kernel_benchmarks(kernels, rng):
    x = np.ascontiguousarray(
        rng.standard_normal((8, 65, 96)) + 1j * rng.standard_normal((8, 65, 96))
    )
    rows = np.arange(48)[:, None] * 0 + np.arange(4)[None, :] * 4
    s3 = np.ascontiguousarray(
        rng.standard_normal((53, 90, 128)) + 1j * rng.standard_normal((53, 90, 128))
    )
    x3 = np.empty((53 * 86, 128 * 5), np.complex128)
    gs3 = np.empty((53 * 90, 128), np.complex128)
    z = np.ascontiguousarray(
        rng.standard_normal((4770, 256)) + 1j * rng.standard_normal((4770, 256))
    )
    out = np.empty_like(z)
    return {
        "im2col 4x7 dil4": lambda: kernels.im2col(x, 4, 7, 4),
        "gather_windows": lambda: kernels.gather_windows(x, rows, 7),
        "row_windows_out 1x5": lambda: kernels.row_windows_out(s3, 5, x3),
        "row_windows_adjoint_out": lambda: kernels.row_windows_adjoint_out(
            x3, 53, 90, 5, gs3
        ),
        "cleaky_forward_out": lambda: kernels.cleaky_forward_out(z, out, 0.01),
        "cleaky_backward_inplace": lambda: kernels.cleaky_backward_inplace(
            z, out, 0.01
        ),
    }


def train_step_benchmark(steps):
    from rakikit import NetworkConfig, extract_central_lines, init_weights
    from rakikit.phantom import default_head_phantom, make_harmonic_array
    from rakikit.phantom import render_phantom, simulate_kspace
    from rakikit.raki import AdamState, TrainingProblem

    img = render_phantom(default_head_phantom((96, 96)))
    ksp = simulate_kspace(img, make_harmonic_array(8, 3, seed=1), 0.0, 0)
    block = extract_central_lines(ksp, 65)
    cfg = NetworkConfig(n_coils=8, rate=4, layer1_kernel=(4, 7))
    problem = TrainingProblem(block, cfg)
    weights = init_weights(cfg, 0)
    state = AdamState.for_weights(weights)
    problem.step(weights, state, 5e-3)
    start = time.perf_counter()
    for _ in range(steps):
        problem.step(weights, state, 5e-3)
    return (time.perf_counter() - start) / steps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    results = {}
    for name, module in (("ext", "rakikit._kernels"), ("python", "rakikit._kernels_py")):
        try:
            kernels = importlib.import_module(module)
        except ImportError:
            print(f"backend {name}: not available, skipping")
            continue
        import rakikit.backend as backend_mod

        # route the whole package through this backend for the end-to-end row
        for fn in (
            "im2col",
            "gather_windows",
            "row_windows",
            "row_windows_out",
            "row_windows_adjoint",
            "row_windows_adjoint_out",
            "cleaky_forward",
            "cleaky_forward_out",
            "cleaky_backward",
            "cleaky_backward_inplace",
        ):
            setattr(backend_mod, fn, getattr(kernels, fn))
        rng = np.random.default_rng(0)
        rows = {}
        for label, fn in kernel_benchmarks(kernels, rng).items():
            rows[label] = time_call(fn, args.repeats)
        rows["full training step (4x7, 65x96, 8 coils)"] = train_step_benchmark(
            args.steps
        )
        results[name] = rows

    labels = list(next(iter(results.values())))
    width = max(len(label) for label in labels)
    header_backends = list(results)
    print(f"{'kernel':<{width}}  " + "  ".join(f"{b:>12}" for b in header_backends))
    for label in labels:
        cells = "  ".join(f"{results[b][label] * 1e3:>9.3f} ms" for b in header_backends)
        print(f"{label:<{width}}  {cells}")
    if {"ext", "python"} <= results.keys():
        print()
        for label in labels:
            ratio = results["python"][label] / results["ext"][label]
            print(f"speedup ext vs python  {label}: {ratio:.2f}x")


if __name__ == "__main__":
    main()
