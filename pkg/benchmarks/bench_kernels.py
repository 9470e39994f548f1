"""Time the numba kernels against their numpy twins and check they agree.

    python3 benchmarks/bench_kernels.py [--repeats N]

Each row reports the median wall time per call for both backends and whether
their outputs are bit-identical. Compilation happens in an untimed warmup call.
"""

import argparse
import statistics
import time

import numpy as np

from vgbench import _accel
from vgbench.augment import _conv_stack
from vgbench.visualgen import FactorToggles, canonical_state, render, sample_visual_spec
from vgbench.visualgen.spec import sample_factor
from vgbench.visualgen.textures import prepare_texture, tex_weight, tex_weight_np


@_accel.njit
def _texture_grid(code, fp, lat, xs, ys, out):
    for i in range(ys.shape[0]):
        for j in range(xs.shape[0]):
            out[i, j] = tex_weight(code, fp, lat, xs[j], ys[i])


def _median_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def bench_render(repeats):
    rows = []
    for domain in ("cartpole", "reacher"):
        spec = sample_visual_spec(7, FactorToggles(), domain)
        state = canonical_state(domain)
        for size in (84, 100):
            fns = {b: (lambda b=b: render(state, spec, domain, size, backend=b)) for b in ("numba", "numpy")}
            same = np.array_equal(fns["numba"](), fns["numpy"]())
            rows.append((f"render {domain} {size}px", *(_median_time(fns[b], repeats) for b in ("numba", "numpy")),
                         same))
    return rows


def bench_texture(repeats, size=336):
    rows = []
    c = (np.arange(size, dtype=np.float64) + 0.5) / size
    for seed in range(1, 200):
        tex = sample_factor(seed, "floor")
        if tex.family == "noise":
            break
    for family_tex in (tex, sample_factor(1, "background")):
        p = prepare_texture(family_tex)
        out = np.empty((size, size))
        y, x = np.meshgrid(c, c, indexing="ij")

        def nb():
            _texture_grid(p.code, p.fparams, p.lattice, c, c, out)
            return out.copy()

        def npy():
            return tex_weight_np(p.code, p.fparams, p.lattice, x, y)

        rows.append((f"texture {family_tex.family} {size}px", _median_time(nb, repeats), _median_time(npy, repeats),
                     np.array_equal(nb(), npy())))
    return rows


def bench_conv(repeats):
    rng = np.random.default_rng(0)
    stack = rng.integers(0, 256, (9, 84, 84), dtype=np.uint8)
    weight = rng.normal(0.0, 0.2, (3, 3, 3, 3))
    fns = {b: (lambda b=b: _conv_stack(stack, weight, backend=b)) for b in ("numba", "numpy")}
    return [("network-rand conv 9x84x84", _median_time(fns["numba"], repeats), _median_time(fns["numpy"], repeats),
             np.array_equal(fns["numba"](), fns["numpy"]()))]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rows = bench_render(args.repeats) + bench_texture(args.repeats) + bench_conv(args.repeats)
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  identical")
    for name, t_nb, t_np, same in rows:
        print(f"{name:32s} {1e3 * t_nb:10.3f} {1e3 * t_np:10.3f} {t_np / t_nb:8.2f}  {same}")


if __name__ == "__main__":
    main()
