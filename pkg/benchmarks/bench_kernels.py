"""Compare the numba and pure-numpy kernels on the local-excitation workload.

    python benchmarks/bench_kernels.py [--repeat 5] [--duration 10]

Kernel timings call both implementations directly in one process.  The
end-to-end row runs one forward simulation per backend in a subprocess, with
``SPME_IDENT_DISABLE_NUMBA`` set for the numpy one.  Numba compilation is
excluded by a warm-up call.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from spme_ident import kernels
from spme_ident.discretization import assemble_model, readouts, simulate
from spme_ident.excitation import SOC_POINTS, current_series, local_signal
from spme_ident.parameters import ParameterSet
from spme_ident.theta import ThetaVector

END_TO_END = """
import timeit
from spme_ident import kernels
from spme_ident.discretization import assemble_model, simulate
from spme_ident.excitation import SOC_POINTS, current_series, local_signal
from spme_ident.parameters import ParameterSet
from spme_ident.theta import ThetaVector
p = ParameterSet(); th = ThetaVector.from_params(p)
s = local_signal(0.2, duration={duration})
i = current_series(s)
m = assemble_model(th, p, s.dt)
x0 = m.uniform_state(*SOC_POINTS[5])
simulate(m, i, x0)
print(kernels.backend(), min(timeit.repeat(lambda: simulate(m, i, x0), number=1, repeat={repeat})))
"""


def best_of(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--duration", type=float, default=10.0,
                    help="seconds at 4 kHz; at least 10 (one 0.1 Hz period)")
    args = ap.parse_args(argv)

    params = ParameterSet()
    theta = ThetaVector.from_params(params)
    signal = local_signal(0.2, duration=args.duration)
    current = current_series(signal)
    model = assemble_model(theta, params, signal.dt)
    x0 = model.uniform_state(*SOC_POINTS[5])
    ele = model.electrolyte
    e_rows = np.vstack([ele.rows["average_n"], ele.rows["average_p"]])
    _, traj = simulate(model, current, x0, return_states=True)
    read = readouts(model, traj)
    consts = kernels.voltage_constants(params, theta.t_plus)

    rows = []
    if kernels.propagate_numba is not None:
        rows.append(("propagate (electrolyte, 8 states)", "numba",
                     best_of(lambda: kernels.propagate_numba(ele.Ad, ele.Bd, x0.c_e, current,
                                                             e_rows), args.repeat)))
    rows.append(("propagate (electrolyte, 8 states)", "numpy",
                 best_of(lambda: kernels.propagate_numpy(ele.Ad, ele.Bd, x0.c_e, current,
                                                         e_rows), args.repeat)))
    if kernels.voltage_numba is not None:
        rows.append(("voltage readout", "numba",
                     best_of(lambda: kernels.voltage_numba(*read, current, consts),
                             args.repeat)))
    rows.append(("voltage readout", "numpy",
                 best_of(lambda: kernels._voltage_numpy_by_name(*read, current, consts),
                         args.repeat)))
    code = END_TO_END.format(duration=args.duration, repeat=args.repeat)
    for disable in ("0", "1"):
        env = dict(os.environ, SPME_IDENT_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        name, seconds = res.stdout.split()
        rows.append(("simulate (end to end)", name, float(seconds)))

    print(f"{current.size} samples, best of {args.repeat}")
    print(f"{'kernel':34s} {'backend':8s} {'ms':>9s}")
    for kernel, name, seconds in rows:
        print(f"{kernel:34s} {name:8s} {seconds * 1e3:9.2f}")
    return rows


if __name__ == "__main__":
    main()
