#!/usr/bin/env python3
"""Toy target for the subprocess backend.

Usage: toy_wrapper.py <instance> <seed> <captime> [-name value ...]

Runtime is 0.1 * (1 + index of each value in its parameter's list) summed
over parameters, times a per-instance factor read from the instance name
(``name-<factor>``). Instance names containing ``hang`` never finish;
names containing ``crash`` exit with status 3 and no result line.
"""
import sys
import time


def main(argv):
    instance, seed, captime = argv[0], int(argv[1]), float(argv[2])
    params = {k.lstrip("-"): v for k, v in zip(argv[3::2], argv[4::2])}
    if "hang" in instance:
        time.sleep(3600)
    if "crash" in instance:
        print("segmentation fault (simulated)", file=sys.stderr)
        return 3
    factor = 1.0
    if "-" in instance:
        try:
            factor = float(instance.rsplit("-", 1)[1])
        except ValueError:
            pass
    runtime = 0.0
    for name, value in params.items():
        runtime += 0.1 * (1 + "abcdefgh".index(value[0])) if value[0] in "abcdefgh" else 0.1
    runtime = max(runtime, 0.01) * factor + (seed % 7) * 1e-4
    print(f"instance {instance} seed {seed} params {sorted(params.items())}")
    if runtime > captime:
        print(f"RESULT: TIMEOUT {captime}")
    else:
        print(f"RESULT: SUCCESS {runtime:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
