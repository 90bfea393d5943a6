import os
import tempfile

from kronlite import (estimate_kron_reduced, generate_radial, identify_full,
                      reduce_network, relative_error, simulate_measurements)
from kronlite.serialize import read_measurements_csv, write_measurements_csv

net = generate_radial(10, 3, uniform=True, seed=11)
Ybar = reduce_network(net)

ms = simulate_measurements(Ybar, T=200, noise_sigma=1e-9, seed=1)
path = os.path.join(tempfile.mkdtemp(), 'pmu.csv')
write_measurements_csv(ms, path)

est = estimate_kron_reduced(read_measurements_csv(path))
print("estimation error:", relative_error(Ybar, est))

rec = identify_full(est)
print("hidden nodes:", rec.hidden)
for edge in rec.edges:
    print(edge.j, "--", edge.k)
