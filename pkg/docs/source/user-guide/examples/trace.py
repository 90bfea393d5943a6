from kronlite import admittance_from_network, generate_radial
from kronlite.kron_forward import (check_invariant_structure,
                                   elimination_order, iterative_reduce)

net = generate_radial(9, 4, seed=5)
Y = admittance_from_network(net)
order = elimination_order(Y, net.hidden)
print("elimination order:", order)

Ybar, trace = iterative_reduce(Y, order)
for s in trace:
    print("step %d: eliminate %s, band %s, clique %s, violations %d"
          % (s.l, s.target, s.band_labels, s.clique_labels,
             len(check_invariant_structure(s, Y))))
