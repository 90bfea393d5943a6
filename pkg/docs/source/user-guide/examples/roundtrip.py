from kronlite import (compare_up_to_hidden_relabeling, generate_radial,
                      identify_full, reduce_network, relative_error)

net = generate_radial(14, 5, uniform=True, seed=3, subtrees=2)
print(net)

Ybar = reduce_network(net)
print("reduced to", Ybar)

rec = identify_full(Ybar)
print("recovered", rec)
print("same network:", compare_up_to_hidden_relabeling(net, rec))
print("round-trip error:", relative_error(Ybar, reduce_network(rec)))
