"""Independent dense references built straight from the generators."""
import numpy as np

from factomp.tensor import outer_product


def node_atoms(d, node, roles):
    w = d.grid.point(node)
    cols = []
    for i in roles:
        fs = [g.derivative(x) if i == ax + 1 else g(x)
              for ax, (g, x) in enumerate(zip(d.generators, w))]
        cols.append(outer_product(fs).ravel())
    return np.stack(cols, axis=1)


def dense_scores(R, d, roles=None):
    roles = range(d.n_interp) if roles is None else roles
    out = np.empty(d.grid_shape)
    for node in np.ndindex(*d.grid_shape):
        A = node_atoms(d, node, roles)
        beta = np.linalg.lstsq(A, R.ravel(), rcond=None)[0]
        out[node] = np.linalg.norm(A @ beta - R.ravel()) ** 2
    return out


def dense_refit(Y, d, nodes, roles=None):
    roles = range(d.n_interp) if roles is None else roles
    A = np.concatenate([node_atoms(d, n, roles) for n in nodes], axis=1)
    beta = np.linalg.lstsq(A, Y.ravel(), rcond=None)[0]
    return beta.reshape(len(nodes), -1)
