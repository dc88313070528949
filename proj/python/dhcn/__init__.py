"""Session-based recommender over dual hypergraph channels.

The heavy lifting lives in the native ``_dhcn`` extension; this package
re-exports its surface:

- :func:`build_dataset` / :class:`Dataset` -- session-log preprocessing
- :func:`train` / :class:`Model` -- training, evaluation, scoring
- :func:`propagation_matrix` / :func:`line_graph_adjacency` -- graph operators
- :func:`selfcheck` -- built-in invariant suite
"""

try:
    # Installed layout: the extension sits inside this package.
    from dhcn._dhcn import (
        Dataset,
        Model,
        build_dataset,
        line_graph_adjacency,
        propagation_matrix,
        selfcheck,
        train,
    )
except ImportError:
    # In-tree layout: the freshly built extension is on PYTHONPATH.
    from _dhcn import (
        Dataset,
        Model,
        build_dataset,
        line_graph_adjacency,
        propagation_matrix,
        selfcheck,
        train,
    )

__all__ = [
    "Dataset",
    "Model",
    "build_dataset",
    "line_graph_adjacency",
    "propagation_matrix",
    "selfcheck",
    "train",
]
