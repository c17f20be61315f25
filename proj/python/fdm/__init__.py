"""Force-dual subspaces for reduced deformable simulation."""

from ._fdm import (
    InputError,
    Mesh,
    NumericalError,
    Operators,
    Prior,
    Simulator,
    Subspace,
    build_diagonal,
    build_lowrank,
    build_subspace,
    dense_modal_basis,
    greens_subspace,
    handle_prior,
    lma_prior,
    load_subspace,
    lowrank_prior,
    mass_orthonormality_error,
    painted_prior,
    principal_angles,
    radial_decay_weights,
    reconstruction_error,
    save_subspace,
)

__all__ = [name for name in dir() if not name.startswith("_")]
