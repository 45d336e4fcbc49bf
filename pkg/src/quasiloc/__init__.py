"""Solutions of Δu + u_yy + f(u) = 0 that decay in x and are quasiperiodic in y,
built numerically around a nondegenerate ground state."""

__version__ = "0.1.0"
