"""Independent test oracles, kept free of the code paths they check.

``single_mode_exact_moments`` evaluates the exact second moments of the
one-eigenmode additive-noise system directly from the rotation matrix and
the Ito-isometry integrals in closed form.  ``stm_moment_recursion``
instead probes the production one-step map (which is affine in state and
increment) to extract its linear and noise responses, then propagates the
moment recursion those imply.  ``coupled_linear_error`` computes the exact
mean-square difference between two trigonometric discretizations of the
linear additive problem driven by the same noise, with no sampling at all.
"""

import numpy as np

from stochwave import State, stm_step
from stochwave.noise import sine_hat_load_matrix


def _mode_parameters(dp):
    """(omega, sigma): frequency and nodal noise amplitude of the single mode."""
    assert dp.mesh.n_dofs == 1, "oracle is for the single-dof mesh"
    lam = dp.decomp.eigenvalues[0]
    b1 = sine_hat_load_matrix(dp.mesh, 1)[0, 0]
    q1 = dp.noise.variances[0]
    sigma = np.sqrt(q1) * b1 / dp.ops.mass[0, 0]
    return np.sqrt(lam), sigma


def _rotation(om, t):
    return np.array(
        [[np.cos(om * t), np.sin(om * t) / om], [-om * np.sin(om * t), np.cos(om * t)]]
    )


def _noise_covariance(om, sigma, t):
    """Closed form of sigma^2 int_0^t R(s) e2 e2^T R(s)^T ds."""
    s2 = t / 2.0 - np.sin(2.0 * om * t) / (4.0 * om)
    c2 = t / 2.0 + np.sin(2.0 * om * t) / (4.0 * om)
    sc = np.sin(om * t) ** 2 / (2.0 * om)
    return sigma**2 * np.array([[s2 / om**2, sc / om], [sc / om, c2]])


def single_mode_exact_moments(dp, T, P0=None, k_check=2.0**-9):
    """E[X(T) X(T)^T] for the exact mild solution, zero data by default.

    Evaluated two ways (single closed-form step and the step-k recursion)
    which must agree; the recursion result is returned.
    """
    om, sigma = _mode_parameters(dp)
    P0 = np.zeros((2, 2)) if P0 is None else P0
    R_T = _rotation(om, T)
    direct = R_T @ P0 @ R_T.T + _noise_covariance(om, sigma, T)
    n = int(round(T / k_check))
    Rk = _rotation(om, k_check)
    Sk = _noise_covariance(om, sigma, k_check)
    P = P0.copy()
    for _ in range(n):
        P = Rk @ P @ Rk.T + Sk
    assert np.max(np.abs(P - direct)) < 1e-12, "oracle self-check failed"
    return direct


def stm_moment_recursion(dp, k, n_steps, P0=None):
    """Second moments of the trigonometric scheme via probing its step map.

    The step is affine in (state, increment); two unit states and a unit
    increment recover the linear map L and the noise response nu, and the
    scheme's moments satisfy P <- L P L^T + q1 k nu nu^T.
    """
    from stochwave.noise import NoiseIncrement

    zero_inc = NoiseIncrement(xi=np.zeros(1), dt=k, spectral_coeffs=np.zeros(1))
    cols = []
    for u1, u2 in ((np.ones(1), np.zeros(1)), (np.zeros(1), np.ones(1))):
        out = stm_step(State(u1, u2), k, dp, zero_inc)
        cols.append([out.u1[0], out.u2[0]])
    L = np.array(cols).T  # columns: responses to the unit states
    unit_inc = NoiseIncrement(xi=np.ones(1), dt=k, spectral_coeffs=np.ones(1))
    out = stm_step(State(np.zeros(1), np.zeros(1)), k, dp, unit_inc)
    nu = np.array([out.u1[0], out.u2[0]])
    q1 = dp.noise.variances[0]
    P = np.zeros((2, 2)) if P0 is None else P0.copy()
    noise_term = q1 * k * np.outer(nu, nu)
    for _ in range(n_steps):
        P = L @ P @ L.T + noise_term
    return P


def coupled_linear_error(mesh_dofs_eigs, load_matrix, variances, T, k_fine, levels):
    """Exact coupled mean-square u1 errors for the linear additive problem.

    Both the reference (step k_fine) and each ladder discretization pin the
    noise at their own step anchors; the difference is a Gaussian sum whose
    variance is computable mode by mode:

        err^2(k) = sum_i g_i^2 sum_m k_fine
                   * (sin(om_i (T - a_m)) - sin(om_i (T - t_m)))^2 / om_i^2

    with g_i^2 the modal noise input rate and a_m the coarse anchor of fine
    step m.  Returns one error per requested level.
    """
    eigenvalues, eigenvectors, to_modal = mesh_dofs_eigs
    G = eigenvectors.T @ load_matrix  # modal load responses (modes x J)
    g2 = (G**2 * variances).sum(axis=1)
    om = np.sqrt(eigenvalues)
    n_fine = int(round(T / k_fine))
    t_m = np.arange(n_fine) * k_fine
    out = []
    for level in levels:
        k = 2.0**-level
        m = int(round(k / k_fine))
        anchors = (np.arange(n_fine) // m) * k
        total = 0.0
        for i in range(om.shape[0]):
            d = (np.sin(om[i] * (T - anchors)) - np.sin(om[i] * (T - t_m))) / om[i]
            total += g2[i] * k_fine * np.sum(d * d)
        out.append(np.sqrt(total))
    return np.array(out)
