"""Custom systems from expression strings (sympy-backed).

Coordinates are named q1..qn and p1..pn; gradients are produced by symbolic
differentiation, so custom systems satisfy the same analytic-gradient
checks as the built-ins.
"""

from __future__ import annotations

import numpy as np

from .dynamics import HamiltonianSystem, MetricSystem, NoiseCoupling


def _symbols(prefix: str, n: int):
    import sympy
    return sympy.symbols(f"{prefix}1:{n + 1}")


def _lambdify_vec(args, exprs):
    import sympy
    fns = [sympy.lambdify(args, e, modules="math") for e in exprs]

    def call(*vals):
        flat = [float(x) for v in vals for x in np.atleast_1d(v)]
        return np.array([f(*flat) for f in fns])

    return call


def noise_from_expressions(exprs: list[str], dim: int) -> NoiseCoupling:
    """Couplings gamma_a(q1..qn) from expression strings."""
    import sympy
    qs = _symbols("q", dim)
    gammas, grads = [], []
    for text in exprs:
        e = sympy.sympify(text)
        fn = sympy.lambdify(qs, e, modules="math")
        grad = _lambdify_vec(qs, [sympy.diff(e, q) for q in qs])
        gammas.append(lambda q, _f=fn: float(_f(*np.atleast_1d(q))))
        grads.append(lambda q, _g=grad: _g(q))
    return NoiseCoupling(tuple(gammas), tuple(grads))


def hamiltonian_from_expression(h_expr: str, gamma_exprs: list[str],
                                dim: int) -> HamiltonianSystem:
    """HamiltonianSystem from H(q1..qn, p1..pn) expression text."""
    import sympy
    qs, ps = _symbols("q", dim), _symbols("p", dim)
    h_sym = sympy.sympify(h_expr)
    h_fn = sympy.lambdify(qs + ps, h_sym, modules="math")
    grad_q = _lambdify_vec(qs + ps, [sympy.diff(h_sym, q) for q in qs])
    grad_p = _lambdify_vec(qs + ps, [sympy.diff(h_sym, p) for p in ps])

    return HamiltonianSystem(
        dim,
        lambda q, p: float(h_fn(*np.atleast_1d(q), *np.atleast_1d(p))),
        noise_from_expressions(gamma_exprs, dim),
        grad_q=lambda q, p: grad_q(q, p),
        grad_p=lambda q, p: grad_p(q, p))


def metric_from_expressions(rows: list[list[str]], gamma_exprs: list[str],
                            dim: int) -> MetricSystem:
    """MetricSystem from an n x n table of g_ij(q1..qn) expression strings."""
    import sympy
    qs = _symbols("q", dim)
    g_sym = sympy.Matrix([[sympy.sympify(e) for e in row] for row in rows])
    if g_sym.shape != (dim, dim):
        raise ValueError(f"metric table shape {g_sym.shape} != ({dim}, {dim})")
    g_fn = sympy.lambdify(qs, g_sym, modules="numpy")
    dg_fns = [sympy.lambdify(qs, g_sym.diff(q), modules="numpy") for q in qs]

    def metric(q):
        return np.asarray(g_fn(*np.atleast_1d(q)), dtype=float)

    def metric_grad(q):
        vals = np.atleast_1d(q)
        dg = np.empty((dim, dim, dim))
        for k, f in enumerate(dg_fns):
            dg[:, :, k] = np.asarray(f(*vals), dtype=float)
        return dg

    return MetricSystem(dim, metric, noise_from_expressions(gamma_exprs, dim),
                        metric_grad=metric_grad)
