"""
Exact identification calculations on finite-support models.

For a treatment level x let A_x : L2(F_{V|X=x}) -> L2(F_{Z|X=x}),
(A_x g)(z) = E[g(V) | X=x, Z=z]. In orthonormal coordinates (each function
scaled by the square root of its weight) A_x is the matrix

    K_x[z, v] = p(z, v | x) / sqrt(p(z | x) p(v | x))

and its adjoint is K_x'. Everything below is built from K_x:
    gamma(x, .)  minimum-norm solution of A_x gamma = E[Y | X=x, Z=.]
    phi(.)       minimum-norm solution of A*_{x1} phi = p(v | x2) / p(v | x1)
    C(x1, x2)    = ||phi||^2, computed from the singular system of K_{x1}
    D(x)         = ||gamma(x, .)||^2, likewise
"""
import logging
import time
from dataclasses import dataclass

import numpy as np

from consts import (
    ORACLE_SUITE_GAMMA_DRAWS,
    ORACLE_SUITE_MODELS,
    ORACLE_SUITE_NW_CHOICES,
    ORACLE_SUITE_NX_CHOICES,
    ORACLE_SUITE_WELLPOSEDNESS_MODELS,
    RANGE_RESIDUAL_TOL,
    RANK_RELATIVE_CUTOFF,
    SINGULAR_RELATIVE_CUTOFF,
    SOLVE_RESIDUAL_TOL,
    VERSION,
    WELLPOSEDNESS_SLACK,
)
from errors import (
    AbsoluteContinuityError,
    ConfigError,
    IdentificationError,
    ProxyCasfError,
    RangeConditionError,
)
from models.discrete_model import DiscreteModel, ObservableLaw
from models.report import OracleSuiteReport
from utils import stream_rng

logger = logging.getLogger("proxycasf.oracle")


@dataclass(frozen=True)
class SingularSystem:
    """
    Nonzero singular values of A_x (descending) with their singular functions.
    z_functions[:, k] lives in L2(F_{Z|X=x}), v_functions[:, k] in L2(F_{V|X=x}),
    and A_x v_k = mu_k z_k.
    """
    singular_values: np.ndarray
    z_functions: np.ndarray  # (nz, r)
    v_functions: np.ndarray  # (nv, r)
    p_z: np.ndarray
    p_v: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    def gram_deviation(self):
        """Largest deviation from orthonormality under the weighted inner products"""
        z_gram = self.z_functions.T @ (self.p_z[:, None] * self.z_functions)
        v_gram = self.v_functions.T @ (self.p_v[:, None] * self.v_functions)
        eye = np.eye(self.rank)
        return float(max(np.max(np.abs(z_gram - eye), initial=0.0), np.max(np.abs(v_gram - eye), initial=0.0)))


# ----------------------------------------------------------------------------
# Helpers


def _law(model):
    if isinstance(model, DiscreteModel):
        return model.observable_law()
    if isinstance(model, ObservableLaw):
        return model
    raise ConfigError(f"expected a DiscreteModel or ObservableLaw, got {type(model).__name__}")


def _index(law, x):
    return law.x_index(x)


def _latent(model, operation):
    if not isinstance(model, DiscreteModel):
        raise ConfigError(f"{operation} needs the latent model, not only its observable law")
    return model


def _kernel(law, x):
    """K_x with the z and v weights; cells of zero weight have zero rows/columns"""
    p_zv = law.p_zv_given_x(x)
    p_z = p_zv.sum(axis=1)
    p_v = p_zv.sum(axis=0)
    scale = np.sqrt(np.outer(p_z, p_v))
    kernel = np.divide(p_zv, scale, out=np.zeros_like(p_zv), where=scale > 0)
    return kernel, p_z, p_v


def _unweight(coordinates, weights):
    root = np.sqrt(weights)
    return np.divide(coordinates, root, out=np.zeros_like(coordinates), where=root > 0)


def _density_ratio(law, x1, x2):
    p_v1 = law.p_v_given_x(x1)
    p_v2 = law.p_v_given_x(x2)
    violated = np.nonzero((p_v1 <= 0) & (p_v2 > 0))[0]
    if len(violated):
        raise AbsoluteContinuityError(
            f"p(v | x1) = 0 < p(v | x2) at v = {violated.tolist()}: the density ratio does not exist"
        )
    return np.divide(p_v2, p_v1, out=np.zeros_like(p_v2), where=p_v1 > 0), p_v1


def _require_complete(model, x, sides):
    if not isinstance(model, DiscreteModel):
        return
    for side in sides:
        report = completeness_check(model, x, side)
        if not report["pass"]:
            raise IdentificationError(
                f"completeness fails on the {side} side at x={x}: rank {report['rank']} < {report['required']}"
            )


# ----------------------------------------------------------------------------
# Direct and gamma/phi routes


def true_casf(model, x1, x2):
    """sum_w mu(x1, w) p(w | X = x2)"""
    model = _latent(model, "true_casf")
    return float(model.mu[x1] @ model.p_w_given_x()[x2])


def completeness_check(model, x, side):
    """Rank of [p(w | x, z)] (side 'Z') or [p(w | x, v)] (side 'V') against nw"""
    model = _latent(model, "completeness_check")
    if side == "Z":
        table = model.p_w_given_xz(x)
    elif side == "V":
        table = model.p_w_given_xv(x)
    else:
        raise ConfigError(f"completeness side must be 'V' or 'Z', got {side!r}")
    singular = np.linalg.svd(table, compute_uv=False)
    rank = int(np.sum(singular > RANK_RELATIVE_CUTOFF * singular[0])) if singular[0] > 0 else 0
    return {"rank": rank, "required": model.nw, "pass": rank == model.nw}


def solve_gamma(model, x):
    """Weighted minimum-norm gamma(x, .) with sum_v gamma(v) p(v | x, z) = E[Y | x, z] for every z"""
    law = _law(model)
    xi = _index(law, x)
    _require_complete(model, xi, ("V", "Z"))
    kernel, p_z, p_v = _kernel(law, xi)
    target = law.ey_xz[xi]

    coordinates = np.linalg.lstsq(kernel, np.sqrt(p_z) * target, rcond=SINGULAR_RELATIVE_CUTOFF)[0]
    gamma = _unweight(coordinates, p_v)

    residual = law.p_v_given_xz(xi) @ gamma - target
    worst = float(np.max(np.abs(residual[p_z > 0]), initial=0.0))
    if worst > SOLVE_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(target)))):
        raise IdentificationError(f"no gamma solves the moment condition at x={x} (residual {worst:.3e})")
    return gamma


def casf_via_gamma(model, x1, x2):
    """sum_v gamma(x1, v) p(v | x2)"""
    law = _law(model)
    gamma = solve_gamma(model, x1)
    return float(gamma @ law.p_v_given_x(_index(law, x2)))


def solve_phi(model, x1, x2):
    """Weighted minimum-norm phi with sum_z phi(z) p(z | x1, v) = p(v | x2) / p(v | x1) for every v"""
    law = _law(model)
    i1, i2 = _index(law, x1), _index(law, x2)
    ratio, p_v1 = _density_ratio(law, i1, i2)
    _require_complete(model, i1, ("Z", "V"))
    kernel, p_z, _ = _kernel(law, i1)

    coordinates = np.linalg.lstsq(kernel.T, np.sqrt(p_v1) * ratio, rcond=SINGULAR_RELATIVE_CUTOFF)[0]
    phi = _unweight(coordinates, p_z)

    residual = law.p_z_given_xv(i1) @ phi - ratio
    worst = float(np.max(np.abs(residual[p_v1 > 0]), initial=0.0))
    if worst > SOLVE_RESIDUAL_TOL * max(1.0, float(np.max(ratio))):
        raise IdentificationError(f"no phi solves the density-ratio equation at ({x1}, {x2}) (residual {worst:.3e})")
    return phi


def casf_via_phi(model, x1, x2):
    """sum_z E[Y | x1, z] phi(z) p(z | x1)"""
    law = _law(model)
    i1 = _index(law, x1)
    phi = solve_phi(model, x1, x2)
    return float(np.sum(law.ey_xz[i1] * phi * law.p_z_given_x(i1)))


# ----------------------------------------------------------------------------
# Singular systems and Picard sums


def singular_system(model, x):
    """Singular system of A_x, singular values below the relative cutoff dropped"""
    law = _law(model)
    kernel, p_z, p_v = _kernel(law, _index(law, x))
    left, values, right_t = np.linalg.svd(kernel, full_matrices=False)
    keep = values > SINGULAR_RELATIVE_CUTOFF * values[0] if values[0] > 0 else np.zeros(len(values), dtype=bool)
    return SingularSystem(
        singular_values=values[keep],
        z_functions=_unweight(left[:, keep], p_z[:, None]),
        v_functions=_unweight(right_t[keep].T, p_v[:, None]),
        p_z=p_z,
        p_v=p_v,
    )


def _picard_sum(function, weights, basis, singular_values, what):
    """sum_k mu_k^-2 <function, basis_k>^2 after checking function lies in span(basis)"""
    coefficients = basis.T @ (weights * function)
    projection = basis @ coefficients
    norm = np.sqrt(np.sum(weights * function ** 2))
    leftover = np.sqrt(np.sum(weights * (function - projection) ** 2))
    if norm > 0 and leftover / norm > RANGE_RESIDUAL_TOL:
        raise RangeConditionError(f"{what} lies outside the operator range (relative residual {leftover / norm:.3e})")
    return float(np.sum((coefficients / singular_values) ** 2))


def picard_constant(model, x1, x2):
    """C(x1, x2): Picard sum of the density ratio p(v | x2) / p(v | x1) under A*_{x1}"""
    law = _law(model)
    ratio, p_v1 = _density_ratio(law, _index(law, x1), _index(law, x2))
    system = singular_system(law, x1)
    return _picard_sum(ratio, p_v1, system.v_functions, system.singular_values, "density ratio")


def dual_picard_constant(model, x):
    """D(x): Picard sum of E[Y | X=x, Z=.] under A_x"""
    law = _law(model)
    xi = _index(law, x)
    system = singular_system(law, x)
    return _picard_sum(law.ey_xz[xi], system.p_z, system.z_functions, system.singular_values, "E[Y | X, Z]")


def _reference_casf(model, x1, x2):
    if isinstance(model, DiscreteModel):
        return true_casf(model, x1, x2)
    return casf_via_phi(model, x1, x2)


def wellposedness_check(model, x1, x2, gamma_tilde):
    """(y(x1|x2) - E[gamma~ | x2])^2 <= C(x1, x2) * E[(E[Y|x1,Z] - E[gamma~ | x1, Z])^2 | x1]"""
    law = _law(model)
    i1, i2 = _index(law, x1), _index(law, x2)
    gamma_tilde = np.asarray(gamma_tilde, dtype=float)
    if gamma_tilde.shape != (law.nv,):
        raise ConfigError(f"gamma_tilde must have length nv={law.nv}")

    lhs = (_reference_casf(model, x1, x2) - gamma_tilde @ law.p_v_given_x(i2)) ** 2
    misfit = law.ey_xz[i1] - law.p_v_given_xz(i1) @ gamma_tilde
    rhs = picard_constant(law, x1, x2) * float(np.sum(law.p_z_given_x(i1) * misfit ** 2))
    return {"lhs": float(lhs), "rhs": float(rhs), "holds": bool(lhs <= rhs + WELLPOSEDNESS_SLACK)}


def dual_wellposedness_check(model, x1, x2, phi_tilde):
    """(y(x1|x2) - E[Y phi~ | x1])^2 <= D(x1) * E[(E[phi~ | x1, V] - ratio(V))^2 | x1]"""
    law = _law(model)
    i1, i2 = _index(law, x1), _index(law, x2)
    phi_tilde = np.asarray(phi_tilde, dtype=float)
    if phi_tilde.shape != (law.nz,):
        raise ConfigError(f"phi_tilde must have length nz={law.nz}")

    p_z1 = law.p_z_given_x(i1)
    lhs = (_reference_casf(model, x1, x2) - float(np.sum(law.ey_xz[i1] * phi_tilde * p_z1))) ** 2
    ratio, p_v1 = _density_ratio(law, i1, i2)
    misfit = law.p_z_given_xv(i1) @ phi_tilde - ratio
    rhs = dual_picard_constant(law, x1) * float(np.sum(p_v1 * misfit ** 2))
    return {"lhs": float(lhs), "rhs": float(rhs), "holds": bool(lhs <= rhs + WELLPOSEDNESS_SLACK)}


# ----------------------------------------------------------------------------
# Acceptance battery


def _suite_model(seed, index):
    rng = stream_rng(seed, index)
    nw = int(rng.choice(ORACLE_SUITE_NW_CHOICES))
    nx = int(rng.choice(ORACLE_SUITE_NX_CHOICES))
    return DiscreteModel.generate(rng, nw=nw, nx=nx, nz=nw + 1, nv=nw + 1)


def _fully_complete(model):
    return all(completeness_check(model, x, side)["pass"] for x in range(model.nx) for side in ("V", "Z"))


def run_oracle_suite(
    seed=0,
    models=ORACLE_SUITE_MODELS,
    wellposedness_models=ORACLE_SUITE_WELLPOSEDNESS_MODELS,
    gamma_draws=ORACLE_SUITE_GAMMA_DRAWS,
):
    """Triple equivalence, Picard consistency, both well-posedness inequalities and orthonormality over random models"""
    start = time.time()
    equivalence = {"name": "triple_equivalence", "max_gamma_error": 0.0, "max_phi_error": 0.0, "models": 0, "skipped": 0}
    picard = {"name": "picard_consistency", "max_error": 0.0, "models": 0}
    primal = {"name": "wellposedness", "violations": 0, "cases": 0}
    dual = {"name": "dual_wellposedness", "violations": 0, "cases": 0}
    orthonormal = {"name": "singular_orthonormality", "max_deviation": 0.0, "systems": 0}
    failures = []

    for index in range(int(models)):
        model = _suite_model(seed, index)
        if not _fully_complete(model):
            equivalence["skipped"] += 1
            continue
        try:
            for x1 in range(model.nx):
                system = singular_system(model, x1)
                orthonormal["max_deviation"] = max(orthonormal["max_deviation"], system.gram_deviation())
                orthonormal["systems"] += 1
                for x2 in range(model.nx):
                    truth = true_casf(model, x1, x2)
                    equivalence["max_gamma_error"] = max(
                        equivalence["max_gamma_error"], abs(casf_via_gamma(model, x1, x2) - truth)
                    )
                    equivalence["max_phi_error"] = max(
                        equivalence["max_phi_error"], abs(casf_via_phi(model, x1, x2) - truth)
                    )
            equivalence["models"] += 1

            if index >= int(wellposedness_models):
                continue
            law = model.observable_law()
            draws = stream_rng(seed, index, 1)
            for x1 in range(model.nx):
                p_z1 = law.p_z_given_x(x1)
                for x2 in range(model.nx):
                    phi = solve_phi(model, x1, x2)
                    picard["max_error"] = max(
                        picard["max_error"], abs(float(np.sum(p_z1 * phi ** 2)) - picard_constant(model, x1, x2))
                    )
                    for _ in range(int(gamma_draws)):
                        primal["cases"] += 1
                        if not wellposedness_check(model, x1, x2, draws.standard_normal(model.nv))["holds"]:
                            primal["violations"] += 1
                        dual["cases"] += 1
                        if not dual_wellposedness_check(model, x1, x2, draws.standard_normal(model.nz))["holds"]:
                            dual["violations"] += 1
            picard["models"] += 1
        except ProxyCasfError as e:
            failures.append({"model": index, "error": type(e).__name__, "message": str(e)})

    equivalence["passed"] = (
        equivalence["max_gamma_error"] < SOLVE_RESIDUAL_TOL and equivalence["max_phi_error"] < SOLVE_RESIDUAL_TOL
    )
    picard["passed"] = picard["max_error"] < SOLVE_RESIDUAL_TOL
    primal["passed"] = primal["violations"] == 0
    dual["passed"] = dual["violations"] == 0
    orthonormal["passed"] = orthonormal["max_deviation"] < RANK_RELATIVE_CUTOFF
    solver = {"name": "solver_failures", "failures": failures, "passed": not failures}

    checks = [equivalence, picard, primal, dual, orthonormal, solver]
    logger.info(
        f"Oracle suite over {models} models finished in {time.time() - start:.2f}s: "
        + ", ".join(f"{c['name']}={'pass' if c['passed'] else 'FAIL'}" for c in checks)
    )
    return OracleSuiteReport(
        checks=checks,
        config={"models": int(models), "wellposedness_models": int(wellposedness_models), "gamma_draws": int(gamma_draws)},
        seed=int(seed),
        version=VERSION,
    )
