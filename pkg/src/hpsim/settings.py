from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NumericSettings:
    """Every tolerance used by the package, in one place.

    tol        -- map predicates and map equality (relative)
    eig_tol    -- Hermiticity precondition and reconstruction target of eig_hermitian
    gap_tol    -- interior-point relative duality gap
    feas_tol   -- interior-point relative equality residual
    cert_tol   -- residual accepted on certificates handed to the decomposer
    kraus_tol  -- Choi eigenvalues below kraus_tol * ||J|| are dropped
    prob_tol   -- allowed deviation of a probability vector from unit mass
    degen_tol  -- observable eigenvalues closer than this share a projector
    """

    tol: float = 1e-8
    eig_tol: float = 1e-10
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    cert_tol: float = 1e-6
    kraus_tol: float = 1e-10
    prob_tol: float = 1e-9
    degen_tol: float = 1e-9
    infeasible_bound: float = 1e12

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


DEFAULT = NumericSettings()
