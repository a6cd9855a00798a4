"""Request and response models of the HTTP service."""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class DomainModel(BaseModel):
    kind: Literal["ball", "annulus"] = "ball"
    radius: float = Field(1.0, gt=0)
    inner: Optional[float] = Field(None, gt=0)


class PotentialModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["constant", "quadratic_well", "radial_table"] = "constant"
    c: Optional[float] = None
    v0: Optional[float] = None
    center: Optional[List[float]] = None
    curvature: Optional[float] = None
    r: Optional[List[float]] = None
    v: Optional[List[float]] = None


class U0Model(BaseModel):
    source: Literal["none", "radial_pde", "inline"] = "none"
    r: Optional[List[float]] = None
    u: Optional[List[float]] = None
    du: Optional[List[float]] = None


class ProblemModel(BaseModel):
    dim: int
    eps: float = 0.0
    domain: DomainModel = DomainModel()
    potential: PotentialModel = PotentialModel(c=1.0)
    u0: U0Model = U0Model()

    def as_block(self):
        d = self.model_dump(exclude_none=True)
        u0 = d.pop("u0")
        if u0["source"] == "inline":
            d["u0"] = {"source": "none", "inline": {"r": u0["r"], "u": u0["u"], "du": u0["du"]}}
        else:
            d["u0"] = {"source": u0["source"]}
        return d


class BubbleModel(BaseModel):
    center: List[float]
    lam: float = Field(gt=0)
    alpha: float = 1.0


class ConfigurationModel(BaseModel):
    alpha0: float = 1.0
    bubbles: List[BubbleModel]


class Tolerances(BaseModel):
    rtol: Optional[float] = Field(None, gt=0)
    atol: Optional[float] = Field(None, ge=0)


class ConstantsRequest(Tolerances):
    dim: int = Field(ge=3)
    problem: Optional[ProblemModel] = None


class VerifyRequest(Tolerances):
    problem: ProblemModel
    check: str
    ladder: Optional[List[float]] = None
    center: Optional[List[float]] = None
    eps: Optional[float] = None
    lam: float = 480.0
    index: int = 0


class ExpansionRequest(Tolerances):
    problem: ProblemModel
    configuration: ConfigurationModel
    kind: str
    index: int = 0
    eps: Optional[float] = None
    boundary_law: Literal["total_derivative", "partial"] = "total_derivative"
    numeric: bool = True


class ClusterRequest(BaseModel):
    dim: int = Field(ge=3)
    N: int = Field(ge=2)
    hessian: List[List[float]]
    budget: int = Field(32, ge=1)
    seed: int


class PredictRequest(BaseModel):
    problem: ProblemModel
    kind: Literal["isolated", "cluster", "boundary"]
    site: List[float]
    eps: float = Field(gt=0)
    cluster: Optional[Dict[str, Any]] = None
    refine: bool = False
    seed: Optional[int] = None
    budget: int = 32
    N: int = 2


class SolveRequest(BaseModel):
    problem: ProblemModel
    eps_ladder: List[float]
    bracket: Optional[List[float]] = None
    fit: bool = True
    rate_law: bool = True


class DiagnoseRequest(BaseModel):
    problem: ProblemModel
    configuration: ConfigurationModel
    which: Literal["lowdim", "boundary"]
    eps: Optional[float] = None
    o_scale: Optional[float] = None
    slack: float = 1.0
    boundary_law: Literal["total_derivative", "partial"] = "partial"


class Result(BaseModel):
    """Every endpoint answers with a tagged result dict."""

    type: str
    result: Dict[str, Any]


class ErrorBody(BaseModel):
    error: str
    detail: str
