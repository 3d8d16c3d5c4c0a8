"""Request/response models for the HTTP service."""

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..swarm_core import PsoParams, TopologySpec


class TopologyModel(BaseModel):
    kind: Literal["global", "ring"] = "ring"
    ring_k: int = 1

    def to_topology(self) -> TopologySpec:
        return TopologySpec(kind=self.kind, ring_k=self.ring_k)


class ParamsModel(BaseModel):
    omega: float
    c: float
    swarm_size: int
    iterations: int
    dim: int = 2
    domain: list = Field(default=[[-10.0, 10.0], [-10.0, 10.0]])
    topology: TopologyModel = Field(default_factory=TopologyModel)
    seed: int = 0
    velocity_init_factor: float = 0.5

    def to_params(self) -> PsoParams:
        return PsoParams(
            omega=self.omega, c=self.c, swarm_size=self.swarm_size,
            iterations=self.iterations, dim=self.dim,
            domain=tuple(tuple(ax) for ax in self.domain),
            topology=self.topology.to_topology(), seed=self.seed,
            velocity_init_factor=self.velocity_init_factor,
        )


class RunRequest(BaseModel):
    params: ParamsModel
    objective: str = "himmelblau"
    run_id: Optional[str] = None
    out: Optional[str] = None           # trajectory path, resolved under the out root
    format: Literal["binary", "csv"] = "binary"
    classify: bool = False              # include per-particle regime labels


class RunResponse(BaseModel):
    run_id: str
    objective: str
    swarm_size: int
    iterations: int
    exit_count: int
    best: list
    best_value: float
    trajectory_path: Optional[str] = None
    digest: str
    classification: Optional[list] = None


class SpecModel(BaseModel):
    name: str
    objective: str = "himmelblau"
    base: ParamsModel
    replications: int
    analysis: Literal["Oscillatory", "NonOscillatory", "SwarmFixedStep"]
    analysis_params: dict = Field(default_factory=dict)
    output_dir: Optional[str] = None

    def to_spec_dict(self) -> dict:
        return self.model_dump()


class McRequest(BaseModel):
    spec: SpecModel
    threads: int = 1
    wait: bool = True                   # False: return a job id to poll


class JobStatus(BaseModel):
    job_id: str
    status: Literal["queued", "running", "done", "error"]
    error: Optional[str] = None
    result: Optional[dict] = None


class AnalyzeRequest(BaseModel):
    trajectory_path: str
    analysis: Literal["Oscillatory", "NonOscillatory", "SwarmFixedStep"]
    analysis_params: dict = Field(default_factory=dict)


class QQRequest(BaseModel):
    values: Optional[list] = None       # raw sample, or:
    csv_path: Optional[str] = None      # h_stats.csv to pull a statistic column from
    statistic: Optional[str] = None
    svg: bool = False


class QQResponse(BaseModel):
    qq_corr: float
    theoretical: list
    sample: list
    svg: Optional[str] = None
