"""Convex polynomial approximation of convex functions in Freud-weighted norms."""

__version__ = "0.1.0"

from .estimators import ConvexPolynomialRegressor
from .freud import (INF, Ball, Complement, FreudParams, FullSpace, freud_number, mrs_number,
                    tau, truncation_radius, weighted_norm)
from .globalizer import (ConvexityCertificate, PipelineConfig, PipelineReport, certify,
                         globalize, run_pipeline, schedule)
from .oracles import ConvexOracle, PiecewiseLinearConvex, build_h, get_oracle
from .poly import MultiPoly

__all__ = [
    "INF", "Ball", "Complement", "ConvexOracle", "ConvexPolynomialRegressor", "ConvexityCertificate", "FreudParams",
    "FullSpace", "MultiPoly", "PiecewiseLinearConvex", "PipelineConfig", "PipelineReport",
    "build_h", "certify", "freud_number", "get_oracle", "globalize", "mrs_number",
    "run_pipeline", "schedule", "tau", "truncation_radius", "weighted_norm",
]
