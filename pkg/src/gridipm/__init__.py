"""Structure-exploiting interior-point solver for optimal power flow.

The package couples a filter line-search primal-dual interior-point
method with linear-solver backends that exploit the bordered
block-diagonal (arrowhead) shape of the KKT systems produced by
security-constrained and multiperiod optimal power flow.
"""

__version__ = "0.1.0"
