"""Monte Carlo laboratory for Brownian loop soups, their clusters and SLE comparisons."""

from loopsoup.domain import Domain
from loopsoup.soup import (
    Loop,
    LoopSoup,
    SoupConfig,
    expected_loop_count,
    restrict_soup,
    sample_brownian_bridge_loop,
    sample_rw_loop_soup,
    sample_soup,
    superpose,
)
from loopsoup.fractal import (
    alpha_of_kappa,
    alpha_of_kappa_rho,
    box_counting_dimension,
    c_of_kappa,
    kappa_of_c,
    rho_for_alpha,
)

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "Loop",
    "LoopSoup",
    "SoupConfig",
    "alpha_of_kappa",
    "alpha_of_kappa_rho",
    "box_counting_dimension",
    "c_of_kappa",
    "expected_loop_count",
    "kappa_of_c",
    "restrict_soup",
    "rho_for_alpha",
    "sample_brownian_bridge_loop",
    "sample_rw_loop_soup",
    "sample_soup",
    "superpose",
]
