"""Weighted Alpert wavelet laboratory for doubling measures on [0,1)^n."""

from .grid import (
    DyadicCube,
    DyadicGrid,
    GoodnessParams,
    Relation,
    is_deeply_embedded,
    is_good,
    make_grid,
    relation,
)
from .leaffunc import LeafFunction
from .measure import (
    DiscreteMeasure,
    DoublingReport,
    Poly,
    cascade_measure,
    doubling_exponents,
    halo_mass,
    lebesgue_measure,
    make_measure,
    monomial_moment,
    power_measure,
    table_measure,
    write_table,
)
from .report import ConstantReport
from .wavelet import (
    AlpertBasis,
    AlpertSystem,
    WaveletCoefficients,
    analyze,
    build_alpert_basis,
    get_system,
    project_E,
    synthesize,
)

__version__ = "0.1.0"
