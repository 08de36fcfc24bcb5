"""Ball averages of cusp densities on tree-of-pants hyperbolic surfaces.

The package builds finite-area hyperbolic surfaces by doubling right-angled
hexagons into pairs of pants and gluing them along seams, evaluates averages
of cusp-supported densities over geodesic balls by enumerating covering-group
translates, and iterates a surface-doubling construction that keeps those
averages large at most points while the density's mass stays bounded away
from its average.
"""

from .geom import (
    Ball,
    HPoint,
    Horoball,
    Isometry,
    apply,
    apply_horoball,
    ball_area,
    ball_horoball_area,
    ball_horoball_area_batch,
    dist,
    horoball_gap,
    horoball_signed_distance,
    shrink_horoball,
)
from .surfaces import (
    CUSP_BOUNDARY_LENGTH,
    CuspRegion,
    FuchsianSurface,
    PantedSurface,
    PantsSpec,
    RightAngledHexagon,
    SurfacePoint,
    Stratum,
    alpha_deformation,
    assemble,
    cusp_shorten,
    glue,
    hexagon_solve,
    pants_holonomy,
    sample_band,
    sample_strata,
    sample_thick,
    stratum_area,
    surface_from_text,
    surface_to_text,
)
from .averaging import (
    BudgetExceeded,
    CuspDensity,
    TranslateItem,
    TranslateSet,
    beta,
    beta_from_set,
    beta_profile,
    cusp_flow,
    density_integral,
    enumerate_translates,
    grid_radii,
    l1_norm,
    reduce_point,
    truncated_maximal,
)
from .tower import (
    COLLAR_DEPTH,
    AlphaSearchError,
    GoodTuple,
    SearchError,
    StepParams,
    StepReport,
    TSearchError,
    TowerError,
    TowerLevel,
    TowerSchedule,
    amplitude_schedule,
    base_tuple,
    certification_strata,
    certify_profiles,
    certify_sup,
    find_alpha,
    find_t,
    inductive_step,
    mass_recursion,
    run_tower,
)

__version__ = "0.1.0"
