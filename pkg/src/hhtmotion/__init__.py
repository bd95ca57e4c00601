"""Mode decomposition, beat-aligned analysis, and IMF-level editing of
motion-capture signals."""

__version__ = "0.1.0"

from .analysis import (
    FibonacciReport,
    HilbertSpectrum,
    Summary,
    WafaReport,
    detect_singular_imfs,
    fibonacci_relations,
    hilbert_spectrum,
    summarize,
    wafa,
)
from .beat import (
    BeatGrid,
    Segment,
    estimate_tempo,
    fixed_grid,
    onset_envelope,
    read_wav,
    segment_by_beats,
    track_beats,
)
from .edit import (
    AlignedPair,
    BlendOp,
    BlendSpec,
    align,
    apply_blend,
    merge_imfs,
    reconstruct,
    synthesize_clip,
)
from .memd import (
    DirectionSet,
    MultivariateDecomposition,
    MultivariateSeries,
    direction_set,
    memd,
    multivariate_mean_envelope,
    na_memd,
)
from .mocap_io import (
    MotionClip,
    Skeleton,
    apply_channels,
    extract_channels,
    parse_bvh,
    resample,
    write_bvh,
)
from .signal_core import (
    AnalyticSignal,
    Decomposition,
    EnvelopePair,
    ImfReport,
    InstantAttributes,
    TimeSeries,
    analytic_signal,
    emd,
    envelope_pair,
    find_extrema,
    imf_check,
    instantaneous_attributes,
    sift,
)
