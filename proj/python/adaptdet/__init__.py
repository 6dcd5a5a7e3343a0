"""Multi-branch object detection runtime.

Thin re-export of the compiled ``_adaptdet`` extension.
"""

from ._adaptdet import (
    Box,
    Branch,
    Calibration,
    Context,
    Error,
    KnobDomain,
    NoFeasibleBranchError,
    ProfileStore,
    branch_id,
    calibrate,
    cli_run,
    default_kernel,
    enumerate_branches,
    generate_profiles,
    iou,
    mean_ap,
    nms,
    parse_branch_id,
    pareto_frontier,
    predict_energy,
    predict_latency,
    run_cpu_load,
    schedule,
    simulate,
    tracker_latency_ms,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"


def main() -> int:
    import sys

    code, out, err = cli_run(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
