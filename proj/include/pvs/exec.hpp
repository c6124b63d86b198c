#pragma once

namespace pvs {

/// Execution mode for the data-parallel kernels. The parallel path partitions
/// independent work items across OpenMP threads with no cross-item reductions,
/// so both modes produce bit-identical results; serial stays available as the
/// reference for tests and benchmarks.
enum class ExecPolicy { serial, parallel };

}  // namespace pvs
