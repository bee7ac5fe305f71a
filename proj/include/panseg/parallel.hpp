#pragma once

namespace panseg {

/// Sets the OpenMP thread budget for all kernels. Every kernel produces
/// byte-identical results for any thread count: pixel-parallel loops write
/// disjoint outputs and reductions accumulate fixed per-row partials that are
/// combined serially.
void set_max_threads(int n);
int max_threads();

}  // namespace panseg
