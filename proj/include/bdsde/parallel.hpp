#pragma once

namespace bdsde {

/// Worker count used by every parallel loop in the library. Results never
/// depend on it: each loop writes disjoint slots and reductions run serially
/// in index order afterwards.
void set_thread_count(int threads);
int thread_count();

} // namespace bdsde
