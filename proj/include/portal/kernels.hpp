#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Batched cosine scoring of one query against many stored rows. This is
// the hot loop of both object re-recognition and memory search.
//
// Two implementations are kept: a plain serial loop that serves as the
// reference in tests, and an OpenMP version parallel over rows. Each row
// is scored by the same scalar routine in both, so results are bitwise
// identical regardless of thread count.
namespace portal::kernels {

using Row = std::span<const float>;

// Scalar cosine used by both paths. Returns 0 when either operand has
// zero norm; callers validate norms before scanning.
double cosine(Row a, Row b);

void cosine_scores_serial(Row query, std::span<const Row> rows, std::span<double> out);
void cosine_scores_parallel(Row query, std::span<const Row> rows, std::span<double> out);

// Dispatches to the parallel kernel once the batch is large enough to
// amortize the fork/join.
std::vector<double> cosine_scores(Row query, std::span<const Row> rows);

inline constexpr std::size_t kParallelMinRows = 256;

}  // namespace portal::kernels
