#include "portal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <omp.h>

namespace portal::kernels {

double cosine(Row a, Row b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    if (denom == 0.0) return 0.0;
    return std::clamp(dot / denom, -1.0, 1.0);
}

static void check_shapes(Row query, std::span<const Row> rows, std::span<double> out) {
    if (out.size() != rows.size()) throw std::invalid_argument("cosine_scores: output size mismatch");
    for (const Row& r : rows) {
        if (r.size() != query.size())
            throw std::invalid_argument("cosine_scores: dimension mismatch");
    }
}

void cosine_scores_serial(Row query, std::span<const Row> rows, std::span<double> out) {
    check_shapes(query, rows, out);
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = cosine(query, rows[i]);
}

void cosine_scores_parallel(Row query, std::span<const Row> rows, std::span<double> out) {
    check_shapes(query, rows, out);
    const auto n = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = cosine(query, rows[i]);
}

std::vector<double> cosine_scores(Row query, std::span<const Row> rows) {
    std::vector<double> out(rows.size());
    if (rows.size() >= kParallelMinRows && omp_get_max_threads() > 1) {
        cosine_scores_parallel(query, rows, out);
    } else {
        cosine_scores_serial(query, rows, out);
    }
    return out;
}

}  // namespace portal::kernels
