#include "portal/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "portal/kernels.hpp"

namespace portal {

double Embedding::norm() const {
    double s = 0.0;
    for (float v : values) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

Embedding normalized(std::span<const float> values) {
    double s = 0.0;
    for (float v : values) s += static_cast<double>(v) * v;
    const double n = std::sqrt(s);
    if (values.empty() || n == 0.0 || !std::isfinite(n))
        throw std::invalid_argument("cannot normalize a zero or non-finite vector");
    Embedding out;
    out.values.reserve(values.size());
    for (float v : values) out.values.push_back(static_cast<float>(v / n));
    return out;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
    if (a.dim() == 0 || a.norm() == 0.0 || b.norm() == 0.0)
        throw std::invalid_argument("cosine_similarity: zero vector");
    return kernels::cosine(a.view(), b.view());
}

}  // namespace portal
