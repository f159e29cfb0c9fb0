#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace portal {

inline constexpr std::size_t kDefaultEmbeddingDim = 512;

// Fixed-length real vector for an image or a text. Stored embeddings
// are L2-normalized; queries need not be.
struct Embedding {
    std::vector<float> values;

    std::size_t dim() const { return values.size(); }
    std::span<const float> view() const { return values; }
    double norm() const;

    bool operator==(const Embedding&) const = default;
};

// Returns a unit-length copy. Throws std::invalid_argument on a zero
// or empty vector.
Embedding normalized(std::span<const float> values);

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws std::invalid_argument
// on a dimension mismatch or a zero-norm operand.
double cosine_similarity(const Embedding& a, const Embedding& b);

}  // namespace portal
