#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace evogrid {

/// Fixed-length allele vector; the replicator under selection. Alleles never
/// change during an agent's lifetime (there is no mutation operator).
struct Genome {
    std::vector<std::uint32_t> alleles;

    Genome() = default;
    explicit Genome(std::vector<std::uint32_t> a) : alleles(std::move(a)) {}

    /// Uniform genome: every position carries the same allele.
    static Genome uniform(std::size_t length, std::uint32_t allele) {
        return Genome(std::vector<std::uint32_t>(length, allele));
    }

    std::size_t size() const { return alleles.size(); }

    bool operator==(const Genome& other) const { return alleles == other.alleles; }
};

/// Fraction of positionally identical alleles between two equal-length genomes.
/// Symmetric, reflexive, and valued in {0, 1/N, ..., 1}.
inline double kinship(const Genome& a, const Genome& b) {
    if (a.size() != b.size())
        throw std::domain_error("kinship: genome length mismatch");
    std::size_t matches = 0;
    for (std::size_t p = 0; p < a.alleles.size(); ++p)
        matches += (a.alleles[p] == b.alleles[p]) ? 1 : 0;
    return static_cast<double>(matches) / static_cast<double>(a.size());
}

} // namespace evogrid
