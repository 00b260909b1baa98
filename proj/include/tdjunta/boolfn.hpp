#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace tdj {

/// Coordinates are 1-indexed everywhere in the public API: a subset of [d] is
/// a sorted list of integers in 1..d.
using Subset = std::vector<int>;

/// A point of {-1,+1}^d.
class HypercubePoint {
public:
    HypercubePoint() = default;
    /// All-ones point of dimension d.
    explicit HypercubePoint(int dim);
    /// Throws std::invalid_argument if any entry is not exactly -1 or +1.
    explicit HypercubePoint(std::vector<std::int8_t> signs);

    int dim() const noexcept { return static_cast<int>(signs_.size()); }

    /// Sign of coordinate i in 1..d.
    int operator()(int coord) const { return signs_[static_cast<std::size_t>(coord - 1)]; }
    void flip(int coord) { signs_[static_cast<std::size_t>(coord - 1)] *= -1; }
    void set(int coord, int sign);

    /// Storage in coordinate order (entry 0 is coordinate 1).
    std::span<const std::int8_t> signs() const noexcept { return signs_; }
    std::vector<double> as_doubles() const;

    /// Product of the coordinates in `subset` (the character x^S).
    int character(const Subset& subset) const;

    friend bool operator==(const HypercubePoint&, const HypercubePoint&) = default;

private:
    std::vector<std::int8_t> signs_;
};

int hamming(const HypercubePoint& a, const HypercubePoint& b);

/// Per-coordinate influences and their minimum over the declared support.
struct InfluenceProfile {
    std::vector<double> influence;  // entry i-1 holds Inf_i
    double tau = 0.0;
};

/// Real-valued function on {-1,+1}^d stored as a sparse Fourier-Walsh expansion.
///
/// Values are immutable after construction. A declared support, when present,
/// must contain every coordinate used by a term; it may be larger (a coordinate
/// can be declared relevant yet carry no weight, e.g. a constant table).
class BooleanFunction {
public:
    using Terms = std::map<Subset, double>;

    /// Validates and canonicalises every subset. Zero coefficients are dropped.
    BooleanFunction(int dim, Terms terms, std::optional<Subset> declared_support = std::nullopt);

    int dim() const noexcept { return dim_; }
    const Terms& terms() const noexcept { return terms_; }
    bool has_declared_support() const noexcept { return declared_.has_value(); }

    /// The declared support if present, else the union of all term subsets.
    const Subset& support() const noexcept { return support_; }
    int support_size() const noexcept { return static_cast<int>(support_.size()); }

    double eval(const HypercubePoint& x) const;
    /// Value at a support pattern. Bit (k-1-m) of `pattern` set means the m-th
    /// support coordinate is +1 (lexicographic order, first coordinate most
    /// significant, -1 < +1).
    double eval_pattern(std::uint64_t pattern) const;
    /// Values at all 2^k support patterns in lexicographic order.
    std::vector<double> support_table() const;

    double influence(int coord) const;
    InfluenceProfile influences() const;
    /// tau = min over the support of Inf_i. Throws if the support is empty.
    double min_support_influence() const;

    /// Returns x -> f(pi . x) with (pi . x)_i = x_{pi(i)}. `perm` lists pi(1..d).
    BooleanFunction apply_permutation(std::span<const int> perm) const;

    /// True when every support pattern evaluates to -1 or +1 (within 1e-9).
    bool is_boolean_valued() const;
    double sum_of_squares() const;

    friend bool operator==(const BooleanFunction&, const BooleanFunction&) = default;

private:
    int dim_ = 0;
    Terms terms_;
    std::optional<Subset> declared_;
    Subset support_;
};

/// Product of the coordinates in `support`.
BooleanFunction make_parity(int dim, Subset support);

/// Junta on an ordered support from its 2^k value table. The ordering of the
/// table follows BooleanFunction::eval_pattern. k is capped at 20.
BooleanFunction make_junta_from_table(int dim, Subset support, std::span<const double> table);

/// In-place Walsh-Hadamard transform (unnormalised, natural order).
void walsh_hadamard(std::span<double> values);

/// Maps a support pattern index to the point of {-1,+1}^d with all other
/// coordinates set to +1.
HypercubePoint pattern_point(int dim, const Subset& support, std::uint64_t pattern);

inline constexpr int kMaxTableSupport = 20;

}  // namespace tdj
