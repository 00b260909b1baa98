#include "tdjunta/boolfn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tdj {

namespace {

void canonicalise(Subset& s, int dim, const char* what) {
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
        throw std::invalid_argument(std::string(what) + ": repeated coordinate");
    }
    for (int c : s) {
        if (c < 1 || c > dim) {
            throw std::invalid_argument(std::string(what) + ": coordinate " + std::to_string(c) +
                                        " outside [1, " + std::to_string(dim) + "]");
        }
    }
}

}  // namespace

HypercubePoint::HypercubePoint(int dim) : signs_(static_cast<std::size_t>(dim), 1) {
    if (dim < 0) throw std::invalid_argument("HypercubePoint: negative dimension");
}

HypercubePoint::HypercubePoint(std::vector<std::int8_t> signs) : signs_(std::move(signs)) {
    for (auto s : signs_) {
        if (s != 1 && s != -1) throw std::invalid_argument("HypercubePoint: entries must be +-1");
    }
}

void HypercubePoint::set(int coord, int sign) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("HypercubePoint::set: sign must be +-1");
    signs_.at(static_cast<std::size_t>(coord - 1)) = static_cast<std::int8_t>(sign);
}

std::vector<double> HypercubePoint::as_doubles() const {
    return {signs_.begin(), signs_.end()};
}

int HypercubePoint::character(const Subset& subset) const {
    int prod = 1;
    for (int c : subset) prod *= signs_[static_cast<std::size_t>(c - 1)];
    return prod;
}

int hamming(const HypercubePoint& a, const HypercubePoint& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("hamming: dimension mismatch");
    int count = 0;
    for (int i = 1; i <= a.dim(); ++i) count += a(i) != b(i);
    return count;
}

BooleanFunction::BooleanFunction(int dim, Terms terms, std::optional<Subset> declared_support)
    : dim_(dim) {
    if (dim < 1) throw std::invalid_argument("BooleanFunction: dim must be positive");
    for (auto& [subset, coeff] : terms) {
        if (!std::isfinite(coeff)) throw std::invalid_argument("BooleanFunction: non-finite coefficient");
        if (coeff == 0.0) continue;
        Subset s = subset;
        canonicalise(s, dim, "BooleanFunction term");
        terms_[s] += coeff;
    }
    std::erase_if(terms_, [](const auto& kv) { return kv.second == 0.0; });

    Subset used;
    for (const auto& [subset, coeff] : terms_) used.insert(used.end(), subset.begin(), subset.end());
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());

    if (declared_support) {
        canonicalise(*declared_support, dim, "BooleanFunction support");
        if (!std::includes(declared_support->begin(), declared_support->end(), used.begin(), used.end())) {
            throw std::invalid_argument("BooleanFunction: a term uses a coordinate outside the declared support");
        }
        declared_ = declared_support;
        support_ = *declared_support;
    } else {
        support_ = std::move(used);
    }
}

double BooleanFunction::eval(const HypercubePoint& x) const {
    if (x.dim() != dim_) throw std::invalid_argument("eval: dimension mismatch");
    double sum = 0.0;
    for (const auto& [subset, coeff] : terms_) sum += coeff * x.character(subset);
    return sum;
}

double BooleanFunction::eval_pattern(std::uint64_t pattern) const {
    const int k = support_size();
    // Sign of each support coordinate, looked up by position in support_.
    double sum = 0.0;
    for (const auto& [subset, coeff] : terms_) {
        int prod = 1;
        for (int c : subset) {
            const auto pos = std::lower_bound(support_.begin(), support_.end(), c) - support_.begin();
            const bool plus = (pattern >> (k - 1 - pos)) & 1U;
            prod *= plus ? 1 : -1;
        }
        sum += coeff * prod;
    }
    return sum;
}

std::vector<double> BooleanFunction::support_table() const {
    const int k = support_size();
    if (k > kMaxTableSupport) throw std::length_error("support_table: support too large");
    std::vector<double> table(std::size_t{1} << k);
    for (std::uint64_t s = 0; s < table.size(); ++s) table[s] = eval_pattern(s);
    return table;
}

double BooleanFunction::influence(int coord) const {
    if (coord < 1 || coord > dim_) throw std::invalid_argument("influence: coordinate out of range");
    double sum = 0.0;
    for (const auto& [subset, coeff] : terms_) {
        if (std::binary_search(subset.begin(), subset.end(), coord)) sum += coeff * coeff;
    }
    return sum;
}

InfluenceProfile BooleanFunction::influences() const {
    InfluenceProfile out;
    out.influence.assign(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& [subset, coeff] : terms_) {
        for (int c : subset) out.influence[static_cast<std::size_t>(c - 1)] += coeff * coeff;
    }
    out.tau = support_.empty() ? 0.0 : min_support_influence();
    return out;
}

double BooleanFunction::min_support_influence() const {
    if (support_.empty()) throw std::invalid_argument("min_support_influence: empty support");
    double tau = influence(support_.front());
    for (int c : support_) tau = std::min(tau, influence(c));
    return tau;
}

BooleanFunction BooleanFunction::apply_permutation(std::span<const int> perm) const {
    if (static_cast<int>(perm.size()) != dim_) throw std::invalid_argument("apply_permutation: wrong length");
    std::vector<bool> seen(static_cast<std::size_t>(dim_) + 1, false);
    for (int v : perm) {
        if (v < 1 || v > dim_ || seen[static_cast<std::size_t>(v)]) {
            throw std::invalid_argument("apply_permutation: not a bijection on [d]");
        }
        seen[static_cast<std::size_t>(v)] = true;
    }
    auto image = [&](const Subset& s) {
        Subset out;
        out.reserve(s.size());
        for (int c : s) out.push_back(perm[static_cast<std::size_t>(c - 1)]);
        std::sort(out.begin(), out.end());
        return out;
    };
    Terms mapped;
    for (const auto& [subset, coeff] : terms_) mapped[image(subset)] = coeff;
    std::optional<Subset> declared;
    if (declared_) declared = image(*declared_);
    return BooleanFunction(dim_, std::move(mapped), std::move(declared));
}

bool BooleanFunction::is_boolean_valued() const {
    const auto table = support_table();
    return std::all_of(table.begin(), table.end(),
                       [](double v) { return std::abs(std::abs(v) - 1.0) <= 1e-9; });
}

double BooleanFunction::sum_of_squares() const {
    double s = 0.0;
    for (const auto& [subset, coeff] : terms_) s += coeff * coeff;
    return s;
}

BooleanFunction make_parity(int dim, Subset support) {
    if (support.empty()) throw std::invalid_argument("make_parity: empty support");
    canonicalise(support, dim, "make_parity");
    return BooleanFunction(dim, {{support, 1.0}}, support);
}

void walsh_hadamard(std::span<double> values) {
    const std::size_t n = values.size();
    for (std::size_t h = 1; h < n; h <<= 1) {
        for (std::size_t i = 0; i < n; i += h << 1) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = values[j];
                const double b = values[j + h];
                values[j] = a + b;
                values[j + h] = a - b;
            }
        }
    }
}

BooleanFunction make_junta_from_table(int dim, Subset support, std::span<const double> table) {
    const int k = static_cast<int>(support.size());
    if (k > kMaxTableSupport) throw std::invalid_argument("make_junta_from_table: support larger than 20");
    if (table.size() != (std::size_t{1} << k)) {
        throw std::invalid_argument("make_junta_from_table: table length must be 2^k");
    }
    Subset ordered = support;
    canonicalise(support, dim, "make_junta_from_table");
    // The table is indexed by the caller's ordering; position m of `ordered`
    // is bit (k-1-m) of the pattern index.
    std::vector<double> coeffs(table.begin(), table.end());
    double scale = 0.0;
    for (double v : coeffs) {
        if (!std::isfinite(v)) throw std::invalid_argument("make_junta_from_table: non-finite value");
        scale = std::max(scale, std::abs(v));
    }
    walsh_hadamard(coeffs);
    // Bit set = +1 and bit clear = -1, so s_i = -(-1)^bit and the character of
    // T picks up a factor (-1)^|T| relative to the standard Hadamard kernel.
    const double norm = std::ldexp(1.0, -k);
    const double cutoff = 1e-13 * std::max(scale, 1.0);
    BooleanFunction::Terms terms;
    for (std::size_t idx = 0; idx < coeffs.size(); ++idx) {
        const int size = std::popcount(idx);
        const double c = coeffs[idx] * norm * ((size & 1) ? -1.0 : 1.0);
        if (std::abs(c) <= cutoff) continue;
        Subset s;
        for (int m = 0; m < k; ++m) {
            if ((idx >> (k - 1 - m)) & 1U) s.push_back(ordered[static_cast<std::size_t>(m)]);
        }
        terms[s] = c;
    }
    return BooleanFunction(dim, std::move(terms), std::move(support));
}

HypercubePoint pattern_point(int dim, const Subset& support, std::uint64_t pattern) {
    HypercubePoint x(dim);
    const int k = static_cast<int>(support.size());
    for (int m = 0; m < k; ++m) {
        if (!((pattern >> (k - 1 - m)) & 1U)) x.flip(support[static_cast<std::size_t>(m)]);
    }
    return x;
}

}  // namespace tdj
