#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tdjunta/shallow.hpp"

namespace tdj {

struct CriterionOptions {
    std::size_t workers = 1;
    /// Phase-I closed form checked by criterion 2; swapped out for fault injection.
    ClosedFormUpdate closed_form = phase1_closed_form_update;
    /// Run only the first `case_limit` cases (0: all). Used by the determinism rerun.
    std::size_t case_limit = 0;
};

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    /// One FNV-1a digest per case over the exact bytes of its outputs.
    std::vector<std::uint64_t> digests;
};

inline constexpr int kCriterionCount = 12;

std::string criterion_title(int id);

/// Runs criterion `id` in 1..12. Throws std::out_of_range otherwise.
CriterionResult run_criterion(int id, const CriterionOptions& opts = {});

/// "PASS  3  title (1.2 s): detail"
std::string format_criterion_line(const CriterionResult& r);

/// Parses "1-5,7,9" into sorted unique ids in 1..12; throws std::invalid_argument.
std::vector<int> parse_criteria_list(const std::string& text);

/// FNV-1a over the bytes of `text`, chained from `seed`.
std::uint64_t fnv1a(const std::string& text, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace tdj
