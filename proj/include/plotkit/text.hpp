#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace plotkit::text {

std::string trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Splits on runs of ASCII whitespace; empty runs are dropped.
std::vector<std::string> split_words(std::string_view s);

// Word count shared by the annotation service and its UI: number of
// whitespace-delimited runs.
std::size_t word_count(std::string_view s);

// Collapses every whitespace run (including newlines) to a single space and trims.
std::string flatten(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Case-folded, punctuation-stripped, whitespace-collapsed form.
std::string normalize(std::string_view s);

// |A ∩ B| / |A ∪ B| over the normalized word sets. Two empty sets give 1.
double jaccard(std::string_view a, std::string_view b);

// Equal after normalization, or word overlap of at least `threshold`.
bool near_duplicate(std::string_view a, std::string_view b, double threshold = 0.8);

// Runs of [.!?] followed by whitespace or end of text. Non-empty text with no
// terminator counts as one sentence.
std::size_t sentence_count(std::string_view s);

// FNV-1a, 64 bit. Stable across platforms; used for content-derived ids.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_id(std::uint64_t h);

// ISO-8601 UTC, second precision.
std::string iso8601(std::int64_t unix_seconds);

}  // namespace plotkit::text
