// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace calrec {

// Splits one line on `sep`, honoring double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line, char sep = ',');

// Reads a delimited text file into rows of fields. Skips blank lines and,
// when `comment` is nonzero, lines starting with that character. When
// `line_numbers` is given it receives the 1-based physical line of each
// returned row, for error messages that survive the skipping.
std::vector<std::vector<std::string>> read_delimited(
    const std::string& path, char sep = ',', char comment = '\0',
    std::vector<std::size_t>* line_numbers = nullptr);

// Shortest round-trip decimal form, so reruns produce byte-identical files
// and values parse back to the exact same double.
std::string format_double(double v);

double parse_double(std::string_view s, const std::string& context);
std::int64_t parse_int(std::string_view s, const std::string& context);

// Joins fields with commas, quoting any field that needs it.
std::string join_csv(const std::vector<std::string>& fields);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace calrec
