#pragma once

#include <string>
#include <vector>

namespace foodaccess::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column position or -1.
    int column(const std::string& name) const;
};

// Reads a UTF-8 comma-separated file with a mandatory header row.
// Lines starting with '#' (reproducibility stamps) are skipped. Fields
// may be double-quoted; "" inside quotes escapes a quote.
Table read_csv(const std::string& path);

// Quotes a field only when it contains a comma, quote, or newline.
std::string escape_field(const std::string& field);

}  // namespace foodaccess::csv
