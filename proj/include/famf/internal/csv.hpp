#pragma once

#include <istream>
#include <string>
#include <vector>

namespace famf::internal {

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line
// endings. Unquoted fields are trimmed of surrounding blanks. Blank lines are
// skipped.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    bool any = false;

    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return std::string();
        auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    };
    auto end_field = [&] {
        row.push_back(was_quoted ? field : trim(field));
        field.clear();
        was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        bool blank = row.size() == 1 && row[0].empty();
        if (!blank) rows.push_back(std::move(row));
        row.clear();
    };

    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get(c);
            end_row();
        } else if (c == '\n') {
            end_row();
        } else {
            field.push_back(c);
        }
    }
    if (any && (!field.empty() || !row.empty() || was_quoted)) end_row();
    // Strip a UTF-8 byte order mark from the first cell.
    if (!rows.empty() && !rows[0].empty() && rows[0][0].rfind("\xEF\xBB\xBF", 0) == 0)
        rows[0][0].erase(0, 3);
    return rows;
}

}  // namespace famf::internal
