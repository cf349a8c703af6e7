#include "npcsh/render.hpp"

#include <algorithm>
#include <cctype>

#include "npcsh/error.hpp"

namespace npcsh {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool is_path_expr(const std::string& expr) {
    if (expr.empty() || expr.front() == '.' || expr.back() == '.') return false;
    bool prev_dot = true;  // segment must not start with a digit-only check; keep it simple
    for (unsigned char c : expr) {
        if (c == '.') {
            if (prev_dot) return false;  // empty segment
            prev_dot = true;
        } else if (std::isalnum(c) || c == '_' || c == '-') {
            prev_dot = false;
        } else {
            return false;
        }
    }
    return !prev_dot;
}

std::vector<std::string> split_path(const std::string& expr) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t dot = expr.find('.', start);
        if (dot == std::string::npos) {
            parts.push_back(expr.substr(start));
            return parts;
        }
        parts.push_back(expr.substr(start, dot - start));
        start = dot + 1;
    }
}

// A string step output may end with a structured payload: if its final
// non-empty line parses as a JSON object, dotted access digs into that.
Value structured_view(const std::string& text) {
    size_t end = text.find_last_not_of(" \t\r\n");
    if (end == std::string::npos) return Value();
    size_t line_start = text.rfind('\n', end);
    line_start = (line_start == std::string::npos) ? 0 : line_start + 1;
    std::string last_line = text.substr(line_start, end - line_start + 1);
    Value parsed = Value::parse(last_line, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) return Value();
    return parsed;
}

Value traverse(const std::string& expr, const Bindings& bindings) {
    std::vector<std::string> parts = split_path(expr);
    auto root = bindings.find(parts[0]);
    if (root == bindings.end()) {
        throw Error(ErrorKind::UnboundVariable, "'" + parts[0] + "' is not bound");
    }
    Value current = root->second;
    for (size_t i = 1; i < parts.size(); ++i) {
        if (current.is_string()) {
            Value view = structured_view(current.get<std::string>());
            if (view.is_object()) current = std::move(view);
        }
        if (!current.is_object() || !current.contains(parts[i])) {
            throw Error(ErrorKind::BadPath,
                        "'" + expr + "': no field '" + parts[i] + "' at segment " +
                            std::to_string(i + 1));
        }
        current = current[parts[i]];
    }
    return current;
}

// Scans for the next well-formed hole at or after `pos`. Returns npos if none.
size_t next_hole(const std::string& text, size_t pos, size_t& open, size_t& close) {
    while (true) {
        open = text.find("{{", pos);
        if (open == std::string::npos) return std::string::npos;
        close = text.find("}}", open + 2);
        if (close == std::string::npos) return std::string::npos;
        return open;
    }
}

} // namespace

std::string render_template(const std::string& text, const Bindings& bindings,
                            RenderTrace* trace) {
    std::string out;
    out.reserve(text.size());
    size_t pos = 0;
    while (pos < text.size()) {
        size_t open, close;
        if (next_hole(text, pos, open, close) == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        std::string expr = trim(text.substr(open + 2, close - open - 2));
        if (!is_path_expr(expr)) {
            // Not our dialect (e.g. Jinja filters); leave the braces alone.
            out.append(text, open, close + 2 - open);
        } else {
            std::string replacement = value_to_text(traverse(expr, bindings));
            if (trace) trace->events.push_back({expr, replacement});
            out += replacement;
        }
        pos = close + 2;
    }
    return out;
}

bool has_template_holes(const std::string& text) {
    size_t pos = 0;
    while (pos < text.size()) {
        size_t open, close;
        if (next_hole(text, pos, open, close) == std::string::npos) return false;
        if (is_path_expr(trim(text.substr(open + 2, close - open - 2)))) return true;
        pos = close + 2;
    }
    return false;
}

std::vector<std::string> template_roots(const std::string& text) {
    std::vector<std::string> roots;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t open, close;
        if (next_hole(text, pos, open, close) == std::string::npos) break;
        std::string expr = trim(text.substr(open + 2, close - open - 2));
        if (is_path_expr(expr)) {
            std::string root = split_path(expr)[0];
            if (std::find(roots.begin(), roots.end(), root) == roots.end()) {
                roots.push_back(std::move(root));
            }
        }
        pos = close + 2;
    }
    return roots;
}

} // namespace npcsh
