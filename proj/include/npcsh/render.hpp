#pragma once

#include <string>
#include <vector>

#include "npcsh/value.hpp"

namespace npcsh {

// One substitution performed while rendering a template.
struct RenderEvent {
    std::string expression;   // text between the braces, trimmed
    std::string replacement;  // text spliced into the output
};

struct RenderTrace {
    std::vector<RenderEvent> events;
};

// Renders the `{{ expr }}` dialect: expr is a bare identifier or a dotted
// path (a.b.c). The root segment is looked up in `bindings`; remaining
// segments index into object values. Dotted access into a *string* value
// parses the string's final line as JSON first. Unknown roots raise
// UnboundVariable, bad traversals raise BadPath. Everything outside the
// braces passes through verbatim; `{{` without a matching `}}` is literal.
std::string render_template(const std::string& text, const Bindings& bindings,
                            RenderTrace* trace = nullptr);

// True if `text` contains at least one well-formed `{{ expr }}` hole.
bool has_template_holes(const std::string& text);

// Lists the root identifiers referenced by the template, in order of first
// appearance. Used to pre-check inputs before running a step.
std::vector<std::string> template_roots(const std::string& text);

} // namespace npcsh
