#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace npcsh {

// Runtime values (input arguments, step outputs, template bindings) are JSON
// values: the file formats, the wire protocol, and the trace logs all share
// this representation.
using Value = nlohmann::json;

using Bindings = std::map<std::string, Value>;

enum class TypeTag { String, Integer, Number, Boolean, List };

// Throws Error{BadTypeTag} naming the offending tag.
TypeTag type_tag_from_string(const std::string& tag);
const char* to_string(TypeTag tag);

// True when the value already has the declared type (integers count as
// numbers, but not the other way around).
bool value_matches(TypeTag tag, const Value& value);

// Lossless coercion: quoted numerals and booleans parse into their typed
// form ("5" -> 5, "true" -> true); anything else returns nullopt. Values
// that already match pass through unchanged.
std::optional<Value> coerce_value(TypeTag tag, const Value& value);

// The string form a template substitution produces: strings verbatim,
// everything else in JSON text form.
std::string value_to_text(const Value& value);

} // namespace npcsh
